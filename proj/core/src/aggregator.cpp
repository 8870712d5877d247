#include "edffd/aggregator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "edffd/error.hpp"

namespace edffd {

GroupLinear::GroupLinear(int in_width, int out_width, int n_groups)
    : groups(n_groups), in(in_width), out(out_width) {
  if (n_groups < 1 || in_width < 1 || out_width < 1) {
    throw Error(ErrorCode::InvalidArgument, "layer widths and group count must be positive");
  }
  if (in_width % n_groups != 0 || out_width % n_groups != 0) {
    throw Error(ErrorCode::NotDivisible, "layer width not divisible by group count");
  }
  weights.assign(static_cast<std::size_t>(in_width) * out_width / n_groups, 0.0);
  biases.assign(static_cast<std::size_t>(out_width), 0.0);
}

namespace {

void check_layer(const GroupLinear& l) {
  if (l.groups < 1 || l.in % l.groups != 0 || l.out % l.groups != 0) {
    throw Error(ErrorCode::NotDivisible, "layer width not divisible by group count");
  }
  if (l.weights.size() != static_cast<std::size_t>(l.in) * l.out / l.groups ||
      l.biases.size() != static_cast<std::size_t>(l.out)) {
    throw Error(ErrorCode::WidthMismatch, "layer parameter storage does not match its widths");
  }
}

void check_head(const Head& head, std::size_t input) {
  for (const auto& l : head.layers) check_layer(l);
  if (static_cast<std::size_t>(head.layers[0].in) != input ||
      head.layers[0].out != head.layers[1].in || head.layers[1].out != head.layers[2].in) {
    throw Error(ErrorCode::WidthMismatch, "layer widths do not chain");
  }
}

void glorot(GroupLinear& l, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (l.group_in() + l.group_out()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : l.weights) v = dist(rng);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Batched forward/backward for training. Rows are samples.
struct BatchState {
  std::array<RowMat, 4> act;  // act[0] = input, act[i+1] = output of layer i
};

void batch_affine(const GroupLinear& l, const RowMat& x, RowMat& y) {
  y.resize(x.rows(), l.out);
  const int gi = l.group_in(), go = l.group_out();
  for (int g = 0; g < l.groups; ++g) {
    Eigen::Map<const RowMat> w(l.weights.data() + static_cast<std::size_t>(g) * go * gi, go, gi);
    y.middleCols(g * go, go).noalias() = x.middleCols(g * gi, gi) * w.transpose();
    y.middleCols(g * go, go).rowwise() +=
        Eigen::Map<const Eigen::RowVectorXd>(l.biases.data() + g * go, go);
  }
}

void batch_forward(const Head& head, BatchState& s) {
  for (int i = 0; i < 3; ++i) {
    batch_affine(head.layers[i], s.act[i], s.act[i + 1]);
    if (i < 2) s.act[i + 1] = s.act[i + 1].cwiseMax(0.0);
  }
}

// Accumulates parameter gradients of sum(upstream .* output) into grads.
void batch_backward(const Head& head, const BatchState& s, RowMat upstream,
                    std::array<LayerGrad, 3>& grads) {
  for (int i = 2; i >= 0; --i) {
    const GroupLinear& l = head.layers[i];
    if (i < 2) upstream = (s.act[i + 1].array() > 0.0).select(upstream, 0.0);
    const int gi = l.group_in(), go = l.group_out();
    RowMat down(upstream.rows(), l.in);
    for (int g = 0; g < l.groups; ++g) {
      const auto dy = upstream.middleCols(g * go, go);
      Eigen::Map<RowMat> gw(grads[i].weights.data() + static_cast<std::size_t>(g) * go * gi, go, gi);
      gw.noalias() = dy.transpose() * s.act[i].middleCols(g * gi, gi);
      Eigen::Map<Eigen::RowVectorXd>(grads[i].biases.data() + g * go, go) = dy.colwise().sum();
      if (i > 0) {
        Eigen::Map<const RowMat> w(l.weights.data() + static_cast<std::size_t>(g) * go * gi, go, gi);
        down.middleCols(g * gi, gi).noalias() = dy * w;
      }
    }
    upstream = std::move(down);
  }
}

RowMat gather(const std::vector<std::vector<double>>& rows, std::span<const std::size_t> idx) {
  RowMat m(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(rows[idx[0]].size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[idx[r]].data(), m.cols());
  }
  return m;
}

}  // namespace

std::vector<double> affine_forward(std::span<const double> x, const GroupLinear& l) {
  check_layer(l);
  if (x.size() != static_cast<std::size_t>(l.in)) {
    throw Error(ErrorCode::WidthMismatch, "input width differs from layer width");
  }
  std::vector<double> y(static_cast<std::size_t>(l.out));
  const int gi = l.group_in(), go = l.group_out();
  for (int g = 0; g < l.groups; ++g) {
    for (int r = 0; r < go; ++r) {
      double acc = l.biases[static_cast<std::size_t>(g * go + r)];
      for (int c = 0; c < gi; ++c) acc += l.w(g, r, c) * x[static_cast<std::size_t>(g * gi + c)];
      y[static_cast<std::size_t>(g * go + r)] = acc;
    }
  }
  return y;
}

std::vector<double> gll_forward(std::span<const double> x, const GroupLinear& layer) {
  auto y = affine_forward(x, layer);
  for (double& v : y) v = std::max(v, 0.0);
  return y;
}

AsmaHead make_asma_head(const HeadWidths& wd, int n_groups, std::uint64_t seed) {
  AsmaHead h;
  h.layers = {GroupLinear(wd.in, wd.hidden1, n_groups), GroupLinear(wd.hidden1, wd.hidden2, n_groups),
              GroupLinear(wd.hidden2, wd.out, 1)};
  std::mt19937_64 rng(seed);
  for (auto& l : h.layers) glorot(l, rng);
  return h;
}

MlpHead make_mlp_head(const HeadWidths& wd, std::uint64_t seed) {
  MlpHead h;
  h.layers = {GroupLinear(wd.in, wd.hidden1, 1), GroupLinear(wd.hidden1, wd.hidden2, 1),
              GroupLinear(wd.hidden2, wd.out, 1)};
  std::mt19937_64 rng(seed);
  for (auto& l : h.layers) glorot(l, rng);
  return h;
}

std::vector<double> head_forward(std::span<const double> x, const Head& head) {
  check_head(head, x.size());
  auto a = gll_forward(x, head.layers[0]);
  a = gll_forward(a, head.layers[1]);
  return affine_forward(a, head.layers[2]);
}

std::vector<double> asma_forward(std::span<const double> x, const AsmaHead& head) {
  return head_forward(x, head);
}

HeadGrad head_backward(std::span<const double> x, const Head& head, std::span<const double> upstream) {
  check_head(head, x.size());
  if (upstream.size() != static_cast<std::size_t>(head.output_width())) {
    throw Error(ErrorCode::WidthMismatch, "upstream gradient width differs from head output");
  }
  std::array<std::vector<double>, 3> act;  // layer inputs
  act[0].assign(x.begin(), x.end());
  act[1] = gll_forward(act[0], head.layers[0]);
  act[2] = gll_forward(act[1], head.layers[1]);

  HeadGrad g;
  std::vector<double> up(upstream.begin(), upstream.end());
  for (int i = 2; i >= 0; --i) {
    const GroupLinear& l = head.layers[i];
    if (i < 2) {
      // Rectifier gate: the layer output is act[i + 1].
      for (std::size_t k = 0; k < up.size(); ++k) {
        if (!(act[i + 1][k] > 0.0)) up[k] = 0.0;
      }
    }
    LayerGrad& lg = g.layers[i];
    lg.weights.assign(l.weights.size(), 0.0);
    lg.biases = up;
    std::vector<double> down(static_cast<std::size_t>(l.in), 0.0);
    const int gi = l.group_in(), go = l.group_out();
    for (int grp = 0; grp < l.groups; ++grp) {
      for (int r = 0; r < go; ++r) {
        const double d = up[static_cast<std::size_t>(grp * go + r)];
        for (int c = 0; c < gi; ++c) {
          const auto col = static_cast<std::size_t>(grp * gi + c);
          lg.weights[(static_cast<std::size_t>(grp) * go + r) * gi + c] = d * act[i][col];
          down[col] += d * l.w(grp, r, c);
        }
      }
    }
    up = std::move(down);
  }
  g.input = std::move(up);
  return g;
}

HeadGrad asma_backward(std::span<const double> x, const AsmaHead& head,
                       std::span<const double> upstream) {
  return head_backward(x, head, upstream);
}

ParamCount param_count(const GroupLinear& l) noexcept {
  return {static_cast<std::size_t>(l.in) * l.out / l.groups, static_cast<std::size_t>(l.out)};
}

ParamCount param_count(const Head& head) noexcept {
  ParamCount total;
  for (const auto& l : head.layers) {
    const ParamCount c = param_count(l);
    total.weights += c.weights;
    total.biases += c.biases;
  }
  return total;
}

double mean_squared_error(const Head& head, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  check_head(head, data.inputs[0].size());
  BatchState s;
  s.act[0] = gather(data.inputs, idx);
  batch_forward(head, s);
  const RowMat t = gather(data.targets, idx);
  return (s.act[3] - t).squaredNorm() / static_cast<double>(t.size());
}

TrainReport train_toy_regressor(Head& head, const Dataset& train, const Dataset& heldout,
                                const TrainOptions& opts) {
  TrainReport report;
  if (train.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty training set");
  check_head(head, train.inputs[0].size());
  std::array<LayerGrad, 3> grads, velocity;
  for (int i = 0; i < 3; ++i) {
    grads[i] = {std::vector<double>(head.layers[i].weights.size()),
                std::vector<double>(head.layers[i].biases.size())};
    velocity[i] = grads[i];
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  const auto batch = static_cast<std::size_t>(std::max(opts.batch_size, 1));
  BatchState s;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::span<const std::size_t> idx(order.data() + b0, std::min(batch, order.size() - b0));
      s.act[0] = gather(train.inputs, idx);
      batch_forward(head, s);
      const RowMat diff = s.act[3] - gather(train.targets, idx);
      const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
      if (!std::isfinite(loss)) throw Error(ErrorCode::Divergence, "training loss is not finite");
      epoch_sum += diff.squaredNorm();
      batch_backward(head, s, diff * (2.0 / static_cast<double>(diff.size())), grads);
      for (int i = 0; i < 3; ++i) {
        auto step = [&](std::vector<double>& p, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = opts.momentum * v[k] - opts.learning_rate * g[k];
            p[k] += v[k];
          }
        };
        step(head.layers[i].weights, velocity[i].weights, grads[i].weights);
        step(head.layers[i].biases, velocity[i].biases, grads[i].biases);
      }
    }
    report.epoch_loss.push_back(epoch_sum /
                                static_cast<double>(train.size() * train.targets[0].size()));
  }
  report.train_mse = mean_squared_error(head, train);
  report.heldout_mse = mean_squared_error(head, heldout);
  if (!std::isfinite(report.train_mse)) throw Error(ErrorCode::Divergence, "training diverged");
  return report;
}

std::string head_to_json(const AsmaHead& head) {
  nlohmann::ordered_json j;
  j["model"] = "asma";
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : head.layers) {
    nlohmann::ordered_json lj;
    lj["groups"] = l.groups;
    lj["in"] = l.in;
    lj["out"] = l.out;
    lj["weights"] = l.weights;
    lj["biases"] = l.biases;
    j["layers"].push_back(std::move(lj));
  }
  return j.dump(2);
}

AsmaHead asma_head_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Schema, "malformed JSON document");
  if (!j.contains("model") || j["model"] != "asma") throw Error(ErrorCode::Schema, "model");
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].size() != 3) {
    throw Error(ErrorCode::Schema, "layers");
  }
  AsmaHead h;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& lj = j["layers"][i];
    for (const char* key : {"groups", "in", "out"}) {
      if (!lj.contains(key) || !lj[key].is_number_integer()) {
        throw Error(ErrorCode::Schema, std::string("layers.") + key);
      }
    }
    GroupLinear l(lj["in"].get<int>(), lj["out"].get<int>(), lj["groups"].get<int>());
    for (const char* key : {"weights", "biases"}) {
      if (!lj.contains(key) || !lj[key].is_array()) {
        throw Error(ErrorCode::Schema, std::string("layers.") + key);
      }
    }
    auto w = lj["weights"].get<std::vector<double>>();
    auto b = lj["biases"].get<std::vector<double>>();
    if (w.size() != l.weights.size()) throw Error(ErrorCode::Schema, "layers.weights");
    if (b.size() != l.biases.size()) throw Error(ErrorCode::Schema, "layers.biases");
    l.weights = std::move(w);
    l.biases = std::move(b);
    h.layers[i] = std::move(l);
  }
  check_head(h, static_cast<std::size_t>(h.layers[0].in));
  return h;
}

}  // namespace edffd
