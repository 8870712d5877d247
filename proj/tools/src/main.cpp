#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "alloc_stats.hpp"
#include "edffd/basis.hpp"
#include "edffd/checks/suite.hpp"
#include "edffd/error.hpp"
#include "edffd/image_io.hpp"
#include "edffd/params_json.hpp"
#include "edffd/pipeline.hpp"
#include "edffd/synthetic.hpp"
#include "edffd/tps.hpp"

namespace fs = std::filesystem;
using namespace edffd;

namespace {

constexpr int kExitSelfcheck = 1;
constexpr int kExitIo = 2;
constexpr int kExitRegistration = 3;
constexpr int kExitSchema = 4;

struct Output {
  fs::path path;
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

// Writes every file to a temporary sibling first and renames only once all
// of them are on disk, so a failure leaves no partial result set behind.
void commit(const std::vector<Output>& outputs) {
  std::vector<fs::path> temps;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const Output& o : outputs) {
    fs::path tmp = o.path;
    tmp += ".partial";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    temps.push_back(tmp);
    out.write(reinterpret_cast<const char*>(o.bytes.data()), static_cast<std::streamsize>(o.bytes.size()));
    out.close();
    if (!out) {
      cleanup();
      throw Error(ErrorCode::Io, "cannot write " + o.path.string());
    }
  }
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::error_code ec;
    fs::rename(temps[i], outputs[i].path, ec);
    if (ec) {
      cleanup();
      throw Error(ErrorCode::Io, "cannot rename onto " + outputs[i].path.string() + ": " + ec.message());
    }
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

GridSize parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const int m = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const std::string rest = text.substr(x + 1);
    const int n = std::stoi(rest, &used);
    if (used != rest.size() || m < 1 || n < 1) throw std::invalid_argument(text);
    return {m, n};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--grid", "expected MxN with positive integers, got '" + text + "'");
  }
}

WarpModelKind parse_model(const std::string& name) {
  if (name == "edffd") return WarpModelKind::Edffd;
  if (name == "bspline") return WarpModelKind::BSpline;
  return WarpModelKind::Tps;
}

ImageBuffer composite(const ImageBuffer& warped, const ImageBuffer& reference) {
  ImageBuffer out(reference.width(), reference.height(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out.at(x, y, 0) = warped.at(x, y, 0);
      out.at(x, y, 1) = reference.at(x, y, std::min(1, reference.channels() - 1));
      out.at(x, y, 2) = reference.at(x, y, std::min(2, reference.channels() - 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------- register

struct RegisterArgs {
  std::string reference, target, out_dir = ".", model = "edffd";
  std::vector<std::string> grids;
  int stages = 1;
  double theta = 0.75, alpha = 10.0;
  int radius = 4;
  std::uint64_t seed = 0;
  bool trace = false;
};

int cmd_register(const RegisterArgs& a) {
  RegistrationConfig cfg;
  cfg.model = parse_model(a.model);
  cfg.n_stages = a.stages;
  cfg.theta = a.theta;
  cfg.alpha = a.alpha;
  cfg.radius = a.radius;
  for (std::size_t i = 0; i < a.grids.size() && i < cfg.grids.size(); ++i) cfg.grids[i] = parse_grid(a.grids[i]);

  ImageBuffer ref, tgt;
  try {
    ref = io::read_image(a.reference);
    tgt = io::read_image(a.target);
  } catch (const Error& e) {
    std::cerr << "edffd register: " << e.what() << '\n';
    return kExitIo;
  }

  RegistrationResult r;
  try {
    r = register_pair(ref, tgt, cfg);
  } catch (const Error& e) {
    std::cerr << "edffd register: registration failed: " << e.what() << '\n';
    return kExitRegistration;
  }

  const double psnr = psnr_masked(r.warped, ref, r.mask);
  nlohmann::ordered_json metrics;
  if (std::isinf(psnr)) {
    metrics["psnr_db"] = "inf";
  } else {
    metrics["psnr_db"] = psnr;
  }
  metrics["inference_ms"] = r.timing.inference_ms;
  metrics["warp_ms"] = r.timing.warp_ms;
  metrics["total_ms"] = r.timing.total_ms;

  const fs::path dir = a.out_dir;
  std::vector<Output> outputs{
      {dir / "warped.png", io::encode_png(r.warped)},
      {dir / "mask.png", io::encode_png(io::mask_to_image(r.mask))},
      {dir / "composite.png", io::encode_png(composite(r.warped, ref))},
      {dir / "params.json", to_bytes(to_json(r.params))},
      {dir / "metrics.json", to_bytes(metrics.dump(2) + "\n")},
  };
  if (a.trace) outputs.push_back({dir / "trace.csv", to_bytes(trace_csv(r))});
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    commit(outputs);
  } catch (const Error& e) {
    std::cerr << "edffd register: " << e.what() << '\n';
    return kExitIo;
  }
  std::cout << metrics.dump() << '\n';
  return 0;
}

// -------------------------------------------------------------------- warp

int cmd_warp(const std::string& src_path, const std::string& params_path, const std::string& out_path) {
  std::string text;
  ImageBuffer src;
  try {
    text = read_text(params_path);
    src = io::read_image(src_path);
  } catch (const Error& e) {
    std::cerr << "edffd warp: " << e.what() << '\n';
    return kExitIo;
  }
  WarpParams params;
  try {
    params = params_from_json(text);
  } catch (const Error& e) {
    std::cerr << "edffd warp: " << e.what() << '\n';
    return e.code() == ErrorCode::Schema ? kExitSchema : kExitRegistration;
  }
  try {
    const WarpResult w = warp_image(src, sampling_map_from_params(params));
    commit({{out_path, io::encode_for_path(w.image, out_path)}});
  } catch (const Error& e) {
    std::cerr << "edffd warp: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kExitIo : kExitSchema;
  }
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::vector<int> sizes{256, 512};
  std::vector<std::string> grids{"12x12", "24x24"};
  std::vector<std::string> models{"tps", "bspline", "edffd"};
  int repeats = 5;
  std::uint64_t seed = 1;
  std::string out;
};

template <typename Fn>
double median_ms(int repeats, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

int cmd_bench(const BenchArgs& a) {
  std::ostringstream csv;
  csv << "model,width,height,grid_m,grid_n,field_eval_ms,warp_ms,peak_bytes\n";
  for (const std::string& model : a.models) {
    for (int size : a.sizes) {
      for (const std::string& gs : a.grids) {
        const GridSize g = parse_grid(gs);
        ControlGrid grid(g.rows, g.cols, size, size);
        std::mt19937_64 rng(a.seed);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        for (auto& d : grid.displacements()) d = {u(rng), u(rng)};
        std::vector<Vec2> anchors, targets;
        for (int m = 0; m <= g.rows; ++m)
          for (int n = 0; n <= g.cols; ++n) {
            anchors.push_back(grid.anchor(m, n));
            targets.push_back(grid.deformed(m, n));
          }
        auto field = [&] {
          if (model == "tps") return tps_field(anchors, targets, size, size);
          return ffd_field(model == "edffd" ? FfdModel::Edffd : FfdModel::BSpline, grid, 0.75);
        };
        const ImageBuffer image = ProceduralTexture(a.seed).render(size, size, 3);
        const DisplacementField f = field();
        auto warp = [&] {
          return warp_image(image, compose_sampling_map(Homography{}, std::span(&f, 1), size, size));
        };

        tools::reset_peak();
        const std::size_t base = tools::current_bytes();
        warp();
        (void)field();
        const std::size_t peak = tools::peak_bytes() - base;

        const double field_ms = median_ms(a.repeats, field);
        const double warp_ms = median_ms(a.repeats, warp);
        char row[256];
        std::snprintf(row, sizeof row, "%s,%d,%d,%d,%d,%.3f,%.3f,%zu\n", model.c_str(), size, size, g.rows,
                      g.cols, field_ms, warp_ms, peak);
        csv << row;
      }
    }
  }
  if (a.out.empty()) {
    std::cout << csv.str();
    return 0;
  }
  try {
    commit({{a.out, to_bytes(csv.str())}});
  } catch (const Error& e) {
    std::cerr << "edffd bench: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}

// --------------------------------------------------------------- selfcheck

struct SelfcheckArgs {
  std::string emit;
  bool quick = false;
  bool inject_basis_fault = false;
  std::uint64_t seed = 1;
  int pairs = 20;
};

int cmd_selfcheck(const SelfcheckArgs& a) {
  checks::SuiteOptions opts = checks::default_options();
  opts.seed = a.seed;
  opts.registration_pairs = a.quick ? std::min(a.pairs, 2) : a.pairs;
  if (a.inject_basis_fault) {
    // Perturbs the 4/6 constant of the central piece.
    opts.beta = [](double u) { return cubic_bspline(u) + (std::abs(u) < 1.0 ? 0.01 / 6.0 : 0.0); };
  }
  if (!a.emit.empty()) {
    try {
      checks::emit_fixtures(a.emit, a.seed);
    } catch (const Error& e) {
      std::cerr << "edffd selfcheck: " << e.what() << '\n';
      return kExitIo;
    }
    std::cout << "fixtures written to " << a.emit << '\n';
  }

  int failed = 0;
  auto print = [&](const checks::CheckResult& r) {
    std::cout << checks::format_row(r) << std::endl;
    if (!r.pass) ++failed;
  };
  std::cout << "properties\n";
  for (const auto& r : checks::run_properties(opts)) print(r);
  std::cout << "acceptance\n";
  for (checks::Criterion c : checks::acceptance_criteria()) {
    // Quick mode skips the two long-running criteria.
    if (a.quick && (c == checks::criterion_toy_aggregation || c == checks::criterion_efficiency)) continue;
    print(c(opts));
  }
  std::cout << (failed == 0 ? "selfcheck passed" : "selfcheck FAILED: " + std::to_string(failed) + " check(s)")
            << '\n';
  return failed == 0 ? 0 : kExitSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image registration with exponential-decay free-form deformation"};
  app.require_subcommand(1);

  RegisterArgs reg;
  auto* r = app.add_subcommand("register", "Register a target image onto a reference image");
  r->add_option("reference", reg.reference, "Reference image (PNG/PGM/PPM)")->required();
  r->add_option("target", reg.target, "Target image to be warped")->required();
  r->add_option("--out-dir", reg.out_dir, "Directory for the output files")->capture_default_str();
  r->add_option("--model", reg.model, "Residual warp model")
      ->check(CLI::IsMember({"edffd", "bspline", "tps"}))
      ->capture_default_str();
  r->add_option("--grid", reg.grids, "Control grid per stage, MxN (repeat or comma-separate)")
      ->delimiter(',')
      ->check([](const std::string& s) {
        parse_grid(s);
        return std::string();
      });
  r->add_option("--stages", reg.stages, "Number of refinement stages")->check(CLI::Range(1, 2))->capture_default_str();
  r->add_option("--theta", reg.theta, "EDFFD decay scale")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--alpha", reg.alpha, "Softmax temperature of the correlation flow")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  r->add_option("--radius", reg.radius, "Local correlation radius in cells")->check(CLI::Range(1, 16))->capture_default_str();
  r->add_option("--seed", reg.seed, "Seed (the pipeline itself is deterministic)")->capture_default_str();
  r->add_flag("--trace", reg.trace, "Also write trace.csv with per-iteration losses");

  std::string src, params, out;
  auto* w = app.add_subcommand("warp", "Apply stored warp parameters to an image");
  w->add_option("source", src, "Image to warp")->required();
  w->add_option("params", params, "Parameters JSON written by register")->required();
  w->add_option("output", out, "Output image (.png, .pgm or .ppm)")->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time field evaluation and warping per model");
  b->add_option("--sizes", bench.sizes, "Square canvas sizes")->delimiter(',')->check(CLI::Range(8, 8192));
  b->add_option("--grids", bench.grids, "Grid sizes MxN")->delimiter(',')->check([](const std::string& s) {
    parse_grid(s);
    return std::string();
  });
  b->add_option("--models", bench.models, "Models to time")
      ->delimiter(',')
      ->check(CLI::IsMember({"edffd", "bspline", "tps"}));
  b->add_option("--repeats", bench.repeats, "Timed repeats after one warm-up")->check(CLI::Range(1, 1000));
  b->add_option("--seed", bench.seed, "Seed for the random control displacements");
  b->add_option("--out", bench.out, "Write the CSV here instead of stdout");

  SelfcheckArgs sc;
  auto* s = app.add_subcommand("selfcheck", "Run the property and acceptance suites");
  s->add_option("--emit", sc.emit, "Write a synthetic reference/target/truth fixture here");
  s->add_flag("--quick", sc.quick, "Two registration pairs, skip training and timing criteria");
  s->add_option("--pairs", sc.pairs, "Synthetic registration pairs")->check(CLI::Range(1, 1000));
  s->add_option("--seed", sc.seed, "Suite seed");
  s->add_flag("--inject-basis-fault", sc.inject_basis_fault, "Corrupt the basis under test (mutation check)");

  CLI11_PARSE(app, argc, argv);

  if (r->parsed()) return cmd_register(reg);
  if (w->parsed()) return cmd_warp(src, params, out);
  if (b->parsed()) return cmd_bench(bench);
  return cmd_selfcheck(sc);
}
