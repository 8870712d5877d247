#include "edffd/params_json.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "edffd/error.hpp"
#include "edffd/tps.hpp"

namespace edffd {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void schema(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::Schema, "key \"" + key + "\": " + what);
}

const json& require(const json& j, const std::string& key) {
  if (!j.contains(key)) schema(key, "missing");
  return j.at(key);
}

double real(const json& v, const std::string& key) {
  if (!v.is_number()) schema(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(key, "non-finite value");
  return d;
}

std::pair<int, int> int_pair(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    schema(key, "expected two integers");
  }
  const int a = v[0].get<int>();
  const int b = v[1].get<int>();
  if (a <= 0 || b <= 0) schema(key, "entries must be positive");
  return {a, b};
}

std::vector<Vec2> points(const json& v, const std::string& key) {
  if (!v.is_array()) schema(key, "expected an array of [x, y]");
  std::vector<Vec2> out;
  for (const auto& p : v) {
    if (!p.is_array() || p.size() != 2) schema(key, "expected [x, y] entries");
    out.push_back({real(p[0], key), real(p[1], key)});
  }
  return out;
}

ControlGrid grid_from(const json& j, int width, int height, const std::string& prefix) {
  const auto [m, n] = int_pair(require(j, "grid"), prefix + "grid");
  ControlGrid grid(m, n, width, height);
  const json& d = require(j, "displacements");
  if (!d.is_array() || d.size() != 2 * grid.point_count()) {
    schema(prefix + "displacements", "expected 2*(M+1)*(N+1) numbers");
  }
  std::vector<double> flat;
  flat.reserve(d.size());
  for (const auto& v : d) flat.push_back(real(v, prefix + "displacements"));
  grid.set_flat(flat);
  return grid;
}

json grid_json(const ControlGrid& g) {
  json j;
  j["grid"] = {g.rows(), g.cols()};
  j["displacements"] = g.flat();
  return j;
}

}  // namespace

std::string_view to_string(WarpModelKind kind) noexcept {
  switch (kind) {
    case WarpModelKind::Edffd: return "edffd";
    case WarpModelKind::BSpline: return "bspline";
    case WarpModelKind::Tps: return "tps";
    case WarpModelKind::Homography: return "homography";
  }
  return "homography";
}

std::string to_json(const WarpParams& p) {
  json j;
  j["model"] = std::string(to_string(p.model));
  j["canvas"] = {p.width, p.height};
  j["H"] = p.h.matrix();
  j["theta"] = p.theta;
  j["composition"] = p.composition == Composition::Additive ? "additive" : "compositional";
  if (!p.stages.empty()) {
    const json first = grid_json(p.stages.front());
    j["grid"] = first["grid"];
    j["displacements"] = first["displacements"];
    json stages = json::array();
    for (const auto& g : p.stages) stages.push_back(grid_json(g));
    j["stages"] = stages;
  }
  if (p.model == WarpModelKind::Tps) {
    json a = json::array(), t = json::array();
    for (const Vec2& v : p.tps_anchors) a.push_back({v.x, v.y});
    for (const Vec2& v : p.tps_targets) t.push_back({v.x, v.y});
    j["anchors"] = a;
    j["targets"] = t;
  }
  return j.dump(2) + "\n";
}

WarpParams params_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Schema, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Schema, "top-level value must be an object");

  WarpParams p;
  const json& model = require(j, "model");
  if (!model.is_string()) schema("model", "expected a string");
  const std::string m = model.get<std::string>();
  if (m == "edffd") p.model = WarpModelKind::Edffd;
  else if (m == "bspline") p.model = WarpModelKind::BSpline;
  else if (m == "tps") p.model = WarpModelKind::Tps;
  else if (m == "homography") p.model = WarpModelKind::Homography;
  else schema("model", "unknown model '" + m + "'");

  std::tie(p.width, p.height) = int_pair(require(j, "canvas"), "canvas");

  const json& h = require(j, "H");
  if (!h.is_array() || h.size() != 9) schema("H", "expected 9 numbers");
  std::array<double, 9> hm{};
  for (int i = 0; i < 9; ++i) hm[i] = real(h[i], "H");
  try {
    p.h = Homography(hm);
  } catch (const Error& e) {
    schema("H", e.what());
  }

  if (j.contains("theta")) {
    p.theta = real(j["theta"], "theta");
    if (p.theta <= 0.0) schema("theta", "must be positive");
  }
  if (j.contains("composition")) {
    const auto& c = j["composition"];
    if (c == "additive") p.composition = Composition::Additive;
    else if (c == "compositional") p.composition = Composition::Compositional;
    else schema("composition", "expected \"additive\" or \"compositional\"");
  }

  if (p.model == WarpModelKind::Edffd || p.model == WarpModelKind::BSpline) {
    if (j.contains("stages")) {
      const json& s = j["stages"];
      if (!s.is_array() || s.empty()) schema("stages", "expected a non-empty array");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_object()) schema("stages", "entries must be objects");
        p.stages.push_back(grid_from(s[i], p.width, p.height, "stages[" + std::to_string(i) + "]."));
      }
    } else {
      p.stages.push_back(grid_from(j, p.width, p.height, ""));
    }
  } else if (p.model == WarpModelKind::Tps) {
    p.tps_anchors = points(require(j, "anchors"), "anchors");
    p.tps_targets = points(require(j, "targets"), "targets");
    if (p.tps_anchors.size() != p.tps_targets.size()) schema("targets", "length differs from anchors");
    if (p.tps_anchors.size() < 3) schema("anchors", "need at least 3 anchors");
  }
  return p;
}

SamplingMap sampling_map_from_params(const WarpParams& p) {
  std::vector<DisplacementField> fields;
  if (p.model == WarpModelKind::Edffd || p.model == WarpModelKind::BSpline) {
    const FfdModel model = p.model == WarpModelKind::Edffd ? FfdModel::Edffd : FfdModel::BSpline;
    for (const auto& g : p.stages) fields.push_back(ffd_field(model, g, p.theta));
  } else if (p.model == WarpModelKind::Tps) {
    fields.push_back(tps_field(p.tps_anchors, p.tps_targets, p.width, p.height));
  }
  return compose_sampling_map(p.h, fields, p.width, p.height, p.composition);
}

}  // namespace edffd
