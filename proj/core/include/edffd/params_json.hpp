#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/sampling.hpp"

namespace edffd {

enum class WarpModelKind { Edffd, BSpline, Tps, Homography };

std::string_view to_string(WarpModelKind kind) noexcept;

/// Serialisable warp description.
///
/// JSON layout (keys in this order):
///   {"model": "edffd"|"bspline"|"tps"|"homography",
///    "canvas": [W, H],
///    "H": [9 reals, row-major],
///    "theta": real,
///    "composition": "additive"|"compositional",
///    "grid": [M, N],                 first refinement stage (omitted if none)
///    "displacements": [dx, dy, ...], row-major over (m, n), M+1 rows of N+1
///    "stages": [{"grid": [M, N], "displacements": [...]}, ...],
///    "anchors": [[x, y], ...], "targets": [[x, y], ...]}   tps only
/// When "stages" is present it lists every refinement stage in order and
/// takes precedence over the top-level "grid"/"displacements" pair.
struct WarpParams {
  WarpModelKind model = WarpModelKind::Homography;
  int width = 0;
  int height = 0;
  Homography h;
  double theta = 0.75;
  Composition composition = Composition::Additive;
  std::vector<ControlGrid> stages;
  std::vector<Vec2> tps_anchors;
  std::vector<Vec2> tps_targets;
};

std::string to_json(const WarpParams& params);

/// Throws Error(Schema) naming the offending key.
WarpParams params_from_json(std::string_view text);

/// Rebuilds the sampling map: H plus every stage field (or the TPS field).
SamplingMap sampling_map_from_params(const WarpParams& params);

}  // namespace edffd
