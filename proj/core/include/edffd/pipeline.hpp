#pragma once

#include <array>
#include <string>
#include <vector>

#include "edffd/energies.hpp"
#include "edffd/ffd.hpp"
#include "edffd/homography.hpp"
#include "edffd/image.hpp"
#include "edffd/params_json.hpp"
#include "edffd/sampling.hpp"

namespace edffd {

struct GridSize {
  int rows = 12;
  int cols = 12;
};

struct RegistrationConfig {
  int n_stages = 1;
  std::array<GridSize, 2> grids{{{12, 12}, {18, 18}}};
  WarpModelKind model = WarpModelKind::Edffd;  // Edffd, BSpline or Tps
  double theta = 0.75;
  int patch_k = 3;
  double alpha = 10.0;
  int radius = 4;
  LossWeights weights;
  int pyramid_levels = 3;
  /// Feature cell size of the homography stage and of each refinement stage.
  int global_downsample = 8;
  std::array<int, 2> stage_downsample{8, 4};
  /// Global correlation is computed on the first pyramid level whose cell
  /// count does not exceed this.
  int max_global_cells = 4096;
  double refit_threshold = 3.0;
  int homography_iterations = 30;  // per pyramid level
  int max_iterations = 100;
  double descent_step = 0.5;
  double ridge = 1e-3;
};

/// Throws InvalidArgument naming the offending field.
void validate(const RegistrationConfig& cfg);

struct DescentTrace {
  int stage = 0;  // 0 = homography, i >= 1 = refinement stage i
  std::vector<double> loss;
  std::vector<double> step;
};

struct RegistrationTimings {
  double inference_ms = 0.0;
  double warp_ms = 0.0;
  double total_ms = 0.0;
};

struct RegistrationResult {
  Homography h;
  std::vector<ControlGrid> grids;
  WarpParams params;
  SamplingMap map;
  ImageBuffer warped;
  Mask mask;
  std::vector<DescentTrace> traces;
  RegistrationTimings timing;
};

/// Global correlation on features of both images with sub-cell peaks, a
/// confidence-weighted DLT refit while the residual threshold shrinks toward
/// `refit_threshold`, then a coarse-to-fine photometric polish of the four
/// corner motions. Throws InsufficientOverlap,
/// DegenerateCorners, DimensionMismatch.
Homography estimate_homography_stage(const ImageBuffer& ir, const ImageBuffer& it,
                                     const RegistrationConfig& cfg, DescentTrace* trace = nullptr);

/// Fits control displacements of one refinement stage (1-based index) on
/// top of `prior`: local-correlation flow, ridge least squares, then
/// preconditioned descent on the stage photometric term plus the weighted
/// grid constraints. The descent starts from the zero grid instead when that
/// scores better than the flow fit. With `max_iterations == 0` the raw ridge
/// fit is returned. Throws SingularSystem.
ControlGrid refine_stage(const ImageBuffer& ir, const ImageBuffer& it, const SamplingMap& prior,
                         GridSize grid, const RegistrationConfig& cfg, int stage,
                         DescentTrace* trace = nullptr);

/// Displacement field of one stage grid under the configured model.
DisplacementField stage_field(const ControlGrid& grid, const RegistrationConfig& cfg);

/// Full progressive registration. Images must match and be at least 64x64.
RegistrationResult register_pair(const ImageBuffer& ir, const ImageBuffer& it,
                                 const RegistrationConfig& cfg);

/// "stage,iteration,loss,step" rows for every descent phase.
std::string trace_csv(const RegistrationResult& result);

}  // namespace edffd
