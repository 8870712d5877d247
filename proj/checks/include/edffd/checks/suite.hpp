#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace edffd::checks {

struct CheckResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0 = no runtime limit
};

struct SuiteOptions {
  /// Basis function under test; replaced by the fault-injection hook.
  std::function<double(double)> beta;
  int registration_pairs = 20;
  std::uint64_t seed = 1;
};

SuiteOptions default_options();

/// Module invariants; each entry is cheap (well under a second).
std::vector<CheckResult> run_properties(const SuiteOptions& opts);

/// The ten acceptance criteria, in order.
CheckResult criterion_basis(const SuiteOptions& opts);
CheckResult criterion_field_equivalence(const SuiteOptions& opts);
CheckResult criterion_identity_warps(const SuiteOptions& opts);
CheckResult criterion_gradients(const SuiteOptions& opts);
CheckResult criterion_correlation(const SuiteOptions& opts);
CheckResult criterion_parameter_ratio(const SuiteOptions& opts);
CheckResult criterion_toy_aggregation(const SuiteOptions& opts);
CheckResult criterion_efficiency(const SuiteOptions& opts);
CheckResult criterion_registration(const SuiteOptions& opts);
CheckResult criterion_losses(const SuiteOptions& opts);

using Criterion = CheckResult (*)(const SuiteOptions&);
const std::vector<Criterion>& acceptance_criteria();

/// Runs every criterion; `on_result` is called as each one finishes.
std::vector<CheckResult> run_acceptance(const SuiteOptions& opts,
                                        const std::function<void(const CheckResult&)>& on_result = {});

/// "PASS  id  name  (1.23 s / 5 s)  detail"
std::string format_row(const CheckResult& r);

/// Writes reference.png, target.png and truth.json for one synthetic pair.
void emit_fixtures(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace edffd::checks
