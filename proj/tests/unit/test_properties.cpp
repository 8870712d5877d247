#include <gtest/gtest.h>

#include "edffd/basis.hpp"
#include "edffd/checks/suite.hpp"

using namespace edffd;

TEST(PropertySuite, AllPass) {
  for (const auto& r : checks::run_properties(checks::default_options())) {
    EXPECT_TRUE(r.pass) << r.id << " " << r.name << ": " << r.detail;
  }
}

TEST(PropertySuite, CorruptedBasisIsCaught) {
  checks::SuiteOptions opts = checks::default_options();
  opts.beta = [](double u) { return cubic_bspline(u) + (std::abs(u) < 1.0 ? 0.01 / 6.0 : 0.0); };
  const auto props = checks::run_properties(opts);
  EXPECT_FALSE(props.front().pass);
  EXPECT_FALSE(checks::criterion_basis(opts).pass);
}
