#include <gtest/gtest.h>

#include <cmath>

#include "wavectl/errors.hpp"
#include "wavectl/pml.hpp"

using namespace wavectl;

TEST(Pml, RampOfWidthOne) {
  const Grid1D g = Grid1D::make(10, 1.0);
  EXPECT_THROW(build_ramp(g, 0, 1.0), ParameterError);
  const PmlProfile1D p = build_ramp(g, 1, 1.0);
  EXPECT_DOUBLE_EQ(p.sigma[0], 1.0);
  EXPECT_DOUBLE_EQ(p.sigma[9], 1.0);
  for (int i = 1; i < 9; ++i) EXPECT_EQ(p.sigma[i], 0.0);
}

TEST(Pml, RampRejectsBadArguments) {
  const Grid1D g = Grid1D::make(10, 1.0);
  EXPECT_THROW(build_ramp(g, 5, 1.0), ParameterError);
  EXPECT_THROW(build_ramp(g, 2, 0.0), ParameterError);
  EXPECT_THROW(pml_scale_from_strength(0.0, 1.0, 2, 0.1), ParameterError);
}

TEST(Pml, RampIsZeroInsideAndCubicInLayer) {
  const Grid1D g = Grid1D::make(64, 6.3);
  const PmlProfile1D p = build_ramp(g, 8, 50.0);
  for (int i = 8; i < 56; ++i) EXPECT_EQ(p.sigma[i], 0.0);
  EXPECT_DOUBLE_EQ(p.sigma[4], 50.0 * 0.125);  // ((8 - 4) / 8)^3
  for (int i = 0; i < 7; ++i) {
    EXPECT_GT(p.sigma[i], p.sigma[i + 1]);
    EXPECT_DOUBLE_EQ(p.sigma[i], p.sigma[63 - i]);
  }
}

TEST(Pml, ScaleFromStrength) {
  EXPECT_DOUBLE_EQ(pml_scale_from_strength(20.0, 1500.0, 10, 0.1), 20.0 * 1500.0 / 1.0);
}

TEST(Pml, LatentSaturatesNearZero) {
  LatentPmlParams lp{std::vector<double>(8, -40.0), Grid1D::make(100, 1.0), 3.0};
  for (double s : realize_latent_pml(lp).values) {
    EXPECT_GE(s, 0.0);
    EXPECT_LT(s, 1e-6 * lp.scale);
  }
}

TEST(Pml, LatentZeroRawIsScaleLog2) {
  LatentPmlParams lp{std::vector<double>(8, 0.0), Grid1D::make(100, 1.0), 3.0};
  for (double s : realize_latent_pml(lp).values) EXPECT_NEAR(s, 3.0 * std::log(2.0), 1e-14);
}

TEST(Pml, LatentMonotoneAlongRamp) {
  std::vector<double> raw(16);
  for (int k = 0; k < 16; ++k) raw[k] = -3.0 + 0.4 * k;
  LatentPmlParams lp{raw, Grid1D::make(200, 1.0), 2.0};
  const Field1D s = realize_latent_pml(lp);
  for (int i = 0; i + 1 < 200; ++i) EXPECT_LE(s[i], s[i + 1]);
}

TEST(Pml, LatentVjpMatchesFiniteDifferences) {
  std::vector<double> raw{0.3, -1.2, 2.0, 0.1, -0.4};
  const Grid1D g = Grid1D::make(37, 1.0);
  std::vector<double> w(37);
  for (int i = 0; i < 37; ++i) w[i] = std::cos(0.7 * i);
  auto objective = [&](const std::vector<double>& r) {
    const Field1D s = realize_latent_pml(LatentPmlParams{r, g, 1.7});
    double acc = 0.0;
    for (int i = 0; i < 37; ++i) acc += w[i] * s[i];
    return acc;
  };
  const auto grad = realize_latent_pml_vjp(LatentPmlParams{raw, g, 1.7}, w);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    auto rp = raw, rm = raw;
    rp[k] += 1e-6;
    rm[k] -= 1e-6;
    const double fd = (objective(rp) - objective(rm)) / 2e-6;
    EXPECT_NEAR(grad[k], fd, 1e-7 + 1e-6 * std::abs(fd));
  }
}
