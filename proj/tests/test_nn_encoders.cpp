#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "wavectl/encoders.hpp"
#include "wavectl/errors.hpp"
#include "wavectl/nn.hpp"
#include "wavectl/random.hpp"

using namespace wavectl;
using nn::ParamStore;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Compares every parameter gradient (or a strided sample of large tensors)
// against central differences of the scalar objective.
void expect_param_grads(ParamStore& ps, const ParamStore& grads, const std::function<double()>& objective,
                        int max_per_tensor = 12) {
  for (int t = 0; t < ps.count(); ++t) {
    const std::size_t n = ps[t].size();
    const std::size_t stride = std::max<std::size_t>(1, n / max_per_tensor);
    for (std::size_t k = 0; k < n; k += stride) {
      const double keep = ps[t].data[k];
      ps[t].data[k] = keep + 1e-6;
      const double fp = objective();
      ps[t].data[k] = keep - 1e-6;
      const double fm = objective();
      ps[t].data[k] = keep;
      const double fd = (fp - fm) / 2e-6;
      EXPECT_NEAR(grads[t].data[k], fd, 1e-7 + 1e-5 * std::abs(fd)) << ps[t].name << "[" << k << "]";
    }
  }
}

}  // namespace

TEST(ParamStoreTest, FlattenRoundTripAndLayout) {
  ParamStore ps;
  ps.add("a", {2, 3});
  ps.add("b", {4});
  EXPECT_EQ(ps.total_size(), 10u);
  EXPECT_EQ(ps.find("b"), 1);
  EXPECT_EQ(ps.find("c"), -1);
  const auto flat = randn(10, 1);
  ps.unflatten(flat);
  EXPECT_EQ(ps.flatten(), flat);
  ParamStore z = ps.zeros_like();
  EXPECT_TRUE(z.same_layout(ps));
  z.add_scaled(ps, 2.0);
  EXPECT_DOUBLE_EQ(z[1].data[2], 2.0 * ps[1].data[2]);
}

TEST(ParamStoreTest, NonFiniteTensorIsNamed) {
  ParamStore ps;
  ps.add("enc.ok", {3});
  ps.add("enc.bad", {3});
  ps[1].data[1] = INFINITY;
  try {
    ps.check_finite("test");
    FAIL();
  } catch (const BlowUpError& e) {
    EXPECT_NE(std::string(e.what()).find("enc.bad"), std::string::npos);
  }
}

TEST(ParamStoreTest, TreeSumMatchesSequentialSum) {
  std::vector<ParamStore> parts;
  ParamStore expect;
  expect.add("x", {5});
  for (int p = 0; p < 7; ++p) {
    ParamStore s;
    s.add("x", {5});
    s.unflatten(randn(5, 100 + p));
    expect.add_scaled(s, 1.0);
    parts.push_back(s);
  }
  const ParamStore total = nn::tree_sum(parts);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(total[0].data[k], expect[0].data[k], 1e-12);
}

TEST(Layers, DenseGradients) {
  ParamStore ps;
  const nn::Dense d = nn::Dense::make(ps, "d", 5, 3);
  d.init(ps, 4);
  ps[d.b].data = randn(3, 5);
  const auto x = randn(5, 6), w = randn(3, 7);
  auto objective = [&] {
    std::vector<double> y(3);
    d.forward(ps, x, y);
    return dot(y, w);
  };
  ParamStore g = ps.zeros_like();
  std::vector<double> gx(5);
  d.backward(ps, x, w, g, gx);
  expect_param_grads(ps, g, objective);
  // Input gradient is W^T w.
  for (int i = 0; i < 5; ++i) {
    double e = 0.0;
    for (int o = 0; o < 3; ++o) e += ps[d.w].data[o * 5 + i] * w[o];
    EXPECT_NEAR(gx[i], e, 1e-14);
  }
}

TEST(Layers, ConvGradients) {
  ParamStore ps;
  const nn::Conv2d c = nn::Conv2d::make(ps, "c", 2, 3);
  c.init(ps, 9);
  ps[c.b].data = randn(3, 10);
  const int h = 7, w = 6;
  const int oh = nn::Conv2d::out_size(h), ow = nn::Conv2d::out_size(w);
  EXPECT_EQ(oh, 4);
  EXPECT_EQ(ow, 3);
  auto x = randn(2 * h * w, 11);
  const auto gy = randn(3 * oh * ow, 12);
  auto objective = [&] {
    std::vector<double> y(3 * oh * ow);
    c.forward(ps, x, h, w, y);
    return dot(y, gy);
  };
  ParamStore g = ps.zeros_like();
  std::vector<double> gx(x.size());
  c.backward(ps, x, h, w, gy, g, gx);
  expect_param_grads(ps, g, objective, 100);
  for (std::size_t k = 0; k < x.size(); k += 5) {
    const double keep = x[k];
    x[k] = keep + 1e-6;
    const double fp = objective();
    x[k] = keep - 1e-6;
    const double fm = objective();
    x[k] = keep;
    EXPECT_NEAR(gx[k], (fp - fm) / 2e-6, 1e-7);
  }
}

TEST(Layers, PoolAndTanhAdjoints) {
  const int c = 2, h = 4, w = 6;
  const auto x = randn(c * h * w, 13), gy = randn(c * (h / 2) * (w / 2), 14);
  std::vector<double> y(gy.size()), gx(x.size());
  nn::avgpool2_forward(x, c, h, w, y);
  nn::avgpool2_backward(gy, c, h, w, gx);
  EXPECT_NEAR(dot(y, gy), dot(x, gx), 1e-12);
  EXPECT_NEAR(y[0], 0.25 * (x[0] + x[1] + x[w] + x[w + 1]), 1e-15);

  std::vector<double> t{-0.5, 0.0, 2.0};
  nn::tanh_forward(t);
  std::vector<double> g(3);
  nn::tanh_backward(t, std::vector<double>{1.0, 1.0, 1.0}, g);
  EXPECT_NEAR(g[0], 1.0 - std::tanh(-0.5) * std::tanh(-0.5), 1e-15);
  EXPECT_EQ(g[1], 1.0);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ParamStore ps;
  ps.add("p", {3});
  ps[0].data = {1.0, -2.0, 0.5};
  ParamStore g = ps.zeros_like();
  g[0].data = {0.3, -4.0, 0.0};
  nn::Adam opt(ps, 0.01, 0.9, 0.999, 1e-8);
  opt.step(ps, g);
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(ps[0].data[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(ps[0].data[1], -2.0 + 0.01, 1e-9);
  EXPECT_EQ(ps[0].data[2], 0.5);
  EXPECT_EQ(opt.iterations(), 1);
}

TEST(AdamTest, ZeroGradientIsNoOp) {
  ParamStore ps;
  ps.add("p", {2});
  ps[0].data = {1.0, 2.0};
  nn::Adam opt(ps, 0.1, 0.9, 0.999);
  opt.step(ps, ps.zeros_like());
  EXPECT_EQ(ps[0].data, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(opt.iterations(), 0);
}

TEST(Encoders, WaveEncoderGradients) {
  ParamStore ps;
  WaveEncoderShape shape;
  shape.obs_nx = 16;
  shape.obs_ny = 16;
  shape.channels1 = 2;
  shape.channels2 = 2;
  shape.channels3 = 2;
  shape.hidden = 4;
  shape.out = 5;
  const WaveEncoder enc(ps, shape);
  enc.init(ps, 21);
  // Larger head so every path carries signal.
  const int head_w = ps.find("wave.head.weight");
  ASSERT_GE(head_w, 0);
  for (double& v : ps[head_w].data) v *= 10.0;
  const auto frames = randn(3 * 16 * 16, 22);
  const auto gout = randn(5, 23);
  auto objective = [&] {
    WaveEncoder::Cache cache;
    enc.forward(ps, frames, cache);
    return dot(cache.out, gout);
  };
  WaveEncoder::Cache cache;
  enc.forward(ps, frames, cache);
  ParamStore g = ps.zeros_like();
  const auto gin = enc.backward(ps, cache, gout, g, true);
  expect_param_grads(ps, g, objective);
  ASSERT_EQ(gin.size(), frames.size());
  auto fr = frames;
  for (std::size_t k : {0ul, 77ul, 300ul, 767ul}) {
    const double keep = fr[k];
    auto eval = [&](double v) {
      fr[k] = v;
      WaveEncoder::Cache c2;
      enc.forward(ps, fr, c2);
      return dot(c2.out, gout);
    };
    const double fd = (eval(keep + 1e-6) - eval(keep - 1e-6)) / 2e-6;
    fr[k] = keep;
    EXPECT_NEAR(gin[k], fd, 1e-7 + 1e-5 * std::abs(fd));
  }
}

TEST(Encoders, WaveEncoderRejectsBadObservationSize) {
  ParamStore ps;
  WaveEncoderShape shape;
  shape.obs_nx = 20;
  shape.obs_ny = 16;
  shape.out = 3;
  EXPECT_THROW(WaveEncoder(ps, shape), DimensionError);
}

TEST(Encoders, DesignEncoderGradients) {
  ParamStore ps;
  const DesignEncoder enc(ps, 4, 6, 5);
  enc.init(ps, 31);
  const auto x = randn(4, 32), gout = randn(5, 33);
  auto objective = [&] {
    DesignEncoder::Cache c;
    enc.forward(ps, x, c);
    return dot(c.out, gout);
  };
  DesignEncoder::Cache c;
  enc.forward(ps, x, c);
  ParamStore g = ps.zeros_like();
  enc.backward(ps, c, gout, g);
  expect_param_grads(ps, g, objective);
}

TEST(Encoders, InitialisationIsSeedReproducible) {
  auto build = [](std::uint64_t seed) {
    ParamStore ps;
    WaveEncoderShape shape;
    shape.obs_nx = shape.obs_ny = 32;
    shape.out = 7;
    WaveEncoder w(ps, shape);
    DesignEncoder d(ps, 4, 8, 3);
    w.init(ps, seed);
    d.init(ps, seed + 1);
    return ps.flatten();
  };
  EXPECT_EQ(build(5), build(5));
  EXPECT_NE(build(5), build(6));
}
