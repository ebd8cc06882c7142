#include "wavectl/encoders.hpp"

#include "wavectl/errors.hpp"
#include "wavectl/random.hpp"

namespace wavectl {

using nn::Conv2d;

WaveEncoder::WaveEncoder(nn::ParamStore& ps, const WaveEncoderShape& shape) : shape_(shape) {
  if (shape.out <= 0) throw DimensionError("wave encoder: output size must be positive");
  h1_ = Conv2d::out_size(shape.obs_ny);
  w1_ = Conv2d::out_size(shape.obs_nx);
  h2_ = Conv2d::out_size(h1_);
  w2_ = Conv2d::out_size(w1_);
  h3_ = Conv2d::out_size(h2_);
  w3_ = Conv2d::out_size(w2_);
  if (h3_ % 2 != 0 || w3_ % 2 != 0 || h3_ < 2 || w3_ < 2) {
    throw DimensionError("wave encoder: observation size must be a multiple of 16");
  }
  conv1_ = Conv2d::make(ps, "wave.conv1", 3, shape.channels1);
  conv2_ = Conv2d::make(ps, "wave.conv2", shape.channels1, shape.channels2);
  conv3_ = Conv2d::make(ps, "wave.conv3", shape.channels2, shape.channels3);
  const int pooled = shape.channels3 * (h3_ / 2) * (w3_ / 2);
  dense_ = nn::Dense::make(ps, "wave.dense", pooled, shape.hidden);
  head_ = nn::Dense::make(ps, "wave.head", shape.hidden, shape.out);
}

void WaveEncoder::init(nn::ParamStore& ps, std::uint64_t seed) const {
  conv1_.init(ps, derive_seed(seed, 1));
  conv2_.init(ps, derive_seed(seed, 2));
  conv3_.init(ps, derive_seed(seed, 3));
  dense_.init(ps, derive_seed(seed, 4));
  head_.init(ps, derive_seed(seed, 5), 0.1);
}

void WaveEncoder::forward(const nn::ParamStore& ps, std::span<const double> frames, Cache& c) const {
  const std::size_t n_in = static_cast<std::size_t>(3) * shape_.obs_nx * shape_.obs_ny;
  if (frames.size() != n_in) throw DimensionError("wave encoder: frame stack has the wrong size");
  c.x0.assign(frames.begin(), frames.end());
  c.a1.resize(static_cast<std::size_t>(shape_.channels1) * h1_ * w1_);
  c.a2.resize(static_cast<std::size_t>(shape_.channels2) * h2_ * w2_);
  c.a3.resize(static_cast<std::size_t>(shape_.channels3) * h3_ * w3_);
  c.pooled.resize(static_cast<std::size_t>(shape_.channels3) * (h3_ / 2) * (w3_ / 2));
  c.hidden.resize(shape_.hidden);
  c.out.resize(shape_.out);
  conv1_.forward(ps, c.x0, shape_.obs_ny, shape_.obs_nx, c.a1);
  nn::tanh_forward(c.a1);
  conv2_.forward(ps, c.a1, h1_, w1_, c.a2);
  nn::tanh_forward(c.a2);
  conv3_.forward(ps, c.a2, h2_, w2_, c.a3);
  nn::tanh_forward(c.a3);
  nn::avgpool2_forward(c.a3, shape_.channels3, h3_, w3_, c.pooled);
  dense_.forward(ps, c.pooled, c.hidden);
  nn::tanh_forward(c.hidden);
  head_.forward(ps, c.hidden, c.out);
}

std::vector<double> WaveEncoder::backward(const nn::ParamStore& ps, const Cache& c, std::span<const double> g_out,
                                          nn::ParamStore& grads, bool want_input) const {
  std::vector<double> g_hidden(c.hidden.size());
  head_.backward(ps, c.hidden, g_out, grads, g_hidden);
  nn::tanh_backward(c.hidden, g_hidden, g_hidden);
  std::vector<double> g_pooled(c.pooled.size());
  dense_.backward(ps, c.pooled, g_hidden, grads, g_pooled);
  std::vector<double> g3(c.a3.size());
  nn::avgpool2_backward(g_pooled, shape_.channels3, h3_, w3_, g3);
  nn::tanh_backward(c.a3, g3, g3);
  std::vector<double> g2(c.a2.size());
  conv3_.backward(ps, c.a2, h2_, w2_, g3, grads, g2);
  nn::tanh_backward(c.a2, g2, g2);
  std::vector<double> g1(c.a1.size());
  conv2_.backward(ps, c.a1, h1_, w1_, g2, grads, g1);
  nn::tanh_backward(c.a1, g1, g1);
  std::vector<double> g0;
  if (want_input) g0.resize(c.x0.size());
  conv1_.backward(ps, c.x0, shape_.obs_ny, shape_.obs_nx, g1, grads, g0);
  return g0;
}

// ---------------------------------------------------------------------------

DesignEncoder::DesignEncoder(nn::ParamStore& ps, int n_inputs, int hidden, int n_out) {
  if (n_inputs < 1) throw DimensionError("design encoder needs at least one scatterer");
  l1_ = nn::Dense::make(ps, "design.l1", n_inputs, hidden);
  l2_ = nn::Dense::make(ps, "design.l2", hidden, hidden);
  l3_ = nn::Dense::make(ps, "design.out", hidden, n_out);
}

void DesignEncoder::init(nn::ParamStore& ps, std::uint64_t seed) const {
  l1_.init(ps, derive_seed(seed, 11));
  l2_.init(ps, derive_seed(seed, 12));
  l3_.init(ps, derive_seed(seed, 13), 0.1);
}

void DesignEncoder::forward(const nn::ParamStore& ps, std::span<const double> x, Cache& c) const {
  c.x.assign(x.begin(), x.end());
  c.h1.resize(l1_.out);
  c.h2.resize(l2_.out);
  c.out.resize(l3_.out);
  l1_.forward(ps, c.x, c.h1);
  nn::tanh_forward(c.h1);
  l2_.forward(ps, c.h1, c.h2);
  nn::tanh_forward(c.h2);
  l3_.forward(ps, c.h2, c.out);
}

std::vector<double> DesignEncoder::backward(const nn::ParamStore& ps, const Cache& c, std::span<const double> g_out,
                                            nn::ParamStore& grads) const {
  std::vector<double> g2(c.h2.size()), g1(c.h1.size()), gx(c.x.size());
  l3_.backward(ps, c.h2, g_out, grads, g2);
  nn::tanh_backward(c.h2, g2, g2);
  l2_.backward(ps, c.h1, g2, grads, g1);
  nn::tanh_backward(c.h1, g1, g1);
  l1_.backward(ps, c.x, g1, grads, gx);
  return gx;
}

}  // namespace wavectl
