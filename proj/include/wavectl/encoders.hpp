#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wavectl/nn.hpp"

namespace wavectl {

struct WaveEncoderShape {
  int obs_nx = 128;
  int obs_ny = 128;
  int channels1 = 6;
  int channels2 = 6;
  int channels3 = 4;
  int hidden = 12;
  int out = 0;  // 5 N + P
};

/// Three stride-2 convolutions with tanh over the 3-frame stack, 2x2 average
/// pooling, one tanh dense layer and a linear head.
class WaveEncoder {
 public:
  struct Cache {
    std::vector<double> x0, a1, a2, a3, pooled, hidden, out;
  };

  WaveEncoder() = default;
  WaveEncoder(nn::ParamStore& ps, const WaveEncoderShape& shape);

  void init(nn::ParamStore& ps, std::uint64_t seed) const;
  /// frames: 3 * obs_ny * obs_nx values, oldest frame first.
  void forward(const nn::ParamStore& ps, std::span<const double> frames, Cache& cache) const;
  /// Accumulates parameter gradients; returns dL/dframes when want_input is set.
  std::vector<double> backward(const nn::ParamStore& ps, const Cache& cache, std::span<const double> g_out,
                               nn::ParamStore& grads, bool want_input = false) const;

  const WaveEncoderShape& shape() const { return shape_; }
  const nn::Dense& head() const { return head_; }

 private:
  WaveEncoderShape shape_;
  nn::Conv2d conv1_, conv2_, conv3_;
  nn::Dense dense_, head_;
  int h1_ = 0, w1_ = 0, h2_ = 0, w2_ = 0, h3_ = 0, w3_ = 0;
};

/// Two tanh hidden layers and a linear output: radii -> N speed coefficients.
class DesignEncoder {
 public:
  struct Cache {
    std::vector<double> x, h1, h2, out;
  };

  DesignEncoder() = default;
  DesignEncoder(nn::ParamStore& ps, int n_inputs, int hidden, int n_out);

  void init(nn::ParamStore& ps, std::uint64_t seed) const;
  void forward(const nn::ParamStore& ps, std::span<const double> x, Cache& cache) const;
  std::vector<double> backward(const nn::ParamStore& ps, const Cache& cache, std::span<const double> g_out,
                               nn::ParamStore& grads) const;

  int n_inputs() const { return l1_.in; }
  int n_out() const { return l3_.out; }

 private:
  nn::Dense l1_, l2_, l3_;
};

}  // namespace wavectl
