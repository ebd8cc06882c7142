#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wavectl::nn {

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

/// Named parameter tensors in registration order. Gradient stores are
/// ParamStores with the same layout (see zeros_like).
class ParamStore {
 public:
  /// Registers a zero-initialized tensor and returns its index.
  int add(const std::string& name, std::vector<int> shape);

  Tensor& operator[](int i) { return tensors_[i]; }
  const Tensor& operator[](int i) const { return tensors_[i]; }
  int count() const { return static_cast<int>(tensors_.size()); }
  int find(const std::string& name) const;  // -1 when absent
  std::size_t total_size() const;

  ParamStore zeros_like() const;
  void set_zero();
  void add_scaled(const ParamStore& other, double scale);
  bool same_layout(const ParamStore& other) const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  /// Throws BlowUpError naming the first tensor with a non-finite entry.
  void check_finite(const std::string& where) const;

  const std::vector<Tensor>& tensors() const { return tensors_; }

 private:
  std::vector<Tensor> tensors_;
};

/// Pairwise (tree) sum of gradient stores; the result does not depend on
/// which thread produced which element.
ParamStore tree_sum(std::vector<ParamStore> parts);

/// y = W x + b with W stored [out][in].
struct Dense {
  int in = 0, out = 0;
  int w = -1, b = -1;

  static Dense make(ParamStore& ps, const std::string& name, int in, int out);
  void init(ParamStore& ps, std::uint64_t seed, double gain = 1.0) const;
  void forward(const ParamStore& ps, std::span<const double> x, std::span<double> y) const;
  /// Accumulates dW, db into grads and writes dL/dx into gx (if not empty).
  void backward(const ParamStore& ps, std::span<const double> x, std::span<const double> gy, ParamStore& grads,
                std::span<double> gx) const;
};

/// 3x3 convolution, stride 2, zero padding 1. Tensors are [channel][row][col].
struct Conv2d {
  int cin = 0, cout = 0;
  int w = -1, b = -1;
  static constexpr int kSize = 3;
  static constexpr int kStride = 2;
  static constexpr int kPad = 1;

  static Conv2d make(ParamStore& ps, const std::string& name, int cin, int cout);
  void init(ParamStore& ps, std::uint64_t seed) const;
  static int out_size(int n) { return (n + 2 * kPad - kSize) / kStride + 1; }
  void forward(const ParamStore& ps, std::span<const double> x, int h, int wdt, std::span<double> y) const;
  void backward(const ParamStore& ps, std::span<const double> x, int h, int wdt, std::span<const double> gy,
                ParamStore& grads, std::span<double> gx) const;
};

void tanh_forward(std::span<double> x);
/// gx = gy * (1 - y^2) given the activation output y.
void tanh_backward(std::span<const double> y, std::span<const double> gy, std::span<double> gx);

/// 2x2 average pooling with stride 2 over [c][h][w]; h and w must be even.
void avgpool2_forward(std::span<const double> x, int c, int h, int w, std::span<double> y);
void avgpool2_backward(std::span<const double> gy, int c, int h, int w, std::span<double> gx);

/// Adaptive moment estimation.
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore& like, double lr, double beta1, double beta2, double eps = 1e-8);

  void step(ParamStore& params, const ParamStore& grads);
  long iterations() const { return t_; }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  ParamStore m_, v_;
};

}  // namespace wavectl::nn
