#include "wavectl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "wavectl/errors.hpp"
#include "wavectl/random.hpp"

namespace wavectl::nn {

int ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (find(name) >= 0) throw ParameterError("duplicate parameter name: " + name);
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("parameter " + name + " has a non-positive dimension");
    n *= static_cast<std::size_t>(d);
  }
  tensors_.push_back(Tensor{name, std::move(shape), std::vector<double>(n, 0.0)});
  return count() - 1;
}

int ParamStore::find(const std::string& name) const {
  for (int i = 0; i < count(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return -1;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore z = *this;
  z.set_zero();
  return z;
}

void ParamStore::set_zero() {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), 0.0);
}

void ParamStore::add_scaled(const ParamStore& other, double scale) {
  if (!same_layout(other)) throw DimensionError("parameter store layout mismatch");
  for (int i = 0; i < count(); ++i) {
    auto& a = tensors_[i].data;
    const auto& b = other.tensors_[i].data;
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
  }
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (count() != other.count()) return false;
  for (int i = 0; i < count(); ++i) {
    if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape) return false;
  }
  return true;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& t : tensors_) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != total_size()) throw DimensionError("flat parameter vector has the wrong length");
  std::size_t off = 0;
  for (auto& t : tensors_) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data.begin());
    off += t.size();
  }
}

void ParamStore::check_finite(const std::string& where) const {
  for (const auto& t : tensors_) {
    for (double x : t.data) {
      if (!std::isfinite(x)) throw BlowUpError(t.name, where);
    }
  }
}

ParamStore tree_sum(std::vector<ParamStore> parts) {
  if (parts.empty()) throw DimensionError("tree_sum of an empty list");
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) parts[i].add_scaled(parts[i + stride], 1.0);
  }
  return std::move(parts[0]);
}

// ---------------------------------------------------------------------------

namespace {

void fill_uniform(std::vector<double>& v, std::uint64_t seed, double a) {
  Rng rng(seed);
  for (auto& x : v) x = uniform(rng, -a, a);
}

}  // namespace

Dense Dense::make(ParamStore& ps, const std::string& name, int in, int out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.w = ps.add(name + ".weight", {out, in});
  d.b = ps.add(name + ".bias", {out});
  return d;
}

void Dense::init(ParamStore& ps, std::uint64_t seed, double gain) const {
  fill_uniform(ps[w].data, seed, gain * std::sqrt(3.0 / in));
  std::fill(ps[b].data.begin(), ps[b].data.end(), 0.0);
}

void Dense::forward(const ParamStore& ps, std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != in || static_cast<int>(y.size()) != out) {
    throw DimensionError("dense layer: input/output size mismatch");
  }
  const double* W = ps[w].data.data();
  const double* B = ps[b].data.data();
  for (int o = 0; o < out; ++o) {
    const double* row = W + static_cast<std::size_t>(o) * in;
    double acc = B[o];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void Dense::backward(const ParamStore& ps, std::span<const double> x, std::span<const double> gy, ParamStore& grads,
                     std::span<double> gx) const {
  const double* W = ps[w].data.data();
  double* gW = grads[w].data.data();
  double* gB = grads[b].data.data();
  if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = gy[o];
    if (g == 0.0) continue;
    gB[o] += g;
    double* grow = gW + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) grow[i] += g * x[i];
    if (!gx.empty()) {
      const double* row = W + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) gx[i] += g * row[i];
    }
  }
}

// ---------------------------------------------------------------------------

Conv2d Conv2d::make(ParamStore& ps, const std::string& name, int cin, int cout) {
  Conv2d c;
  c.cin = cin;
  c.cout = cout;
  c.w = ps.add(name + ".weight", {cout, cin, kSize, kSize});
  c.b = ps.add(name + ".bias", {cout});
  return c;
}

void Conv2d::init(ParamStore& ps, std::uint64_t seed) const {
  fill_uniform(ps[w].data, seed, std::sqrt(3.0 / (cin * kSize * kSize)));
  std::fill(ps[b].data.begin(), ps[b].data.end(), 0.0);
}

void Conv2d::forward(const ParamStore& ps, std::span<const double> x, int h, int wdt, std::span<double> y) const {
  const int oh = out_size(h), ow = out_size(wdt);
  if (x.size() != static_cast<std::size_t>(cin) * h * wdt || y.size() != static_cast<std::size_t>(cout) * oh * ow) {
    throw DimensionError("conv2d: input/output size mismatch");
  }
  const double* W = ps[w].data.data();
  const double* B = ps[b].data.data();
  for (int co = 0; co < cout; ++co) {
    double* yc = y.data() + static_cast<std::size_t>(co) * oh * ow;
    std::fill(yc, yc + static_cast<std::size_t>(oh) * ow, B[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* xc = x.data() + static_cast<std::size_t>(ci) * h * wdt;
      const double* k = W + (static_cast<std::size_t>(co) * cin + ci) * kSize * kSize;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ky = 0; ky < kSize; ++ky) {
          const int iy = oy * kStride - kPad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* xr = xc + static_cast<std::size_t>(iy) * wdt;
          double* yr = yc + static_cast<std::size_t>(oy) * ow;
          for (int kx = 0; kx < kSize; ++kx) {
            const double kv = k[ky * kSize + kx];
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * kStride - kPad + kx;
              if (ix >= 0 && ix < wdt) yr[ox] += kv * xr[ix];
            }
          }
        }
      }
    }
  }
}

void Conv2d::backward(const ParamStore& ps, std::span<const double> x, int h, int wdt, std::span<const double> gy,
                      ParamStore& grads, std::span<double> gx) const {
  const int oh = out_size(h), ow = out_size(wdt);
  const double* W = ps[w].data.data();
  double* gW = grads[w].data.data();
  double* gB = grads[b].data.data();
  if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0);
  for (int co = 0; co < cout; ++co) {
    const double* gc = gy.data() + static_cast<std::size_t>(co) * oh * ow;
    double sb = 0.0;
    for (std::size_t q = 0; q < static_cast<std::size_t>(oh) * ow; ++q) sb += gc[q];
    gB[co] += sb;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xc = x.data() + static_cast<std::size_t>(ci) * h * wdt;
      double* gxc = gx.empty() ? nullptr : gx.data() + static_cast<std::size_t>(ci) * h * wdt;
      const std::size_t kbase = (static_cast<std::size_t>(co) * cin + ci) * kSize * kSize;
      for (int ky = 0; ky < kSize; ++ky) {
        for (int kx = 0; kx < kSize; ++kx) {
          const double kv = W[kbase + ky * kSize + kx];
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * kStride - kPad + ky;
            if (iy < 0 || iy >= h) continue;
            const double* xr = xc + static_cast<std::size_t>(iy) * wdt;
            const double* gr = gc + static_cast<std::size_t>(oy) * ow;
            double* gxr = gxc ? gxc + static_cast<std::size_t>(iy) * wdt : nullptr;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * kStride - kPad + kx;
              if (ix < 0 || ix >= wdt) continue;
              acc += gr[ox] * xr[ix];
              if (gxr) gxr[ix] += gr[ox] * kv;
            }
          }
          gW[kbase + ky * kSize + kx] += acc;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

void tanh_forward(std::span<double> x) {
  for (auto& v : x) v = std::tanh(v);
}

void tanh_backward(std::span<const double> y, std::span<const double> gy, std::span<double> gx) {
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = gy[i] * (1.0 - y[i] * y[i]);
}

void avgpool2_forward(std::span<const double> x, int c, int h, int w, std::span<double> y) {
  if (h % 2 != 0 || w % 2 != 0) throw DimensionError("avgpool2 needs even spatial sizes");
  const int oh = h / 2, ow = w / 2;
  for (int ch = 0; ch < c; ++ch) {
    const double* xc = x.data() + static_cast<std::size_t>(ch) * h * w;
    double* yc = y.data() + static_cast<std::size_t>(ch) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* p = xc + static_cast<std::size_t>(2 * oy) * w + 2 * ox;
        yc[oy * ow + ox] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
    }
  }
}

void avgpool2_backward(std::span<const double> gy, int c, int h, int w, std::span<double> gx) {
  const int oh = h / 2, ow = w / 2;
  for (int ch = 0; ch < c; ++ch) {
    const double* gc = gy.data() + static_cast<std::size_t>(ch) * oh * ow;
    double* xc = gx.data() + static_cast<std::size_t>(ch) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = 0.25 * gc[oy * ow + ox];
        double* p = xc + static_cast<std::size_t>(2 * oy) * w + 2 * ox;
        p[0] = g;
        p[1] = g;
        p[w] = g;
        p[w + 1] = g;
      }
    }
  }
}

// ---------------------------------------------------------------------------

Adam::Adam(const ParamStore& like, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(like.zeros_like()), v_(like.zeros_like()) {
  if (lr <= 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ParameterError("adam: invalid hyperparameters");
  }
}

void Adam::step(ParamStore& params, const ParamStore& grads) {
  if (!params.same_layout(grads) || !params.same_layout(m_)) throw DimensionError("adam: layout mismatch");
  // An all-zero gradient is a no-op: moments and step count stay as they are.
  bool any = false;
  for (const auto& t : grads.tensors()) {
    for (double g : t.data) any = any || g != 0.0;
  }
  if (!any) return;
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (int i = 0; i < params.count(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1_ * m[k] + (1.0 - b1_) * g[k];
      v[k] = b2_ * v[k] + (1.0 - b2_) * g[k] * g[k];
      p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

}  // namespace wavectl::nn
