#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fibcap {

// Dense (n, c, h, w) tensor. n is 1 for single-example passes.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T{})
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw std::invalid_argument("Tensor: dimensions must be positive");
  }

  size_t size() const { return v.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }

  T& at(int ni, int ci, int hi, int wi) {
    return v[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }
  const T& at(int ni, int ci, int hi, int wi) const {
    return v[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void check_finite(const char* where) const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x)))
        throw std::runtime_error(std::string("non-finite value after ") + where);
  }
};

// Named view of a parameter and its gradient buffer.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value;
  std::vector<T>* grad;
  std::vector<int> dims;
};

// 2-D convolution (cross-correlation), kernel 1 or 3, padding (k-1)/2.
// Stride 2 halves spatial dims with ceil semantics.
template <typename T>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1;
  std::vector<T> weight, bias;   // [out_c, in_c, k, k], [out_c]
  std::vector<T> wgrad, bgrad;
  Tensor<T> cache_x;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int s = 1)
      : in_c(in), out_c(out), k(kernel), stride(s),
        weight(static_cast<size_t>(out) * in * kernel * kernel, T{}),
        bias(out, T{}),
        wgrad(weight.size(), T{}), bgrad(out, T{}) {
    if (kernel != 1 && kernel != 3)
      throw std::invalid_argument("Conv2d: kernel must be 1 or 3");
    if (s != 1 && s != 2) throw std::invalid_argument("Conv2d: stride must be 1 or 2");
  }

  void init_kaiming(std::mt19937_64& rng) {
    const double std = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
    std::normal_distribution<double> dist(0.0, std);
    for (auto& x : weight) x = static_cast<T>(dist(rng));
    std::fill(bias.begin(), bias.end(), T{});
  }

  T& wt(int oc, int ic, int kh, int kw) {
    return weight[((static_cast<size_t>(oc) * in_c + ic) * k + kh) * k + kw];
  }
  const T& wt(int oc, int ic, int kh, int kw) const {
    return weight[((static_cast<size_t>(oc) * in_c + ic) * k + kh) * k + kw];
  }

  // Valid output-column range [jlo, jhi] for a kernel column offset, i.e.
  // the j with 0 <= j*stride - pad + kw < xw.
  void col_range(int kw, int xw, int ow, int& jlo, int& jhi) const {
    const int pad = (k - 1) / 2;
    const int off = pad - kw;
    jlo = off <= 0 ? 0 : (off + stride - 1) / stride;
    jhi = std::min(ow - 1, (xw - 1 + off) / stride);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != in_c) throw std::invalid_argument("Conv2d: channel mismatch");
    cache_x = x;
    const int pad = (k - 1) / 2;
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    Tensor<T> y(x.n, out_c, oh, ow);
    for (int ni = 0; ni < x.n; ++ni)
      for (int oc = 0; oc < out_c; ++oc) {
        for (int i = 0; i < oh; ++i) {
          T* yrow = &y.at(ni, oc, i, 0);
          std::fill(yrow, yrow + ow, bias[oc]);
        }
        for (int ic = 0; ic < in_c; ++ic)
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              const T wv = wt(oc, ic, kh, kw);
              int jlo, jhi;
              col_range(kw, x.w, ow, jlo, jhi);
              for (int i = 0; i < oh; ++i) {
                const int ii = i * stride - pad + kh;
                if (ii < 0 || ii >= x.h) continue;
                const T* xrow = &x.at(ni, ic, ii, kw - pad);
                T* yrow = &y.at(ni, oc, i, 0);
                if (stride == 1)
                  for (int j = jlo; j <= jhi; ++j) yrow[j] += wv * xrow[j];
                else
                  for (int j = jlo; j <= jhi; ++j) yrow[j] += wv * xrow[2 * j];
              }
            }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& x = cache_x;
    const int pad = (k - 1) / 2;
    Tensor<T> gx(x.n, x.c, x.h, x.w, T{});
    for (int ni = 0; ni < x.n; ++ni)
      for (int oc = 0; oc < out_c; ++oc) {
        T bacc = T{};
        for (int i = 0; i < gy.h; ++i) {
          const T* grow = &gy.at(ni, oc, i, 0);
          for (int j = 0; j < gy.w; ++j) bacc += grow[j];
        }
        bgrad[oc] += bacc;
        for (int ic = 0; ic < in_c; ++ic)
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              const T wv = wt(oc, ic, kh, kw);
              T wacc = T{};
              int jlo, jhi;
              col_range(kw, x.w, gy.w, jlo, jhi);
              for (int i = 0; i < gy.h; ++i) {
                const int ii = i * stride - pad + kh;
                if (ii < 0 || ii >= x.h) continue;
                const T* grow = &gy.at(ni, oc, i, 0);
                const T* xrow = &x.at(ni, ic, ii, kw - pad);
                T* gxrow = &gx.at(ni, ic, ii, kw - pad);
                if (stride == 1)
                  for (int j = jlo; j <= jhi; ++j) {
                    wacc += grow[j] * xrow[j];
                    gxrow[j] += grow[j] * wv;
                  }
                else
                  for (int j = jlo; j <= jhi; ++j) {
                    wacc += grow[j] * xrow[2 * j];
                    gxrow[2 * j] += grow[j] * wv;
                  }
              }
              wgrad[((static_cast<size_t>(oc) * in_c + ic) * k + kh) * k + kw] +=
                  wacc;
            }
      }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &weight, &wgrad, {out_c, in_c, k, k}});
    out.push_back({prefix + ".bias", &bias, &bgrad, {out_c}});
  }
};

template <typename T>
struct GroupNorm {
  int channels = 0, groups = 0;
  double eps = 1e-5;
  std::vector<T> gamma, beta, ggrad, bgrad;
  Tensor<T> cache_xhat;
  std::vector<double> cache_inv_sigma;  // per (n, group)

  GroupNorm() = default;
  GroupNorm(int ch, int g, double e = 1e-5)
      : channels(ch), groups(g), eps(e),
        gamma(ch, T{1}), beta(ch, T{}), ggrad(ch, T{}), bgrad(ch, T{}) {
    if (ch % g != 0)
      throw std::invalid_argument("GroupNorm: channels not divisible by groups");
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != channels) throw std::invalid_argument("GroupNorm: channel mismatch");
    const int cpg = channels / groups;
    const size_t gsize = static_cast<size_t>(cpg) * x.h * x.w;
    Tensor<T> y(x.n, x.c, x.h, x.w);
    cache_xhat = Tensor<T>(x.n, x.c, x.h, x.w);
    cache_inv_sigma.assign(static_cast<size_t>(x.n) * groups, 0.0);
    for (int ni = 0; ni < x.n; ++ni)
      for (int g = 0; g < groups; ++g) {
        double mean = 0.0;
        for (int ci = g * cpg; ci < (g + 1) * cpg; ++ci)
          for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j) mean += x.at(ni, ci, i, j);
        mean /= static_cast<double>(gsize);
        double var = 0.0;
        for (int ci = g * cpg; ci < (g + 1) * cpg; ++ci)
          for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j) {
              const double d = x.at(ni, ci, i, j) - mean;
              var += d * d;
            }
        var /= static_cast<double>(gsize);
        const double inv_sigma = 1.0 / std::sqrt(var + eps);
        cache_inv_sigma[static_cast<size_t>(ni) * groups + g] = inv_sigma;
        for (int ci = g * cpg; ci < (g + 1) * cpg; ++ci)
          for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j) {
              const double xh = (x.at(ni, ci, i, j) - mean) * inv_sigma;
              cache_xhat.at(ni, ci, i, j) = static_cast<T>(xh);
              y.at(ni, ci, i, j) = static_cast<T>(gamma[ci] * xh + beta[ci]);
            }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& xh = cache_xhat;
    const int cpg = channels / groups;
    const double m = static_cast<double>(cpg) * xh.h * xh.w;
    Tensor<T> gx(xh.n, xh.c, xh.h, xh.w);
    for (int ni = 0; ni < xh.n; ++ni)
      for (int g = 0; g < groups; ++g) {
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (int ci = g * cpg; ci < (g + 1) * cpg; ++ci)
          for (int i = 0; i < xh.h; ++i)
            for (int j = 0; j < xh.w; ++j) {
              const double gyv = gy.at(ni, ci, i, j);
              const double xhv = xh.at(ni, ci, i, j);
              ggrad[ci] += static_cast<T>(gyv * xhv);
              bgrad[ci] += static_cast<T>(gyv);
              const double dxh = gyv * gamma[ci];
              sum_dxh += dxh;
              sum_dxh_xh += dxh * xhv;
            }
        const double inv_sigma =
            cache_inv_sigma[static_cast<size_t>(ni) * groups + g];
        for (int ci = g * cpg; ci < (g + 1) * cpg; ++ci)
          for (int i = 0; i < xh.h; ++i)
            for (int j = 0; j < xh.w; ++j) {
              const double dxh = gy.at(ni, ci, i, j) * gamma[ci];
              const double xhv = xh.at(ni, ci, i, j);
              gx.at(ni, ci, i, j) = static_cast<T>(
                  inv_sigma * (dxh - sum_dxh / m - xhv * sum_dxh_xh / m));
            }
      }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggrad, {channels}});
    out.push_back({prefix + ".beta", &beta, &bgrad, {channels}});
  }
};

template <typename T>
struct ReLU {
  std::vector<uint8_t> cache_pos;

  Tensor<T> forward(const Tensor<T>& x) {
    cache_pos.assign(x.size(), 0);
    Tensor<T> y = x;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x.v[i] > T{}) cache_pos[i] = 1;
      else y.v[i] = T{};
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx = gy;
    for (size_t i = 0; i < gx.size(); ++i)
      if (!cache_pos[i]) gx.v[i] = T{};
    return gx;
  }
};

// Whole-channel (spatial) dropout with inverse scaling. Identity at p = 0 or
// in eval mode.
template <typename T>
struct SpatialDropout {
  double p = 0.2;
  std::vector<uint8_t> cache_keep;  // per (n, c)
  T cache_scale = T{1};             // 1 when the last forward was identity

  explicit SpatialDropout(double prob = 0.2) : p(prob) {
    if (p < 0.0 || p >= 1.0)
      throw std::invalid_argument("SpatialDropout: p must be in [0,1)");
  }

  Tensor<T> forward(const Tensor<T>& x, bool training, std::mt19937_64& rng) {
    if (!training || p == 0.0) {
      cache_keep.assign(static_cast<size_t>(x.n) * x.c, 1);
      cache_scale = T{1};
      return x;
    }
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    cache_keep.assign(static_cast<size_t>(x.n) * x.c, 0);
    Tensor<T> y = x;
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    cache_scale = scale;
    for (int ni = 0; ni < x.n; ++ni)
      for (int ci = 0; ci < x.c; ++ci) {
        const bool keep = uni(rng) >= p;
        cache_keep[static_cast<size_t>(ni) * x.c + ci] = keep;
        for (int i = 0; i < x.h; ++i)
          for (int j = 0; j < x.w; ++j)
            y.at(ni, ci, i, j) = keep ? x.at(ni, ci, i, j) * scale : T{};
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx = gy;
    const T scale = cache_scale;
    for (int ni = 0; ni < gy.n; ++ni)
      for (int ci = 0; ci < gy.c; ++ci) {
        const bool keep = cache_keep[static_cast<size_t>(ni) * gy.c + ci];
        for (int i = 0; i < gy.h; ++i)
          for (int j = 0; j < gy.w; ++j)
            gx.at(ni, ci, i, j) = keep ? gy.at(ni, ci, i, j) * scale : T{};
      }
    return gx;
  }
};

// x2 bilinear upsampling, align_corners = false.
template <typename T>
struct BilinearUp2 {
  int cache_h = 0, cache_w = 0;

  Tensor<T> forward(const Tensor<T>& x) {
    cache_h = x.h;
    cache_w = x.w;
    Tensor<T> y(x.n, x.c, 2 * x.h, 2 * x.w);
    for (int ni = 0; ni < x.n; ++ni)
      for (int ci = 0; ci < x.c; ++ci)
        for (int i = 0; i < y.h; ++i)
          for (int j = 0; j < y.w; ++j) {
            const double si = std::max(0.0, (i + 0.5) / 2.0 - 0.5);
            const double sj = std::max(0.0, (j + 0.5) / 2.0 - 0.5);
            const int i0 = std::min(static_cast<int>(si), x.h - 1);
            const int j0 = std::min(static_cast<int>(sj), x.w - 1);
            const int i1 = std::min(i0 + 1, x.h - 1);
            const int j1 = std::min(j0 + 1, x.w - 1);
            const double fi = si - i0, fj = sj - j0;
            y.at(ni, ci, i, j) = static_cast<T>(
                (1 - fi) * ((1 - fj) * x.at(ni, ci, i0, j0) + fj * x.at(ni, ci, i0, j1)) +
                fi * ((1 - fj) * x.at(ni, ci, i1, j0) + fj * x.at(ni, ci, i1, j1)));
          }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(gy.n, gy.c, cache_h, cache_w, T{});
    for (int ni = 0; ni < gy.n; ++ni)
      for (int ci = 0; ci < gy.c; ++ci)
        for (int i = 0; i < gy.h; ++i)
          for (int j = 0; j < gy.w; ++j) {
            const double si = std::max(0.0, (i + 0.5) / 2.0 - 0.5);
            const double sj = std::max(0.0, (j + 0.5) / 2.0 - 0.5);
            const int i0 = std::min(static_cast<int>(si), cache_h - 1);
            const int j0 = std::min(static_cast<int>(sj), cache_w - 1);
            const int i1 = std::min(i0 + 1, cache_h - 1);
            const int j1 = std::min(j0 + 1, cache_w - 1);
            const double fi = si - i0, fj = sj - j0;
            const T g = gy.at(ni, ci, i, j);
            gx.at(ni, ci, i0, j0) += static_cast<T>((1 - fi) * (1 - fj) * g);
            gx.at(ni, ci, i0, j1) += static_cast<T>((1 - fi) * fj * g);
            gx.at(ni, ci, i1, j0) += static_cast<T>(fi * (1 - fj) * g);
            gx.at(ni, ci, i1, j1) += static_cast<T>(fi * fj * g);
          }
    return gx;
  }
};

template <typename T>
struct Sigmoid {
  Tensor<T> cache_y;

  Tensor<T> forward(const Tensor<T>& x) {
    // Clamp away from exact 0/1 (where the float rounds on saturated
    // logits) so probabilities stay in the open interval.
    constexpr T eps = std::numeric_limits<T>::epsilon();
    Tensor<T> y = x;
    for (auto& v : y.v) {
      v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
      v = std::clamp(v, eps, T{1} - eps);
    }
    cache_y = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx = gy;
    for (size_t i = 0; i < gx.size(); ++i) {
      const double s = cache_y.v[i];
      gx.v[i] = static_cast<T>(gy.v[i] * s * (1.0 - s));
    }
    return gx;
  }
};

}  // namespace fibcap
