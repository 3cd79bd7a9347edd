// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "degan/nn/tensor.hpp"

namespace degan::nn {

/// Mutable view of one learnable array and its gradient accumulator.
template <typename T>
struct ParamView {
  std::string name;
  std::vector<int> shape;
  std::span<T> value;
  std::span<T> grad;
};

struct Padding {
  int top = 0, left = 0, bottom = 0, right = 0;

  /// "same" padding for inputs divisible by the stride: output = input / stride.
  /// Odd totals put the extra row/column at the bottom/right.
  static Padding same(int kernel, int stride) {
    const int total = std::max(kernel - stride, 0);
    const int before = total / 2;
    return {before, before, total - before, total - before};
  }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

namespace detail {

inline int conv_out(int in, int k, int stride, int pad_lo, int pad_hi) {
  return (in + pad_lo + pad_hi - k) / stride + 1;
}

// Unfolds output rows [oy0, oy1) of one sample (c x h x w) into a
// (c*k*k) x ((oy1-oy0)*ow) matrix.
template <typename T>
void im2col(const T* in, int c, int h, int w, int k, int stride, const Padding& p,
            int oy0, int oy1, int ow, T* col) {
  const std::size_t P = static_cast<std::size_t>(oy1 - oy0) * ow;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * P;
        for (int oy = oy0; oy < oy1; ++oy) {
          T* dst = row + static_cast<std::size_t>(oy - oy0) * ow;
          const int iy = oy * stride - p.top + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::clamp(p.left - kx, 0, ow);
            const int hi = std::clamp(w + p.left - kx, lo, ow);
            std::fill(dst, dst + lo, T(0));
            std::copy(srow + lo - p.left + kx, srow + hi - p.left + kx, dst + lo);
            std::fill(dst + hi, dst + ow, T(0));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - p.left + kx;
              dst[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into the (c x h x w) sample.
template <typename T>
void col2im(const T* col, int c, int h, int w, int k, int stride, const Padding& p,
            int oy0, int oy1, int ow, T* out) {
  const std::size_t P = static_cast<std::size_t>(oy1 - oy0) * ow;
  for (int ch = 0; ch < c; ++ch) {
    T* dst = out + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * P;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * stride - p.top + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy - oy0) * ow;
          T* drow = dst + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::clamp(p.left - kx, 0, ow);
            const int hi = std::clamp(w + p.left - kx, lo, ow);
            T* d = drow - p.left + kx;
            for (int ox = lo; ox < hi; ++ox) d[ox] += src[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - p.left + kx;
              if (ix >= 0 && ix < w) drow[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D convolution with square kernels, lowered to GEMM through im2col.
template <typename T>
struct Conv2d {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  Padding pad;
  Buffer<T> weight;  // out x (in * k * k)
  Buffer<T> bias;
  Buffer<T> weight_grad;
  Buffer<T> bias_grad;

  Conv2d() = default;
  Conv2d(std::string n, int in, int out, int k, int s, Padding p)
      : name(std::move(n)), in_channels(in), out_channels(out), kernel(k), stride(s), pad(p),
        weight(static_cast<std::size_t>(out) * in * k * k), bias(out),
        weight_grad(weight.size()), bias_grad(out) {}

  int fan_in() const { return in_channels * kernel * kernel; }
  int out_h(int h) const { return detail::conv_out(h, kernel, stride, pad.top, pad.bottom); }
  int out_w(int w) const { return detail::conv_out(w, kernel, stride, pad.left, pad.right); }

  /// Uniform fan-in scaled init, bound sqrt(6 / fan_in); zero bias.
  template <typename Rng>
  void init(Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in());
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : weight) v = static_cast<T>(u(rng));
    std::fill(bias.begin(), bias.end(), T(0));
  }

  void zero_grad() {
    std::fill(weight_grad.begin(), weight_grad.end(), T(0));
    std::fill(bias_grad.begin(), bias_grad.end(), T(0));
  }

  std::vector<ParamView<T>> params() {
    return {{name + ".weight", {out_channels, in_channels, kernel, kernel}, weight, weight_grad},
            {name + ".bias", {out_channels}, bias, bias_grad}};
  }

  bool is_pointwise() const {
    return kernel == 1 && stride == 1 && pad.top == 0 && pad.left == 0 && pad.bottom == 0 &&
           pad.right == 0;
  }

  Tensor<T> forward(const Tensor<T>& in) const {
    if (in.c() != in_channels)
      throw std::invalid_argument(name + ": expected " + std::to_string(in_channels) +
                                  " input channels, got " + std::to_string(in.c()));
    const int oh = out_h(in.h()), ow = out_w(in.w());
    const int K = fan_in();
    const int P = oh * ow;
    Tensor<T> out(in.n(), out_channels, oh, ow);
    ConstRowMap<T> W(weight.data(), out_channels, K);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), out_channels);
    if (is_pointwise()) {
      for (int i = 0; i < in.n(); ++i) {
        RowMap<T> O(out.sample(i), out_channels, P);
        O.noalias() = W * ConstRowMap<T>(in.sample(i), K, P);
        O.colwise() += b;
      }
      return out;
    }
    const int rows = tile_rows(ow);
    Buffer<T> col(static_cast<std::size_t>(K) * rows * ow);
    for (int i = 0; i < in.n(); ++i) {
      for (int y0 = 0; y0 < oh; y0 += rows) {
        const int y1 = std::min(oh, y0 + rows);
        const int Pt = (y1 - y0) * ow;
        detail::im2col(in.sample(i), in_channels, in.h(), in.w(), kernel, stride, pad, y0, y1,
                       ow, col.data());
        StridedMap O(out.sample(i) + static_cast<std::size_t>(y0) * ow, out_channels, Pt,
                     Eigen::OuterStride<>(P));
        O.noalias() = W * ConstRowMap<T>(col.data(), K, Pt);
        O.colwise() += b;
      }
    }
    return out;
  }

  /// Accumulates parameter gradients; writes the input gradient when `din` is non-null.
  void backward(const Tensor<T>& in, const Tensor<T>& dout, Tensor<T>* din) {
    const int oh = dout.h(), ow = dout.w();
    const int K = fan_in();
    const int P = oh * ow;
    ConstRowMap<T> W(weight.data(), out_channels, K);
    RowMap<T> dW(weight_grad.data(), out_channels, K);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_grad.data(), out_channels);
    if (din) *din = Tensor<T>(in.n(), in.c(), in.h(), in.w());
    if (is_pointwise()) {
      for (int i = 0; i < in.n(); ++i) {
        ConstRowMap<T> D(dout.sample(i), out_channels, P);
        dW.noalias() += D * ConstRowMap<T>(in.sample(i), K, P).transpose();
        db += D.rowwise().sum();
        if (din) RowMap<T>(din->sample(i), K, P).noalias() = W.transpose() * D;
      }
      return;
    }
    const int rows = tile_rows(ow);
    Buffer<T> col(static_cast<std::size_t>(K) * rows * ow);
    Buffer<T> dcol(din ? col.size() : 0);
    for (int i = 0; i < in.n(); ++i) {
      for (int y0 = 0; y0 < oh; y0 += rows) {
        const int y1 = std::min(oh, y0 + rows);
        const int Pt = (y1 - y0) * ow;
        detail::im2col(in.sample(i), in_channels, in.h(), in.w(), kernel, stride, pad, y0, y1,
                       ow, col.data());
        ConstStridedMap D(dout.sample(i) + static_cast<std::size_t>(y0) * ow, out_channels, Pt,
                          Eigen::OuterStride<>(P));
        dW.noalias() += D * ConstRowMap<T>(col.data(), K, Pt).transpose();
        db += D.rowwise().sum();
        if (din) {
          RowMap<T>(dcol.data(), K, Pt).noalias() = W.transpose() * D;
          detail::col2im(dcol.data(), in_channels, in.h(), in.w(), kernel, stride, pad, y0, y1,
                         ow, din->sample(i));
        }
      }
    }
  }

private:
  using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
  using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

  // Output rows per im2col tile, sized so the tile stays cache resident.
  int tile_rows(int ow) const {
    constexpr std::size_t budget = 64 * 1024;  // elements
    const std::size_t per_row = static_cast<std::size_t>(fan_in()) * ow;
    return static_cast<int>(std::max<std::size_t>(1, budget / per_row));
  }
};

/// 2x2 max pooling, stride 2. Keeps the winning offset per output cell.
template <typename T>
struct MaxPool2 {
  std::vector<std::uint8_t> argmax;

  Tensor<T> forward(const Tensor<T>& in) {
    if (in.h() % 2 || in.w() % 2)
      throw std::invalid_argument("MaxPool2: spatial extent must be even, got " +
                                  in.shape_string());
    Tensor<T> out(in.n(), in.c(), in.h() / 2, in.w() / 2);
    argmax.assign(out.size(), 0);
    std::size_t o = 0;
    for (int i = 0; i < in.n(); ++i)
      for (int ch = 0; ch < in.c(); ++ch) {
        const T* src = in.channel(i, ch);
        for (int y = 0; y < out.h(); ++y)
          for (int x = 0; x < out.w(); ++x, ++o) {
            const T* p = src + 2 * y * in.w() + 2 * x;
            const T cand[4] = {p[0], p[1], p[in.w()], p[in.w() + 1]};
            std::uint8_t best = 0;
            for (std::uint8_t j = 1; j < 4; ++j)
              if (cand[j] > cand[best]) best = j;
            argmax[o] = best;
            out.data()[o] = cand[best];
          }
      }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dout) const {
    Tensor<T> din(dout.n(), dout.c(), dout.h() * 2, dout.w() * 2);
    std::size_t o = 0;
    for (int i = 0; i < dout.n(); ++i)
      for (int ch = 0; ch < dout.c(); ++ch) {
        T* dst = din.channel(i, ch);
        for (int y = 0; y < dout.h(); ++y)
          for (int x = 0; x < dout.w(); ++x, ++o) {
            const int a = argmax[o];
            dst[(2 * y + a / 2) * din.w() + 2 * x + a % 2] += dout.data()[o];
          }
      }
    return din;
  }
};

template <typename T>
Tensor<T> upsample2(const Tensor<T>& in) {
  Tensor<T> out(in.n(), in.c(), in.h() * 2, in.w() * 2);
  for (int i = 0; i < in.n(); ++i)
    for (int ch = 0; ch < in.c(); ++ch) {
      const T* src = in.channel(i, ch);
      T* dst = out.channel(i, ch);
      for (int y = 0; y < out.h(); ++y)
        for (int x = 0; x < out.w(); ++x) dst[y * out.w() + x] = src[(y / 2) * in.w() + x / 2];
    }
  return out;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dout) {
  Tensor<T> din(dout.n(), dout.c(), dout.h() / 2, dout.w() / 2);
  for (int i = 0; i < dout.n(); ++i)
    for (int ch = 0; ch < dout.c(); ++ch) {
      const T* src = dout.channel(i, ch);
      T* dst = din.channel(i, ch);
      for (int y = 0; y < dout.h(); ++y)
        for (int x = 0; x < dout.w(); ++x) dst[(y / 2) * din.w() + x / 2] += src[y * dout.w() + x];
    }
  return din;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw std::invalid_argument("concat_channels: " + a.shape_string() + " vs " +
                                b.shape_string());
  Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), out.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

/// Splits a gradient over concatenated channels back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& d, int first_channels) {
  Tensor<T> a(d.n(), first_channels, d.h(), d.w());
  Tensor<T> b(d.n(), d.c() - first_channels, d.h(), d.w());
  for (int i = 0; i < d.n(); ++i) {
    std::copy(d.sample(i), d.sample(i) + a.sample_size(), a.sample(i));
    std::copy(d.sample(i) + a.sample_size(), d.sample(i) + d.sample_size(), b.sample(i));
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.span()) v = v > T(0) ? v : T(0);
}

/// Masks `grad` by the sign of the activation output (valid for relu and leaky relu).
template <typename T>
void relu_backward_inplace(const Tensor<T>& out, Tensor<T>& grad, T negative_slope = T(0)) {
  const T* o = out.data();
  T* g = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(o[i] > T(0))) g[i] *= negative_slope;
}

template <typename T>
void leaky_relu_inplace(Tensor<T>& t, T slope) {
  for (auto& v : t.span()) v = v > T(0) ? v : v * slope;
}

template <typename T>
void sigmoid_inplace(Tensor<T>& t) {
  for (auto& v : t.span()) v = T(1) / (T(1) + std::exp(-v));
}

/// grad *= s * (1 - s) where s is the sigmoid output.
template <typename T>
void sigmoid_backward_inplace(const Tensor<T>& out, Tensor<T>& grad) {
  const T* s = out.data();
  T* g = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] *= s[i] * (T(1) - s[i]);
}

}  // namespace degan::nn
