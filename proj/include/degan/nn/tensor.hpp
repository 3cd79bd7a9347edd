// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace degan::nn {

/// Storage aligned to the widest SIMD packet, so vectorised kernels split work
/// at the same offsets on every run and results do not depend on heap addresses.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense NCHW tensor. Samples are contiguous, so one sample can be viewed as a
/// (channels x height*width) row-major matrix.
template <typename T>
class Tensor {
public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : n_(n), c_(c), h_(h), w_(w),
        data_(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative extent");
  }

  int n() const noexcept { return n_; }
  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h_) * w_; }
  std::size_t sample_size() const noexcept { return c_ * plane(); }
  bool same_shape(const Tensor& o) const noexcept {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_string() const {
    return "[" + std::to_string(n_) + "," + std::to_string(c_) + "," +
           std::to_string(h_) + "," + std::to_string(w_) + "]";
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  T* sample(int i) noexcept { return data_.data() + i * sample_size(); }
  const T* sample(int i) const noexcept { return data_.data() + i * sample_size(); }
  T* channel(int i, int ch) noexcept { return sample(i) + ch * plane(); }
  const T* channel(int i, int ch) const noexcept { return sample(i) + ch * plane(); }

  T& operator()(int i, int ch, int y, int x) noexcept {
    return data_[((static_cast<std::size_t>(i) * c_ + ch) * h_ + y) * w_ + x];
  }
  T operator()(int i, int ch, int y, int x) const noexcept {
    return data_[((static_cast<std::size_t>(i) * c_ + ch) * h_ + y) * w_ + x];
  }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  Buffer<T>& storage() noexcept { return data_; }
  const Buffer<T>& storage() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  Buffer<T> data_;
};

}  // namespace degan::nn
