// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "segloc/error.hpp"

namespace segloc {

/// Dense row-major array. Most of the model treats tensors as
/// [rows, cols] with cols = last dimension.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    data_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) throw InvalidInput("tensor data does not match shape");
  }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? static_cast<int>(shape_.size()) + i : i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int cols() const { return shape_.empty() ? 1 : shape_.back(); }
  int rows() const { return cols() == 0 ? 0 : static_cast<int>(data_.size() / static_cast<std::size_t>(cols())); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  T* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols(); }
  const T* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols(); }

  void reshape(std::vector<int> shape) {
    if (count(shape) != data_.size()) throw InvalidInput("reshape changes element count");
    shape_ = std::move(shape);
  }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace segloc
