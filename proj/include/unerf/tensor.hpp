#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unerf/errors.hpp"
#include "unerf/memory.hpp"

namespace unerf {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
using Buffer = std::vector<T, TrackingAllocator<T>>;

template <typename T>
class Graph;

// Dense row-major array. Copies share the underlying buffer; use clone() for
// an independent copy. A tensor produced by an op whose inputs were attached
// to a Graph is itself attached (graph() != nullptr) and the graph must
// outlive it. Detached tensors never touch a tape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : Tensor(Shape{0}) {}

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), buf_(std::make_shared<Buffer<T>>(shape_numel(shape_), fill)) {}

  Tensor(Shape shape, std::span<const T> values) : shape_(std::move(shape)) {
    if (values.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape_));
    }
    buf_ = std::make_shared<Buffer<T>>(values.begin(), values.end());
  }

  Tensor(Shape shape, std::initializer_list<T> values)
      : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return buf_->size(); }

  T* data() noexcept { return buf_->data(); }
  const T* data() const noexcept { return buf_->data(); }
  std::span<T> values() noexcept { return {buf_->data(), buf_->size()}; }
  std::span<const T> values() const noexcept { return {buf_->data(), buf_->size()}; }

  T& operator[](std::size_t i) noexcept { return (*buf_)[i]; }
  const T& operator[](std::size_t i) const noexcept { return (*buf_)[i]; }

  // Rank-2 element access.
  T& at(std::size_t r, std::size_t c) { return (*buf_)[r * shape_.at(1) + c]; }
  const T& at(std::size_t r, std::size_t c) const { return (*buf_)[r * shape_.at(1) + c]; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return (*buf_)[0];
  }

  bool attached() const noexcept { return graph_ != nullptr; }
  Graph<T>* graph() const noexcept { return graph_; }
  std::size_t node() const noexcept { return node_; }

  // Same buffer, no graph membership.
  Tensor detach() const {
    Tensor t = *this;
    t.graph_ = nullptr;
    t.node_ = 0;
    return t;
  }

  Tensor clone() const {
    Tensor t(shape_);
    std::copy(buf_->begin(), buf_->end(), t.buf_->begin());
    return t;
  }

  // View with a new shape over the same buffer; detached. Use ops::reshape
  // to keep graph membership.
  Tensor viewed(Shape shape) const {
    if (shape_numel(shape) != numel()) {
      throw DimensionError("cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    Tensor t = detach();
    t.shape_ = std::move(shape);
    return t;
  }

  bool shares_buffer(const Tensor& other) const noexcept { return buf_ == other.buf_; }

 private:
  friend class Graph<T>;

  Shape shape_;
  std::shared_ptr<Buffer<T>> buf_;
  Graph<T>* graph_ = nullptr;
  std::size_t node_ = 0;
};

}  // namespace unerf
