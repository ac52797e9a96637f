#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unerf/graph.hpp"
#include "unerf/tensor.hpp"

// Differentiable primitives. Every op evaluates eagerly; when any operand is
// attached to a Graph the result is recorded on that graph with its gradient
// rule, otherwise nothing is recorded.
namespace unerf::ops {

enum class Padding { Replicate, None };

// [m,k] x [k,n] -> [m,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[m,k] * w[k,n] + bias[n]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

std::size_t conv1d_output_length(std::size_t seq_len, std::size_t kernel, std::size_t stride,
                                 Padding padding);

// Cross-correlation along the sample axis of `batch` independent sequences
// packed row-wise: input [batch*seq_len, cin], kernel [k, cin, cout], optional
// bias [cout] (pass an empty tensor to skip). Output window j starts at
// j*stride - (k-1)/2 (replicate, indices clamped) or j*stride (none).
template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t seq_len, std::size_t stride, Padding padding);

// Broadcasting (right-aligned, numpy rules) elementwise arithmetic.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// scale * x + shift
template <typename T>
Tensor<T> scale_shift(const Tensor<T>& x, T scale, T shift);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);

// Concatenation along the last axis; leading extents must agree.
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b);

// Concatenation along axis 0; trailing extents must agree.
template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Rows are slices along axis 0.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

// out[q] = x[lo[q]] + (x[hi[q]] - x[lo[q]]) * w[q], row-wise.
template <typename T>
Tensor<T> lerp_rows(const Tensor<T>& x, std::span<const std::size_t> lo,
                    std::span<const std::size_t> hi, std::span<const double> w);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// [r, n] -> [r, 1]
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x);

// Quadrature weights w_i = T_i * (1 - exp(-sigma_i * delta_i)) with
// T_i = prod_{j<i} exp(-sigma_j * delta_j), per row. sigma and deltas are
// [rays, samples]; deltas is treated as a constant.
template <typename T>
Tensor<T> ray_weights(const Tensor<T>& sigma, const Tensor<T>& deltas);

// out[r, c] = sum_i w[r, i] * values[r*n + i, c]
template <typename T>
Tensor<T> ray_sum(const Tensor<T>& weights, const Tensor<T>& values);

}  // namespace unerf::ops
