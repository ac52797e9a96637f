#include "unerf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "unerf/gradcheck.hpp"

namespace unerf::ops {
namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMajor<T>>;
template <typename T>
using Map = Eigen::Map<RowMajor<T>>;

// c[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto A = MapC<T>(a, m, k);
  const auto B = MapC<T>(b, k, n);
  auto C = Map<T>(c, m, n);
  if (accumulate) C.noalias() += A * B;
  else C.noalias() = A * B;
}

// c[k,n] += a[m,k]^T * g[m,n]
template <typename T>
void gemm_tn(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  Map<T>(c, k, n).noalias() += MapC<T>(a, m, k).transpose() * MapC<T>(g, m, n);
}

// c[m,k] += g[m,n] * w[k,n]^T
template <typename T>
void gemm_nt(const T* g, const T* w, T* c, std::size_t m, std::size_t n, std::size_t k) {
  Map<T>(c, m, k).noalias() += MapC<T>(g, m, n) * MapC<T>(w, k, n).transpose();
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_str(s));
  }
}

// Right-aligned broadcast of two shapes with per-operand strides (0 on
// broadcast axes).
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;
  bool same = false;
};

BroadcastPlan broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  p.out.assign(rank, 1);
  std::vector<std::size_t> ea(rank, 1), eb(rank, 1);
  std::copy(a.begin(), a.end(), ea.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), eb.begin() + (rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    }
    p.out[i] = std::max(ea[i], eb[i]);
  }
  p.stride_a.assign(rank, 0);
  p.stride_b.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    if (ea[i] != 1) p.stride_a[i] = sa;
    if (eb[i] != 1) p.stride_b[i] = sb;
    sa *= ea[i];
    sb *= eb[i];
  }
  return p;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const std::size_t total = shape_numel(p.out);
  if (p.same) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const std::size_t rank = p.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < total; ++o) {
    f(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < p.out[d]) {
        ia += p.stride_a[d];
        ib += p.stride_b[d];
        break;
      }
      ia -= p.stride_a[d] * (p.out[d] - 1);
      ib -= p.stride_b[d] * (p.out[d] - 1);
      idx[d] = 0;
    }
  }
}

template <typename T>
T stable_softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul", "lhs");
  require_rank(b.shape(), 2, "matmul", "rhs");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  gemm_nn(a.data(), b.data(), out.data(), m, k, n, false);
  Graph<T>* g = common_graph({&a, &b});
  if (!g) return out;
  return g->record(out, OpKind::MatMul, {&a, &b},
                   [a, b, m, k, n](Graph<T>& g, std::span<const T> go) {
                     if (T* da = g.grad_sink(a)) gemm_nt(go.data(), b.data(), da, m, n, k);
                     if (T* db = g.grad_sink(b)) gemm_tn(a.data(), go.data(), db, m, k, n);
                   });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank(x.shape(), 2, "linear", "input");
  require_rank(w.shape(), 2, "linear", "weight");
  if (x.dim(1) != w.dim(0) || bias.numel() != w.dim(1)) {
    throw DimensionError("linear: incompatible shapes input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  Tensor<T> out({m, n});
  gemm_nn(x.data(), w.data(), out.data(), m, k, n, false);
  const T* bp = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bp[j];
  }
  Graph<T>* g = common_graph({&x, &w, &bias});
  if (!g) return out;
  return g->record(out, OpKind::Linear, {&x, &w, &bias},
                   [x, w, bias, m, k, n](Graph<T>& g, std::span<const T> go) {
                     if (T* dx = g.grad_sink(x)) gemm_nt(go.data(), w.data(), dx, m, n, k);
                     if (T* dw = g.grad_sink(w)) gemm_tn(x.data(), go.data(), dw, m, k, n);
                     if (T* db = g.grad_sink(bias)) {
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) db[j] += go[i * n + j];
                     }
                   });
}

std::size_t conv1d_output_length(std::size_t seq_len, std::size_t kernel, std::size_t stride,
                                 Padding padding) {
  if (stride == 0 || kernel == 0) throw ContractError("conv1d: kernel and stride must be positive");
  if (padding == Padding::Replicate) return (seq_len + stride - 1) / stride;
  if (seq_len < kernel) return 0;
  return (seq_len - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t seq_len, std::size_t stride, Padding padding) {
  require_rank(input.shape(), 2, "conv1d", "input");
  require_rank(kernel.shape(), 3, "conv1d", "kernel");
  const std::size_t k = kernel.dim(0), cin = kernel.dim(1), cout = kernel.dim(2);
  if (input.dim(1) != cin) {
    throw DimensionError("conv1d: input " + shape_str(input.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
  }
  if (seq_len == 0 || input.dim(0) % seq_len != 0) {
    throw DimensionError("conv1d: " + std::to_string(input.dim(0)) +
                         " rows do not split into sequences of length " + std::to_string(seq_len));
  }
  const bool has_bias = bias.numel() > 0;
  if (has_bias && bias.numel() != cout) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }
  const std::size_t out_len = conv1d_output_length(seq_len, k, stride, padding);
  if (out_len < 1) {
    throw ContractError("conv1d: empty output for sequence length " + std::to_string(seq_len) +
                        " with kernel " + std::to_string(k));
  }
  const std::size_t batch = input.dim(0) / seq_len;

  // Source row (within its sequence) for output j, tap t.
  auto src = std::make_shared<std::vector<std::size_t>>(out_len * k);
  const long pad_left = padding == Padding::Replicate ? static_cast<long>((k - 1) / 2) : 0;
  for (std::size_t j = 0; j < out_len; ++j) {
    for (std::size_t t = 0; t < k; ++t) {
      long s = static_cast<long>(j * stride + t) - pad_left;
      s = std::clamp(s, 0L, static_cast<long>(seq_len) - 1);
      (*src)[j * k + t] = static_cast<std::size_t>(s);
    }
  }

  // im2col: row (b, j) holds the k source rows side by side, so the kernel
  // [k, cin, cout] acts as one [k*cin, cout] matrix.
  auto im2col = [src, batch, seq_len, out_len, k, cin](const T* x) {
    std::vector<T> cols(batch * out_len * k * cin);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < out_len; ++j)
        for (std::size_t t = 0; t < k; ++t)
          std::copy_n(x + (b * seq_len + (*src)[j * k + t]) * cin, cin,
                      cols.data() + ((b * out_len + j) * k + t) * cin);
    return cols;
  };
  const std::size_t rows = batch * out_len;
  Tensor<T> out({rows, cout});
  gemm_nn(im2col(input.data()).data(), kernel.data(), out.data(), rows, k * cin, cout, false);
  if (has_bias) {
    const T* bp = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < cout; ++q) out[r * cout + q] += bp[q];
  }

  Graph<T>* g = common_graph({&input, &kernel, &bias});
  if (!g) return out;
  return g->record(
      out, OpKind::Conv1d, {&input, &kernel, &bias},
      [input, kernel, bias, src, batch, seq_len, out_len, k, cin, cout, rows, has_bias, im2col](
          Graph<T>& g, std::span<const T> go) {
        if (T* dx = g.grad_sink(input)) {
          std::vector<T> dcols(rows * k * cin, T{0});
          gemm_nt(go.data(), kernel.data(), dcols.data(), rows, cout, k * cin);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < out_len; ++j)
              for (std::size_t t = 0; t < k; ++t) {
                T* xr = dx + (b * seq_len + (*src)[j * k + t]) * cin;
                const T* dc = dcols.data() + ((b * out_len + j) * k + t) * cin;
                for (std::size_t c = 0; c < cin; ++c) xr[c] += dc[c];
              }
        }
        if (T* dk = g.grad_sink(kernel)) gemm_tn(im2col(input.data()).data(), go.data(), dk, rows, k * cin, cout);
        if (has_bias) {
          if (T* db = g.grad_sink(bias)) {
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t q = 0; q < cout; ++q) db[q] += go[r * cout + q];
          }
        }
      });
}

namespace {

enum class Binary { Add, Sub, Mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind) {
  const char* name = kind == Binary::Add ? "add" : kind == Binary::Sub ? "sub" : "mul";
  auto plan = std::make_shared<BroadcastPlan>(broadcast(a.shape(), b.shape(), name));
  Tensor<T> out(plan->out);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  switch (kind) {
    case Binary::Add: for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] + pb[j]; }); break;
    case Binary::Sub: for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] - pb[j]; }); break;
    case Binary::Mul: for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] * pb[j]; }); break;
  }
  Graph<T>* g = common_graph({&a, &b});
  if (!g) return out;
  const OpKind op = kind == Binary::Add ? OpKind::Add : kind == Binary::Sub ? OpKind::Sub : OpKind::Mul;
  return g->record(out, op, {&a, &b}, [a, b, plan, kind](Graph<T>& g, std::span<const T> go) {
    T* da = g.grad_sink(a);
    T* db = g.grad_sink(b);
    const T* pa = a.data();
    const T* pb = b.data();
    for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) {
      switch (kind) {
        case Binary::Add:
          if (da) da[i] += go[o];
          if (db) db[j] += go[o];
          break;
        case Binary::Sub:
          if (da) da[i] += go[o];
          if (db) db[j] -= go[o];
          break;
        case Binary::Mul:
          if (da) da[i] += go[o] * pb[j];
          if (db) db[j] += go[o] * pa[i];
          break;
      }
    });
  });
}

// Unary op whose derivative is a function of (input, output).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, OpKind kind, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  Graph<T>* g = x.graph();
  if (!g) return out;
  Tensor<T> saved = out;
  return g->record(out, kind, {&x}, [x, saved, deriv](Graph<T>& g, std::span<const T> go) {
    T* dx = g.grad_sink(x);
    if (!dx) return;
    const T* px = x.data();
    const T* po = saved.data();
    for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * deriv(px[i], po[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Add);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Sub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::Mul);
}

template <typename T>
Tensor<T> scale_shift(const Tensor<T>& x, T scale, T shift) {
  return unary(
      x, OpKind::ScaleShift, [=](T v) { return scale * v + shift; },
      [=](T, T) { return scale; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  if (KinkMonitor* m = KinkMonitor::active()) {
    for (T v : x.values()) m->observe(v > T{0}, v == T{0});
  }
  return unary(
      x, OpKind::Relu, [](T v) { return v <= T{0} ? T{0} : v; },  // NaN passes through
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary(
      x, OpKind::Softplus, [](T v) { return stable_softplus(v); },
      [](T v, T) { return stable_sigmoid(v); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, OpKind::Sigmoid, [](T v) { return stable_sigmoid(v); },
      [](T, T s) { return s * (T{1} - s); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, OpKind::Exp, [](T v) { return std::exp(v); }, [](T, T e) { return e; });
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw DimensionError("concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ on non-concatenated axes");
  }
  const std::size_t ca = a.shape().back(), cb = b.shape().back(), cw = ca + cb;
  const std::size_t rows = ca ? a.numel() / ca : (cb ? b.numel() / cb : 0);
  Shape shape = a.shape();
  shape.back() = cw;
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data() + r * ca, ca, out.data() + r * cw);
    std::copy_n(b.data() + r * cb, cb, out.data() + r * cw + ca);
  }
  Graph<T>* g = common_graph({&a, &b});
  if (!g) return out;
  return g->record(out, OpKind::Concat, {&a, &b},
                   [a, b, rows, ca, cb, cw](Graph<T>& g, std::span<const T> go) {
                     if (T* da = g.grad_sink(a))
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] += go[r * cw + c];
                     if (T* db = g.grad_sink(b))
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] += go[r * cw + ca + c];
                   });
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw DimensionError("concat_rows: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ on trailing axes");
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  Tensor<T> out(shape);
  std::copy_n(a.data(), a.numel(), out.data());
  std::copy_n(b.data(), b.numel(), out.data() + a.numel());
  Graph<T>* g = common_graph({&a, &b});
  if (!g) return out;
  return g->record(out, OpKind::Concat, {&a, &b}, [a, b](Graph<T>& g, std::span<const T> go) {
    if (T* da = g.grad_sink(a))
      for (std::size_t i = 0; i < a.numel(); ++i) da[i] += go[i];
    if (T* db = g.grad_sink(b))
      for (std::size_t i = 0; i < b.numel(); ++i) db[i] += go[a.numel() + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  Tensor<T> out = x.viewed(std::move(shape));
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::Reshape, {&x}, [x](Graph<T>& g, std::span<const T> go) {
    if (T* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  if (x.rank() == 0) throw DimensionError("gather_rows: scalar input");
  const std::size_t n = x.dim(0);
  const std::size_t width = n ? x.numel() / n : 0;
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  for (std::size_t r : *idx) {
    if (r >= n) throw RangeError("gather_rows: row " + std::to_string(r) + " out of " + std::to_string(n));
  }
  Shape shape = x.shape();
  shape[0] = idx->size();
  Tensor<T> out(shape);
  for (std::size_t q = 0; q < idx->size(); ++q)
    std::copy_n(x.data() + (*idx)[q] * width, width, out.data() + q * width);
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::GatherRows, {&x}, [x, idx, width](Graph<T>& g, std::span<const T> go) {
    T* dx = g.grad_sink(x);
    if (!dx) return;
    for (std::size_t q = 0; q < idx->size(); ++q) {
      T* d = dx + (*idx)[q] * width;
      const T* s = go.data() + q * width;
      for (std::size_t c = 0; c < width; ++c) d[c] += s[c];
    }
  });
}

template <typename T>
Tensor<T> lerp_rows(const Tensor<T>& x, std::span<const std::size_t> lo,
                    std::span<const std::size_t> hi, std::span<const double> w) {
  if (x.rank() == 0) throw DimensionError("lerp_rows: scalar input");
  if (lo.size() != hi.size() || lo.size() != w.size()) {
    throw DimensionError("lerp_rows: index and weight lists differ in length");
  }
  const std::size_t n = x.dim(0);
  const std::size_t width = n ? x.numel() / n : 0;
  struct Plan {
    std::vector<std::size_t> lo, hi;
    std::vector<T> w;
  };
  auto plan = std::make_shared<Plan>();
  plan->lo.assign(lo.begin(), lo.end());
  plan->hi.assign(hi.begin(), hi.end());
  plan->w.reserve(w.size());
  for (double v : w) plan->w.push_back(static_cast<T>(v));
  for (std::size_t q = 0; q < lo.size(); ++q) {
    if (lo[q] >= n || hi[q] >= n) throw RangeError("lerp_rows: row index out of range");
  }
  Shape shape = x.shape();
  shape[0] = lo.size();
  Tensor<T> out(shape);
  for (std::size_t q = 0; q < lo.size(); ++q) {
    const T* f0 = x.data() + plan->lo[q] * width;
    const T* f1 = x.data() + plan->hi[q] * width;
    T* o = out.data() + q * width;
    const T wq = plan->w[q];
    if (wq == T{0}) {
      std::copy_n(f0, width, o);
    } else {
      for (std::size_t c = 0; c < width; ++c) o[c] = f0[c] + (f1[c] - f0[c]) * wq;
    }
  }
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::LerpRows, {&x}, [x, plan, width](Graph<T>& g, std::span<const T> go) {
    T* dx = g.grad_sink(x);
    if (!dx) return;
    for (std::size_t q = 0; q < plan->lo.size(); ++q) {
      const T wq = plan->w[q];
      T* d0 = dx + plan->lo[q] * width;
      T* d1 = dx + plan->hi[q] * width;
      const T* s = go.data() + q * width;
      for (std::size_t c = 0; c < width; ++c) {
        d0[c] += s[c] * (T{1} - wq);
        d1[c] += s[c] * wq;
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.values()) acc += v;
  Tensor<T> out(Shape{}, acc);
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::Sum, {&x}, [x](Graph<T>& g, std::span<const T> go) {
    if (T* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += go[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  T acc{0};
  for (T v : x.values()) acc += v;
  const T inv = T{1} / static_cast<T>(x.numel());
  Tensor<T> out(Shape{}, acc * inv);
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::Mean, {&x}, [x, inv](Graph<T>& g, std::span<const T> go) {
    if (T* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += go[0] * inv;
  });
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  require_rank(x.shape(), 2, "sum_rows", "input");
  const std::size_t r = x.dim(0), n = x.dim(1);
  Tensor<T> out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    T acc{0};
    for (std::size_t j = 0; j < n; ++j) acc += x[i * n + j];
    out[i] = acc;
  }
  Graph<T>* g = x.graph();
  if (!g) return out;
  return g->record(out, OpKind::SumRows, {&x}, [x, r, n](Graph<T>& g, std::span<const T> go) {
    if (T* dx = g.grad_sink(x))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += go[i];
  });
}

template <typename T>
Tensor<T> ray_weights(const Tensor<T>& sigma, const Tensor<T>& deltas) {
  require_rank(sigma.shape(), 2, "ray_weights", "sigma");
  if (sigma.shape() != deltas.shape()) {
    throw DimensionError("ray_weights: sigma " + shape_str(sigma.shape()) + " vs deltas " +
                         shape_str(deltas.shape()));
  }
  const std::size_t rays = sigma.dim(0), n = sigma.dim(1);
  Tensor<T> out(sigma.shape());
  for (std::size_t r = 0; r < rays; ++r) {
    T trans{1};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t at = r * n + i;
      const T keep = std::exp(-sigma[at] * deltas[at]);
      out[at] = trans * (T{1} - keep);
      trans *= keep;
    }
  }
  Graph<T>* g = sigma.graph();
  if (!g) return out;
  Tensor<T> w = out;
  return g->record(out, OpKind::RayWeights, {&sigma},
                   [sigma, deltas, w, rays, n](Graph<T>& g, std::span<const T> go) {
                     T* ds = g.grad_sink(sigma);
                     if (!ds) return;
                     // d w_i / d s_k = T_{k+1} (i == k), -w_i (i > k), with s = sigma * delta.
                     for (std::size_t r = 0; r < rays; ++r) {
                       T tail{0};  // sum_{i>k} g_i w_i
                       std::vector<T> trans_after(n);
                       T trans{1};
                       for (std::size_t i = 0; i < n; ++i) {
                         trans *= std::exp(-sigma[r * n + i] * deltas[r * n + i]);
                         trans_after[i] = trans;
                       }
                       for (std::size_t k = n; k-- > 0;) {
                         const std::size_t at = r * n + k;
                         const T dsk = go[at] * trans_after[k] - tail;
                         ds[at] += dsk * deltas[at];
                         tail += go[at] * w[at];
                       }
                     }
                   });
}

template <typename T>
Tensor<T> ray_sum(const Tensor<T>& weights, const Tensor<T>& values) {
  require_rank(weights.shape(), 2, "ray_sum", "weights");
  require_rank(values.shape(), 2, "ray_sum", "values");
  const std::size_t rays = weights.dim(0), n = weights.dim(1), c = values.dim(1);
  if (values.dim(0) != rays * n) {
    throw DimensionError("ray_sum: weights " + shape_str(weights.shape()) + " vs values " +
                         shape_str(values.shape()));
  }
  Tensor<T> out({rays, c});
  for (std::size_t r = 0; r < rays; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const T wv = weights[r * n + i];
      for (std::size_t q = 0; q < c; ++q) out[r * c + q] += wv * values[(r * n + i) * c + q];
    }
  Graph<T>* g = common_graph({&weights, &values});
  if (!g) return out;
  return g->record(out, OpKind::RaySum, {&weights, &values},
                   [weights, values, rays, n, c](Graph<T>& g, std::span<const T> go) {
                     T* dw = g.grad_sink(weights);
                     T* dv = g.grad_sink(values);
                     for (std::size_t r = 0; r < rays; ++r)
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t row = r * n + i;
                         for (std::size_t q = 0; q < c; ++q) {
                           if (dw) dw[row] += go[r * c + q] * values[row * c + q];
                           if (dv) dv[row * c + q] += go[r * c + q] * weights[row];
                         }
                       }
                   });
}

#define UNERF_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                            std::size_t, Padding);                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale_shift(const Tensor<T>&, T, T);                                         \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> softplus(const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> exp(const Tensor<T>&);                                                       \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> concat_rows(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                 \
  template Tensor<T> lerp_rows(const Tensor<T>&, std::span<const std::size_t>,                    \
                               std::span<const std::size_t>, std::span<const double>);            \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> sum_rows(const Tensor<T>&);                                                  \
  template Tensor<T> ray_weights(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> ray_sum(const Tensor<T>&, const Tensor<T>&);

UNERF_INSTANTIATE_OPS(float)
UNERF_INSTANTIATE_OPS(double)

}  // namespace unerf::ops
