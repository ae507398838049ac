// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "segloc/kernels.hpp"

namespace segloc::ag {
namespace {

template <class T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.size() != b.size()) throw InvalidInput(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                                               " vs " + shape_str(b.shape()));
}

// log(sigmoid(x)) without overflow.
template <class T>
T log_sigmoid(T x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <class T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(w);
  if (wv.ndim() != 2 || xv.cols() != wv.dim(0)) {
    throw InvalidInput("linear: input " + shape_str(xv.shape()) + " vs weight " + shape_str(wv.shape()));
  }
  const int n = xv.rows(), in = wv.dim(0), out = wv.dim(1);
  std::vector<int> shape = xv.shape();
  shape.back() = out;
  Tensor<T> y(shape);
  if (b.valid()) {
    const Tensor<T>& bv = g.value(b);
    if (static_cast<int>(bv.size()) != out) throw InvalidInput("linear: bias size mismatch");
    for (int r = 0; r < n; ++r) std::memcpy(y.row(r), bv.data(), sizeof(T) * static_cast<std::size_t>(out));
  }
  kernels::table<T>().gemm_nn(n, out, in, xv.data(), in, wv.data(), out, y.data(), out);
  return g.op(std::move(y), {x, w, b}, [x, w, b, n, in, out](Graph<T>& g, Var self) {
    const auto& k = kernels::table<T>();
    const Tensor<T>& gy = g.grad(self);
    if (g.requires_grad(x)) {
      k.gemm_nt(n, in, out, gy.data(), out, g.value(w).data(), out, g.grad(x).data(), in);
    }
    if (g.requires_grad(w)) {
      k.gemm_tn(in, out, n, g.value(x).data(), in, gy.data(), out, g.grad(w).data(), out);
    }
    if (g.requires_grad(b)) {
      Tensor<T>& gb = g.grad(b);
      for (int r = 0; r < n; ++r) k.axpy(T(1), gy.row(r), gb.data(), static_cast<std::size_t>(out));
    }
  });
}

template <class T>
Var gather_rows(Graph<T>& g, Var x, const Index& idx, int taps) {
  const Tensor<T>& xv = g.value(x);
  const int cols = xv.cols();
  const int rows_in = xv.rows();
  const int rows = static_cast<int>(idx->size()) / taps;
  Tensor<T> y({rows, taps * cols});
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < taps; ++j) {
      const int src = (*idx)[static_cast<std::size_t>(r) * taps + j];
      if (src < 0) continue;
      if (src >= rows_in) throw InvalidInput("gather_rows: index out of range");
      std::memcpy(y.row(r) + static_cast<std::size_t>(j) * cols, xv.row(src), sizeof(T) * static_cast<std::size_t>(cols));
    }
  }
  return g.op(std::move(y), {x}, [x, idx, taps, cols, rows](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    const auto& k = kernels::table<T>();
    for (int r = 0; r < rows; ++r) {
      for (int j = 0; j < taps; ++j) {
        const int src = (*idx)[static_cast<std::size_t>(r) * taps + j];
        if (src < 0) continue;
        k.axpy(T(1), gy.row(r) + static_cast<std::size_t>(j) * cols, gx.row(src), static_cast<std::size_t>(cols));
      }
    }
  });
}

template <class T>
Var gather_rows_const(Graph<T>& g, const float* src, int cols, const Index& idx, int taps) {
  const int rows = static_cast<int>(idx->size()) / taps;
  Tensor<T> y({rows, taps * cols});
  T* out = y.data();
  for (std::size_t e = 0; e < idx->size(); ++e) {
    const int s = (*idx)[e];
    T* dst = out + e * static_cast<std::size_t>(cols);
    if (s < 0) continue;
    const float* p = src + static_cast<std::size_t>(s) * cols;
    for (int c = 0; c < cols; ++c) dst[c] = static_cast<T>(p[c]);
  }
  return g.constant(std::move(y));
}

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  check_same(av, bv, "add");
  Tensor<T> y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return g.op(std::move(y), {a, b}, [a, b](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor<T>& gv = g.grad(v);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += gy[i];
    }
  });
}

template <class T>
Var add_const(Graph<T>& g, Var a, const Tensor<T>& c) {
  const Tensor<T>& av = g.value(a);
  check_same(av, c, "add_const");
  Tensor<T> y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
  return g.op(std::move(y), {a}, [a](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& ga = g.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
  });
}

template <class T>
Var scale(Graph<T>& g, Var a, T s) {
  Tensor<T> y = g.value(a);
  for (auto& v : y.vec()) v *= s;
  return g.op(std::move(y), {a}, [a, s](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& ga = g.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * gy[i];
  });
}

template <class T>
Var mask_rows(Graph<T>& g, Var x, const std::vector<std::uint8_t>& mask) {
  Tensor<T> y = g.value(x);
  const int cols = y.cols();
  if (static_cast<int>(mask.size()) != y.rows()) throw InvalidInput("mask_rows: mask length mismatch");
  for (int r = 0; r < y.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) std::fill(y.row(r), y.row(r) + cols, T(0));
  }
  return g.op(std::move(y), {x}, [x, mask, cols](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (int r = 0; r < gx.rows(); ++r) {
      if (!mask[static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < cols; ++c) gx.at(r, c) += gy.at(r, c);
    }
  });
}

template <class T>
Var relu(Graph<T>& g, Var x) {
  Tensor<T> y = g.value(x);
  for (auto& v : y.vec()) v = v > T(0) ? v : T(0);
  return g.op(std::move(y), {x}, [x](Graph<T>& g, Var self) {
    const Tensor<T>& yv = g.value(self);
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (yv[i] > T(0)) gx[i] += gy[i];
    }
  });
}

template <class T>
Var gelu(Graph<T>& g, Var x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = T(0.044715);
  Tensor<T> y = g.value(x);
  for (auto& v : y.vec()) v = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  return g.op(std::move(y), {x}, [x](Graph<T>& g, Var self) {
    const Tensor<T>& xv = g.value(x);
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T v = xv[i];
      const T th = std::tanh(c * (v + a * v * v * v));
      const T d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * c * (T(1) + T(3) * a * v * v);
      gx[i] += gy[i] * d;
    }
  });
}

template <class T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps) {
  const Tensor<T>& xv = g.value(x);
  const int rows = xv.rows(), cols = xv.cols();
  if (static_cast<int>(g.value(gamma).size()) != cols || static_cast<int>(g.value(beta).size()) != cols) {
    throw InvalidInput("layer_norm: affine size mismatch");
  }
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  Tensor<T> y(xv.shape());
  const T* gm = g.value(gamma).data();
  const T* bt = g.value(beta).data();
  for (int r = 0; r < rows; ++r) {
    const T* xr = xv.row(r);
    T mean = 0;
    for (int c = 0; c < cols; ++c) mean += xr[c];
    mean /= cols;
    T var = 0;
    for (int c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= cols;
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    for (int c = 0; c < cols; ++c) {
      const T h = (xr[c] - mean) * rs;
      xhat->at(r, c) = h;
      y.at(r, c) = h * gm[c] + bt[c];
    }
  }
  return g.op(std::move(y), {x, gamma, beta}, [x, gamma, beta, xhat, rstd, rows, cols](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    const T* gm = g.value(gamma).data();
    if (g.requires_grad(gamma) || g.requires_grad(beta)) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (g.requires_grad(gamma)) g.grad(gamma)[static_cast<std::size_t>(c)] += gy.at(r, c) * xhat->at(r, c);
          if (g.requires_grad(beta)) g.grad(beta)[static_cast<std::size_t>(c)] += gy.at(r, c);
        }
      }
    }
    if (!g.requires_grad(x)) return;
    Tensor<T>& gx = g.grad(x);
    std::vector<T> dh(static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
      T s1 = 0, s2 = 0;
      for (int c = 0; c < cols; ++c) {
        dh[static_cast<std::size_t>(c)] = gy.at(r, c) * gm[c];
        s1 += dh[static_cast<std::size_t>(c)];
        s2 += dh[static_cast<std::size_t>(c)] * xhat->at(r, c);
      }
      const T rs = (*rstd)[static_cast<std::size_t>(r)];
      for (int c = 0; c < cols; ++c) {
        gx.at(r, c) += rs * (dh[static_cast<std::size_t>(c)] - s1 / cols - xhat->at(r, c) * s2 / cols);
      }
    }
  });
}

template <class T>
Var attention(Graph<T>& g, Var q, Var k, Var v, const std::vector<std::uint8_t>& key_mask, int heads) {
  const Tensor<T>& qv = g.value(q);
  const Tensor<T>& kv = g.value(k);
  const Tensor<T>& vv = g.value(v);
  const int tq = qv.rows(), tk = kv.rows(), c = qv.cols();
  if (kv.cols() != c || vv.cols() != c || vv.rows() != tk || heads <= 0 || c % heads != 0) {
    throw InvalidInput("attention: incompatible shapes");
  }
  if (!key_mask.empty() && static_cast<int>(key_mask.size()) != tk) throw InvalidInput("attention: mask length");
  const int d = c / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(d));
  const auto& kt = kernels::table<T>();
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(heads) * tq * tk, T(0));
  Tensor<T> out({tq, c});
  std::vector<T> s(static_cast<std::size_t>(tk));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < tq; ++i) {
      const T* qi = qv.row(i) + h * d;
      T mx = -std::numeric_limits<T>::infinity();
      bool any = false;
      for (int j = 0; j < tk; ++j) {
        if (!key_mask.empty() && !key_mask[static_cast<std::size_t>(j)]) continue;
        s[static_cast<std::size_t>(j)] = kt.dot(qi, kv.row(j) + h * d, static_cast<std::size_t>(d)) * sc;
        mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        any = true;
      }
      if (!any) continue;
      T* p = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
      T z = 0;
      for (int j = 0; j < tk; ++j) {
        if (!key_mask.empty() && !key_mask[static_cast<std::size_t>(j)]) continue;
        p[j] = std::exp(s[static_cast<std::size_t>(j)] - mx);
        z += p[j];
      }
      T* oi = out.row(i) + h * d;
      for (int j = 0; j < tk; ++j) {
        if (p[j] == T(0)) continue;
        p[j] /= z;
        kt.axpy(p[j], vv.row(j) + h * d, oi, static_cast<std::size_t>(d));
      }
    }
  }
  return g.op(std::move(out), {q, k, v}, [q, k, v, probs, heads, tq, tk, d, sc](Graph<T>& g, Var self) {
    const auto& kt = kernels::table<T>();
    const Tensor<T>& go = g.grad(self);
    const Tensor<T>& qv = g.value(q);
    const Tensor<T>& kv = g.value(k);
    const Tensor<T>& vv = g.value(v);
    Tensor<T>* gq = g.requires_grad(q) ? &g.grad(q) : nullptr;
    Tensor<T>* gk = g.requires_grad(k) ? &g.grad(k) : nullptr;
    Tensor<T>* gv = g.requires_grad(v) ? &g.grad(v) : nullptr;
    std::vector<T> dp(static_cast<std::size_t>(tk));
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < tq; ++i) {
        const T* p = probs->data() + (static_cast<std::size_t>(h) * tq + i) * tk;
        const T* goi = go.row(i) + h * d;
        T acc = 0;
        for (int j = 0; j < tk; ++j) {
          if (p[j] == T(0)) {
            dp[static_cast<std::size_t>(j)] = 0;
            continue;
          }
          dp[static_cast<std::size_t>(j)] = kt.dot(goi, vv.row(j) + h * d, static_cast<std::size_t>(d));
          acc += p[j] * dp[static_cast<std::size_t>(j)];
          if (gv != nullptr) kt.axpy(p[j], goi, gv->row(j) + h * d, static_cast<std::size_t>(d));
        }
        for (int j = 0; j < tk; ++j) {
          if (p[j] == T(0)) continue;
          const T ds = p[j] * (dp[static_cast<std::size_t>(j)] - acc) * sc;
          if (gq != nullptr) kt.axpy(ds, kv.row(j) + h * d, gq->row(i) + h * d, static_cast<std::size_t>(d));
          if (gk != nullptr) kt.axpy(ds, qv.row(i) + h * d, gk->row(j) + h * d, static_cast<std::size_t>(d));
        }
      }
    }
  });
}

template <class T>
Var group_mean(Graph<T>& g, Var x, int group) {
  const Tensor<T>& xv = g.value(x);
  const int rows = xv.rows(), cols = xv.cols();
  if (group <= 0 || rows % group != 0) throw InvalidInput("group_mean: rows not divisible by group");
  const int out_rows = rows / group;
  Tensor<T> y({out_rows, cols});
  const T inv = T(1) / static_cast<T>(group);
  const auto& kt = kernels::table<T>();
  for (int o = 0; o < out_rows; ++o) {
    for (int r = 0; r < group; ++r) kt.axpy(T(1), xv.row(o * group + r), y.row(o), static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) y.at(o, c) *= inv;
  }
  return g.op(std::move(y), {x}, [x, group, out_rows, cols, inv](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    const auto& kt = kernels::table<T>();
    for (int o = 0; o < out_rows; ++o) {
      for (int r = 0; r < group; ++r) kt.axpy(inv, gy.row(o), gx.row(o * group + r), static_cast<std::size_t>(cols));
    }
  });
}

template <class T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& xs) {
  if (xs.empty()) throw InvalidInput("concat_rows: no inputs");
  const int cols = g.value(xs.front()).cols();
  int rows = 0;
  for (Var x : xs) {
    if (g.value(x).cols() != cols) throw InvalidInput("concat_rows: column mismatch");
    rows += g.value(x).rows();
  }
  Tensor<T> y({rows, cols});
  std::size_t off = 0;
  for (Var x : xs) {
    const Tensor<T>& xv = g.value(x);
    std::copy(xv.vec().begin(), xv.vec().end(), y.vec().begin() + static_cast<std::ptrdiff_t>(off));
    off += xv.size();
  }
  return g.op(std::move(y), xs, [xs](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    std::size_t off = 0;
    for (Var x : xs) {
      const std::size_t n = g.value(x).size();
      if (g.requires_grad(x)) {
        Tensor<T>& gx = g.grad(x);
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[off + i];
      }
      off += n;
    }
  });
}

template <class T>
Var slice_rows(Graph<T>& g, Var x, int begin, int end) {
  const Tensor<T>& xv = g.value(x);
  if (begin < 0 || end > xv.rows() || begin > end) throw InvalidInput("slice_rows: range out of bounds");
  const int cols = xv.cols();
  Tensor<T> y({end - begin, cols});
  std::copy(xv.row(begin), xv.row(begin) + static_cast<std::size_t>(end - begin) * cols, y.data());
  return g.op(std::move(y), {x}, [x, begin, cols](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    T* dst = gx.row(begin);
    for (std::size_t i = 0; i < gy.size(); ++i) dst[i] += gy[i];
    (void)cols;
  });
}

template <class T>
Var slice_cols(Graph<T>& g, Var x, int begin, int end) {
  const Tensor<T>& xv = g.value(x);
  const int cols = xv.cols(), rows = xv.rows();
  if (begin < 0 || end > cols || begin >= end) throw InvalidInput("slice_cols: range out of bounds");
  const int w = end - begin;
  Tensor<T> y({rows, w});
  for (int r = 0; r < rows; ++r) std::copy(xv.row(r) + begin, xv.row(r) + end, y.row(r));
  return g.op(std::move(y), {x}, [x, begin, w, rows](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < w; ++c) gx.at(r, begin + c) += gy.at(r, c);
    }
  });
}

template <class T>
Var reshape(Graph<T>& g, Var x, std::vector<int> shape) {
  Tensor<T> y = g.value(x);
  y.reshape(std::move(shape));
  return g.op(std::move(y), {x}, [x](Graph<T>& g, Var self) {
    const Tensor<T>& gy = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

template <class T>
Var dot_const(Graph<T>& g, Var x, const Tensor<T>& c) {
  const Tensor<T>& xv = g.value(x);
  check_same(xv, c, "dot_const");
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * c[i];
  auto cc = std::make_shared<Tensor<T>>(c);
  return g.op(Tensor<T>({1}, std::vector<T>{acc}), {x}, [x, cc](Graph<T>& g, Var self) {
    const T s = g.grad(self)[0];
    Tensor<T>& gx = g.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * (*cc)[i];
  });
}

template <class T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& scalars, const std::vector<T>& weights) {
  if (scalars.size() != weights.size()) throw InvalidInput("weighted_sum: size mismatch");
  std::vector<Var> used;
  std::vector<T> w;
  T acc = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (!scalars[i].valid()) continue;
    acc += weights[i] * g.value(scalars[i])[0];
    used.push_back(scalars[i]);
    w.push_back(weights[i]);
  }
  return g.op(Tensor<T>({1}, std::vector<T>{acc}), used, [used, w](Graph<T>& g, Var self) {
    const T s = g.grad(self)[0];
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (g.requires_grad(used[i])) g.grad(used[i])[0] += s * w[i];
    }
  });
}

template <class T>
Var focal_loss(Graph<T>& g, Var logits, const std::vector<T>& targets, const std::vector<T>& weights, T alpha,
               T gamma, T normalizer) {
  const Tensor<T>& xv = g.value(logits);
  if (targets.size() != xv.size() || weights.size() != xv.size()) throw InvalidInput("focal_loss: size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (weights[i] == T(0)) continue;
    const T x = xv[i];
    const T p = sigmoid(x);
    T l;
    if (targets[i] > T(0.5)) {
      l = -alpha * std::pow(T(1) - p, gamma) * log_sigmoid(x);
    } else {
      l = -(T(1) - alpha) * std::pow(p, gamma) * log_sigmoid(-x);
    }
    acc += weights[i] * l;
  }
  acc /= normalizer;
  return g.op(Tensor<T>({1}, std::vector<T>{acc}), {logits},
              [logits, targets, weights, alpha, gamma, normalizer](Graph<T>& g, Var self) {
                const T s = g.grad(self)[0] / normalizer;
                const Tensor<T>& xv = g.value(logits);
                Tensor<T>& gx = g.grad(logits);
                for (std::size_t i = 0; i < xv.size(); ++i) {
                  if (weights[i] == T(0)) continue;
                  const T x = xv[i];
                  const T p = sigmoid(x);
                  T d;
                  if (targets[i] > T(0.5)) {
                    d = alpha * std::pow(T(1) - p, gamma) * (gamma * p * log_sigmoid(x) - (T(1) - p));
                  } else {
                    d = (T(1) - alpha) * std::pow(p, gamma) * (p - gamma * (T(1) - p) * log_sigmoid(-x));
                  }
                  gx[i] += s * weights[i] * d;
                }
              });
}

template <class T>
Var iou_loss(Graph<T>& g, Var offsets, const std::vector<T>& targets, const std::vector<std::uint8_t>& pos,
             T normalizer) {
  const Tensor<T>& ov = g.value(offsets);
  const int rows = ov.rows();
  if (ov.cols() != 2 || targets.size() != ov.size() || static_cast<int>(pos.size()) != rows) {
    throw InvalidInput("iou_loss: shape mismatch");
  }
  constexpr T tiny = std::numeric_limits<T>::min();
  T acc = 0;
  for (int r = 0; r < rows; ++r) {
    if (!pos[static_cast<std::size_t>(r)]) continue;
    const T ps = ov.at(r, 0), pe = ov.at(r, 1);
    const T ts = targets[2 * static_cast<std::size_t>(r)], te = targets[2 * static_cast<std::size_t>(r) + 1];
    const T inter = std::min(ps, ts) + std::min(pe, te);
    const T uni = ps + pe + ts + te - inter;
    acc += T(1) - (uni > tiny ? inter / uni : T(1));
  }
  acc /= normalizer;
  return g.op(Tensor<T>({1}, std::vector<T>{acc}), {offsets},
              [offsets, targets, pos, normalizer, rows](Graph<T>& g, Var self) {
                const T s = g.grad(self)[0] / normalizer;
                const Tensor<T>& ov = g.value(offsets);
                Tensor<T>& go = g.grad(offsets);
                for (int r = 0; r < rows; ++r) {
                  if (!pos[static_cast<std::size_t>(r)]) continue;
                  const T p[2] = {ov.at(r, 0), ov.at(r, 1)};
                  const T t[2] = {targets[2 * static_cast<std::size_t>(r)], targets[2 * static_cast<std::size_t>(r) + 1]};
                  const T inter = std::min(p[0], t[0]) + std::min(p[1], t[1]);
                  const T uni = p[0] + p[1] + t[0] + t[1] - inter;
                  if (!(uni > tiny)) continue;
                  for (int c = 0; c < 2; ++c) {
                    const T di = p[c] < t[c] ? T(1) : T(0);
                    const T du = T(1) - di;
                    // d(1 - I/U) = -(dI*U - I*dU)/U^2
                    go.at(r, c) += -s * (di * uni - inter * du) / (uni * uni);
                  }
                }
              });
}

template <class T>
Var margin_ranking_loss(Graph<T>& g, Var scores, const std::vector<std::int8_t>& label, T margin) {
  const Tensor<T>& sv = g.value(scores);
  if (label.size() != sv.size()) throw InvalidInput("margin_ranking_loss: size mismatch");
  std::vector<int> in, out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == 1) in.push_back(static_cast<int>(i));
    if (label[i] == 0) out.push_back(static_cast<int>(i));
  }
  const T pairs = static_cast<T>(in.size() * out.size());
  T acc = 0;
  for (int i : in) {
    for (int j : out) acc += std::max(T(0), margin - (sv[static_cast<std::size_t>(i)] - sv[static_cast<std::size_t>(j)]));
  }
  if (pairs > 0) acc /= pairs;
  return g.op(Tensor<T>({1}, std::vector<T>{acc}), {scores}, [scores, in, out, margin, pairs](Graph<T>& g, Var self) {
    if (pairs == 0) return;
    const T s = g.grad(self)[0] / pairs;
    const Tensor<T>& sv = g.value(scores);
    Tensor<T>& gs = g.grad(scores);
    for (int i : in) {
      for (int j : out) {
        if (margin - (sv[static_cast<std::size_t>(i)] - sv[static_cast<std::size_t>(j)]) > T(0)) {
          gs[static_cast<std::size_t>(i)] -= s;
          gs[static_cast<std::size_t>(j)] += s;
        }
      }
    }
  });
}

#define SEGLOC_INSTANTIATE_OPS(T)                                                                                  \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                                                \
  template Var gather_rows<T>(Graph<T>&, Var, const Index&, int);                                                  \
  template Var gather_rows_const<T>(Graph<T>&, const float*, int, const Index&, int);                              \
  template Var add<T>(Graph<T>&, Var, Var);                                                                        \
  template Var add_const<T>(Graph<T>&, Var, const Tensor<T>&);                                                     \
  template Var scale<T>(Graph<T>&, Var, T);                                                                        \
  template Var mask_rows<T>(Graph<T>&, Var, const std::vector<std::uint8_t>&);                                     \
  template Var relu<T>(Graph<T>&, Var);                                                                            \
  template Var gelu<T>(Graph<T>&, Var);                                                                            \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, T);                                                         \
  template Var attention<T>(Graph<T>&, Var, Var, Var, const std::vector<std::uint8_t>&, int);                      \
  template Var group_mean<T>(Graph<T>&, Var, int);                                                                 \
  template Var concat_rows<T>(Graph<T>&, const std::vector<Var>&);                                                 \
  template Var slice_rows<T>(Graph<T>&, Var, int, int);                                                            \
  template Var slice_cols<T>(Graph<T>&, Var, int, int);                                                            \
  template Var reshape<T>(Graph<T>&, Var, std::vector<int>);                                                       \
  template Var dot_const<T>(Graph<T>&, Var, const Tensor<T>&);                                                     \
  template Var weighted_sum<T>(Graph<T>&, const std::vector<Var>&, const std::vector<T>&);                         \
  template Var focal_loss<T>(Graph<T>&, Var, const std::vector<T>&, const std::vector<T>&, T, T, T);               \
  template Var iou_loss<T>(Graph<T>&, Var, const std::vector<T>&, const std::vector<std::uint8_t>&, T);            \
  template Var margin_ranking_loss<T>(Graph<T>&, Var, const std::vector<std::int8_t>&, T);

SEGLOC_INSTANTIATE_OPS(float)
SEGLOC_INSTANTIATE_OPS(double)

}  // namespace segloc::ag
