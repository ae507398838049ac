// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "segloc/autograd.hpp"

namespace segloc::ag {

using Index = std::shared_ptr<const std::vector<int>>;

// Row-major [rows, cols] semantics throughout; `cols` is the last dimension.

/// x[N,in] * w[in,out] + b[out]; `b` may be an invalid Var.
template <class T>
Var linear(Graph<T>& g, Var x, Var w, Var b);

/// out row r = concat over j < taps of x.row(idx[r*taps + j]) (zeros for -1).
/// Used for im2col, patchify and embedding lookup.
template <class T>
Var gather_rows(Graph<T>& g, Var x, const Index& idx, int taps);

/// Same gather over a float32 buffer laid out as rows of `cols`. No gradient.
template <class T>
Var gather_rows_const(Graph<T>& g, const float* src, int cols, const Index& idx, int taps);

template <class T>
Var add(Graph<T>& g, Var a, Var b);

/// a + c where c is a constant of a's shape.
template <class T>
Var add_const(Graph<T>& g, Var a, const Tensor<T>& c);

template <class T>
Var scale(Graph<T>& g, Var a, T s);

/// Zeroes rows whose mask entry is 0.
template <class T>
Var mask_rows(Graph<T>& g, Var x, const std::vector<std::uint8_t>& mask);

template <class T>
Var relu(Graph<T>& g, Var x);

/// tanh-approximated GELU.
template <class T>
Var gelu(Graph<T>& g, Var x);

template <class T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps = T(1e-5));

/// Multi-head scaled dot-product attention over already projected q/k/v.
/// `key_mask` (empty means all valid) excludes keys; a query row with no
/// valid key yields zeros.
template <class T>
Var attention(Graph<T>& g, Var q, Var k, Var v, const std::vector<std::uint8_t>& key_mask, int heads);

/// Mean over consecutive groups of `group` rows.
template <class T>
Var group_mean(Graph<T>& g, Var x, int group);

template <class T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& xs);

template <class T>
Var slice_rows(Graph<T>& g, Var x, int begin, int end);

template <class T>
Var slice_cols(Graph<T>& g, Var x, int begin, int end);

template <class T>
Var reshape(Graph<T>& g, Var x, std::vector<int> shape);

/// sum_i x_i * c_i.
template <class T>
Var dot_const(Graph<T>& g, Var x, const Tensor<T>& c);

/// sum_i w_i * s_i over scalar nodes; invalid Vars are skipped.
template <class T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& scalars, const std::vector<T>& weights);

/// Sigmoid focal loss summed over entries with weight != 0, divided by
/// `normalizer`. `targets` are 0/1.
template <class T>
Var focal_loss(Graph<T>& g, Var logits, const std::vector<T>& targets, const std::vector<T>& weights, T alpha,
               T gamma, T normalizer);

/// sum over rows with pos != 0 of (1 - IoU) between the intervals
/// [-ds, de] and [-ts, te] (columns of offsets/targets), divided by
/// `normalizer`.
template <class T>
Var iou_loss(Graph<T>& g, Var offsets, const std::vector<T>& targets, const std::vector<std::uint8_t>& pos,
             T normalizer);

/// Mean over (inside, outside) pairs of max(0, margin - (s_in - s_out)).
/// `label`: 1 inside, 0 outside, anything else ignored.
template <class T>
Var margin_ranking_loss(Graph<T>& g, Var scores, const std::vector<std::int8_t>& label, T margin);

}  // namespace segloc::ag
