#pragma once
// Differentiable operations on Graph variables. Defined for float and double.

#include <span>
#include <vector>

#include "hicmd/autograd.hpp"

namespace hicmd::ops {

template <class T>
Var<T> add(Var<T> a, Var<T> b);
template <class T>
Var<T> sub(Var<T> a, Var<T> b);
template <class T>
Var<T> scale(Var<T> a, T s);
// Scalar combination sum_i w_i * x_i over scalar variables.
template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& xs, const std::vector<T>& ws);

// x: (N, Ci, H, W), w: (Co, Ci, k, k), b: (Co) or invalid for no bias.
template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad);
// x: (N, D), w: (O, D), b: (O) or invalid.
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b);

template <class T>
Var<T> relu(Var<T> x);
template <class T>
Var<T> leaky_relu(Var<T> x, T slope);
template <class T>
Var<T> tanh(Var<T> x);
template <class T>
Var<T> sigmoid(Var<T> x);

// Per-sample, per-channel normalization over the spatial extent (no affine).
template <class T>
Var<T> instance_norm(Var<T> x, T eps);
// y = x * (1 + gamma[n, c]) + beta[n, c]; gamma, beta: (N, C).
template <class T>
Var<T> modulate(Var<T> x, Var<T> gamma, Var<T> beta);
template <class T>
Var<T> upsample2x(Var<T> x);
// (N, C, H, W) -> (N, C)
template <class T>
Var<T> global_avg_pool(Var<T> x);
// (N, ...) -> (N, D)
template <class T>
Var<T> flatten(Var<T> x);

// (N, D) column operations.
template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& xs);
template <class T>
Var<T> slice_cols(Var<T> x, int begin, int end);

// Leading-dimension operations for tensors of any rank.
template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& xs);
template <class T>
Var<T> gather_rows(Var<T> x, const std::vector<int>& rows);

// [alpha * a ; (1 - alpha) * b] row-wise; alpha is a scalar variable.
template <class T>
Var<T> weighted_concat(Var<T> a, Var<T> b, Var<T> alpha);

// Scalar reductions.
// mean_k |a_k - b_k|
template <class T>
Var<T> mean_abs_diff(Var<T> a, Var<T> b);
// mean over rows of 0.5 * ||x_row||^2
template <class T>
Var<T> half_sq_norm_mean(Var<T> x);
// mean log(clamp(x)) and mean log(1 - clamp(x)), clamp to [eps, 1 - eps].
template <class T>
Var<T> mean_log(Var<T> x, T eps);
template <class T>
Var<T> mean_log1m(Var<T> x, T eps);
// Mean softmax cross-entropy; labels are 0-based class indices.
template <class T>
Var<T> cross_entropy(Var<T> logits, const std::vector<int>& labels);
// Batch-hard triplet loss with Euclidean distance, averaged over anchors.
template <class T>
Var<T> triplet_batch_hard(Var<T> features, const std::vector<int>& labels, T margin);

template <class T>
Var<T> detach(Var<T> x);

}  // namespace hicmd::ops
