#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "mug/error.hpp"
#include "mug/numerics/init.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/numerics/rng.hpp"
#include "mug/numerics/tape.hpp"

namespace mug {

// Shared per-dimension basis network. Every attribute dimension i is encoded
// from its values on the node sample: s_i = x_i^T W + b, or with the optional
// hidden layer s_i = tanh(x_i^T W_h + b_h) W + b. Parameter shapes depend only
// on (sample_size, hidden, k).
struct DimEncoder {
  std::size_t sample_size = 128;
  std::size_t k = 64;
  std::size_t hidden = 0;  // 0 = single affine layer
  Mat W, b;
  Mat W_hidden, b_hidden;  // empty unless hidden > 0

  static DimEncoder init(std::size_t sample_size, std::size_t k, RngStream& rng, std::size_t hidden = 0) {
    if (sample_size == 0 || k == 0) throw SpecError("dimalign: sample size and k must be >= 1");
    DimEncoder e;
    e.sample_size = sample_size;
    e.k = k;
    e.hidden = hidden;
    if (hidden > 0) {
      e.W_hidden = glorot(sample_size, hidden, rng);
      e.b_hidden = Mat(1, hidden);
    }
    e.W = glorot(hidden > 0 ? hidden : sample_size, k, rng);
    e.b = Mat(1, k);
    return e;
  }

  void check() const {
    const std::size_t in = hidden > 0 ? hidden : sample_size;
    if (W.rows != in || W.cols != k || b.rows != 1 || b.cols != k) throw DimensionError("dimalign: W " + shape_str(W) + " / b " + shape_str(b) + " inconsistent with n_s=" + std::to_string(sample_size) + " k=" + std::to_string(k));
    if (hidden > 0 && (W_hidden.rows != sample_size || W_hidden.cols != hidden || b_hidden.rows != 1 || b_hidden.cols != hidden))
      throw DimensionError("dimalign: hidden layer shapes inconsistent");
  }
};

// n_s target-node indices; without replacement when the graph is large
// enough, with replacement otherwise. Order is part of the draw.
struct NodeSample {
  std::vector<std::size_t> indices;

  static NodeSample draw(std::size_t num_targets, std::size_t sample_size, RngStream rng) {
    if (num_targets == 0) throw DomainError("node sample: graph has no target nodes");
    NodeSample s;
    if (num_targets >= sample_size) {
      std::vector<std::size_t> pool(num_targets);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < sample_size; ++i) std::swap(pool[i], pool[i + rng.index(num_targets - i)]);
      s.indices.assign(pool.begin(), pool.begin() + std::ptrdiff_t(sample_size));
    } else {
      s.indices.resize(sample_size);
      for (auto& i : s.indices) i = rng.index(num_targets);
    }
    return s;
  }
};

// X~[sample]^T, the d x n_s input to the basis network.
inline Mat sample_columns(const Mat& x, const NodeSample& sample) {
  for (std::size_t i : sample.indices)
    if (i >= x.rows) throw DimensionError("node sample index " + std::to_string(i) + " outside " + shape_str(x));
  return kernels::transpose(kernels::select_rows(x, sample.indices));
}

namespace dimalign {

// Basis vectors S (d x k) on the tape from the sampled columns.
inline ad::Var basis_expr(ad::Var sampled_t, ad::Var W, ad::Var b) { return ad::add(ad::matmul(sampled_t, W), b); }

inline ad::Var basis_expr(ad::Var sampled_t, ad::Var W_hidden, ad::Var b_hidden, ad::Var W, ad::Var b) {
  return basis_expr(ad::tanh(ad::add(ad::matmul(sampled_t, W_hidden), b_hidden)), W, b);
}

// || mean_i s_i ||^2
inline ad::Var align_expr(ad::Var S) { return ad::sq_norm(ad::col_mean(S)); }

}  // namespace dimalign

inline Mat basis_vectors(const DimEncoder& enc, const NodeSample& sample, const Mat& x) {
  enc.check();
  if (sample.indices.size() != enc.sample_size) throw DimensionError("basis_vectors: sample has " + std::to_string(sample.indices.size()) + " nodes, encoder expects " + std::to_string(enc.sample_size));
  Mat h = sample_columns(x, sample);
  if (enc.hidden > 0) {
    h = kernels::matmul(h, enc.W_hidden);
    for (std::size_t i = 0; i < h.rows; ++i)
      for (std::size_t j = 0; j < h.cols; ++j) h(i, j) = std::tanh(h(i, j) + enc.b_hidden(0, j));
  }
  Mat s = kernels::matmul(h, enc.W);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) s(i, j) += enc.b(0, j);
  return s;
}

// X^unify = X~ S
inline Mat project(const Mat& S, const Mat& x) {
  if (S.rows != x.cols) throw DimensionError("project: basis " + shape_str(S) + " vs attributes " + shape_str(x));
  return kernels::matmul(x, S);
}

inline double align_loss(const Mat& S) {
  if (S.rows == 0) throw DimensionError("align_loss: no basis vectors");
  double total = 0.0;
  for (std::size_t j = 0; j < S.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < S.rows; ++i) m += S(i, j);
    m /= double(S.rows);
    total += m * m;
  }
  return total;
}

}  // namespace mug
