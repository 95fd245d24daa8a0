#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mug/error.hpp"
#include "mug/numerics/init.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/numerics/tape.hpp"

namespace mug {

// Semantic attention; shapes depend only on k, never on the number of views.
struct Attention {
  Mat q;  // 1 x k
  Mat W;  // k x k
  Mat b;  // 1 x k

  static Attention init(std::size_t k, RngStream& rng) { return Attention{glorot(1, k, rng), glorot(k, k, rng), Mat(1, k)}; }

  std::size_t k() const { return W.rows; }

  void check() const {
    const std::size_t n = W.rows;
    if (W.cols != n || q.rows != 1 || q.cols != n || b.rows != 1 || b.cols != n)
      throw DimensionError("attention: q " + shape_str(q) + ", W " + shape_str(W) + ", b " + shape_str(b) + " inconsistent");
  }
};

// c = mean over nodes of q . tanh(z W + b)
inline double attention_logit(const Attention& att, const Mat& z) {
  att.check();
  if (z.cols != att.k() || z.rows == 0) throw DimensionError("attention: view " + shape_str(z) + " vs k=" + std::to_string(att.k()));
  Mat h = kernels::matmul(z, att.W);
  double c = 0.0;
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) c += att.q(0, j) * std::tanh(h(i, j) + att.b(0, j));
  return c / double(z.rows);
}

inline std::vector<double> softmax(std::vector<double> logits) {
  if (logits.empty()) throw DimensionError("softmax: no logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double& v : logits) s += (v = std::exp(v - m));
  for (double& v : logits) v /= s;
  return logits;
}

inline std::vector<double> attention_weights(const Attention& att, const std::vector<Mat>& views) {
  if (views.empty()) throw DimensionError("attention: no views");
  std::vector<double> c;
  for (const Mat& z : views) c.push_back(attention_logit(att, z));
  return softmax(std::move(c));
}

inline Mat fuse(const std::vector<double>& beta, const std::vector<Mat>& views) {
  if (views.empty() || beta.size() != views.size()) throw DimensionError("fuse: " + std::to_string(beta.size()) + " weights for " + std::to_string(views.size()) + " views");
  Mat z(views[0].rows, views[0].cols);
  for (std::size_t l = 0; l < views.size(); ++l) {
    require_same_shape(z, views[l], "fuse");
    kernels::axpy(beta[l], views[l], z);
  }
  return z;
}

// -(1/n) sum_v ||z_v - zbar||^2
inline double scatter_loss(const Mat& z) {
  if (z.rows == 0) throw DimensionError("scatter_loss: no rows");
  double total = 0.0;
  for (std::size_t j = 0; j < z.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) m += z(i, j);
    m /= double(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) total += (z(i, j) - m) * (z(i, j) - m);
  }
  return -total / double(z.rows);
}

struct LossParts {
  double align = 0.0;
  std::vector<double> beta, recon;
  double scatter = 0.0;

  double recon_weighted() const {
    if (beta.size() != recon.size()) throw DimensionError("loss parts: beta/recon length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * recon[i];
    return s;
  }
};

struct LossWeights {
  double align = 1.0, recon = 1.0, scatter = 0.1;
};

inline double total_loss(const LossParts& p, const LossWeights& w) {
  return w.align * p.align + w.recon * p.recon_weighted() + w.scatter * p.scatter;
}

namespace fusion {

inline ad::Var logit_expr(ad::Var z, ad::Var q, ad::Var W, ad::Var b) {
  return ad::mean(ad::matmul(ad::tanh(ad::add(ad::matmul(z, W), b)), ad::transpose(q)));
}

// 1 x L attention weights.
inline ad::Var beta_expr(const std::vector<ad::Var>& views, ad::Var q, ad::Var W, ad::Var b) {
  std::vector<ad::Var> logits;
  for (const auto& z : views) logits.push_back(logit_expr(z, q, W, b));
  return ad::softmax(ad::concat_cols(logits));
}

inline ad::Var fuse_expr(ad::Var beta, const std::vector<ad::Var>& views) {
  ad::Var z = ad::mul(views[0], ad::element(beta, 0, 0));
  for (std::size_t l = 1; l < views.size(); ++l) z = ad::add(z, ad::mul(views[l], ad::element(beta, 0, l)));
  return z;
}

inline ad::Var scatter_expr(ad::Var z) {
  ad::Var centered = ad::sub(z, ad::col_mean(z));
  return ad::scale(ad::sum(ad::mul(centered, centered)), -1.0 / double(z.rows()));
}

// lambda_align * align + lambda_recon * sum beta_l recon_l + lambda_scatter * scatter
inline ad::Var total_expr(ad::Var align, ad::Var beta, const std::vector<ad::Var>& recon, ad::Var scatter, const LossWeights& w) {
  ad::Var weighted = ad::sum(ad::mul(beta, ad::concat_cols(recon)));
  return ad::add(ad::add(ad::scale(align, w.align), ad::scale(weighted, w.recon)), ad::scale(scatter, w.scatter));
}

}  // namespace fusion

}  // namespace mug
