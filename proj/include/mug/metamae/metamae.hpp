#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mug/error.hpp"
#include "mug/hetgraph/metapath.hpp"
#include "mug/numerics/init.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/numerics/rng.hpp"
#include "mug/numerics/tape.hpp"

namespace mug {

struct MaskSpec {
  double rate = 0.5;      // fraction of edges removed
  bool resample = true;   // fresh mask every epoch

  void validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw SpecError("mask rate must lie in [0, 1]");
  }
};

struct MaskedAdj {
  MpAdj adj;
  std::size_t total = 0;    // edges considered (unordered pairs for symmetric views)
  std::size_t removed = 0;

  double removed_fraction() const { return total ? double(removed) / double(total) : 0.0; }
};

// Keeps each edge with probability 1 - rate. Symmetric views toss one coin
// per unordered pair so the result stays symmetric.
inline MaskedAdj mask_edges(const MpAdj& a, const MaskSpec& spec, RngStream rng) {
  spec.validate();
  MaskedAdj out;
  out.adj.metapath = a.metapath;
  out.adj.n = a.n;
  out.adj.symmetric = a.symmetric;
  out.adj.rows.resize(a.n);
  const double keep = 1.0 - spec.rate;
  for (std::size_t u = 0; u < a.n; ++u)
    for (std::uint32_t v : a.rows[u]) {
      if (a.symmetric && v < u) continue;
      ++out.total;
      if (rng.bernoulli(keep)) {
        out.adj.rows[u].push_back(v);
        if (a.symmetric) out.adj.rows[v].push_back(std::uint32_t(u));
      } else {
        ++out.removed;
      }
    }
  if (a.symmetric)
    for (auto& r : out.adj.rows) std::sort(r.begin(), r.end());
  return out;
}

// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I, dense.
inline Mat propagation_matrix(const MpAdj& a) {
  Mat p(a.n, a.n);
  std::vector<double> inv_sqrt(a.n);
  for (std::size_t u = 0; u < a.n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(double(a.rows[u].size() + 1));
  for (std::size_t u = 0; u < a.n; ++u) {
    p(u, u) = inv_sqrt[u] * inv_sqrt[u];
    for (std::uint32_t v : a.rows[u]) p(u, v) = inv_sqrt[u] * inv_sqrt[v];
  }
  return p;
}

enum class Activation { Identity, PRelu };

inline constexpr double kPReluSlope = 0.25;

inline const char* activation_name(Activation a) { return a == Activation::PRelu ? "prelu" : "identity"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "prelu") return Activation::PRelu;
  if (s == "identity") return Activation::Identity;
  throw SchemaError("unknown activation '" + s + "'");
}

// One symmetric-normalized graph convolution: act(P X W + b).
struct GnnLayer {
  Mat weight, bias;
  Activation activation = Activation::Identity;

  static GnnLayer init(std::size_t in, std::size_t out, Activation act, RngStream& rng) {
    return GnnLayer{glorot(in, out, rng), Mat(1, out), act};
  }

  std::size_t in_dim() const { return weight.rows; }
  std::size_t out_dim() const { return weight.cols; }

  void check() const {
    if (bias.rows != 1 || bias.cols != weight.cols) throw DimensionError("gnn layer: weight " + shape_str(weight) + " vs bias " + shape_str(bias));
  }
};

inline Mat gnn_forward(const GnnLayer& layer, const Mat& prop, const Mat& x) {
  layer.check();
  if (x.cols != layer.in_dim()) throw DimensionError("gnn layer: input " + shape_str(x) + " vs weight " + shape_str(layer.weight));
  if (prop.rows != x.rows || prop.cols != x.rows) throw DimensionError("gnn layer: propagation " + shape_str(prop) + " vs input " + shape_str(x));
  Mat h = kernels::matmul(prop, kernels::matmul(x, layer.weight));
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) {
      double v = h(i, j) + layer.bias(0, j);
      if (layer.activation == Activation::PRelu && v < 0.0) v *= kPReluSlope;
      h(i, j) = v;
    }
  return h;
}

inline Mat encode(const GnnLayer& layer, const MpAdj& masked, const Mat& x) { return gnn_forward(layer, propagation_matrix(masked), x); }

// sigmoid(Z Z^T)
inline Mat outer_sigmoid(const Mat& z) {
  Mat a = kernels::matmul_nt(z, z);
  for (double& v : a.data) v = ad::detail::stable_sigmoid(v);
  return a;
}

// Decoder pass over the same (masked) view, then sigmoid of the inner products.
inline Mat reconstruct(const GnnLayer& decoder, const MpAdj& masked, const Mat& z) { return outer_sigmoid(encode(decoder, masked, z)); }

// Target rows that carry at least one edge; the rest are left out of the loss.
inline std::vector<std::size_t> valid_rows(const Mat& a) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (a(i, j) != 0.0) {
        out.push_back(i);
        break;
      }
  return out;
}

inline void check_gamma(double gamma) {
  if (!(gamma >= 1.0)) throw SpecError("recon gamma must be >= 1");
}

// mean over valid rows of (1 - cos(A_v, Ahat_v))^gamma
inline double recon_loss(const Mat& a, const Mat& a_hat, double gamma) {
  check_gamma(gamma);
  require_same_shape(a, a_hat, "recon_loss");
  const auto rows = valid_rows(a);
  if (rows.empty()) throw DomainError("recon_loss: view has no edges");
  double total = 0.0;
  for (std::size_t i : rows) {
    const double* x = a.row_ptr(i);
    const double* y = a_hat.row_ptr(i);
    const double nx = std::sqrt(kernels::dot(x, x, a.cols)), ny = std::sqrt(kernels::dot(y, y, a.cols));
    const double c = ny > 0.0 ? std::clamp(kernels::dot(x, y, a.cols) / (nx * ny), -1.0, 1.0) : 0.0;
    total += std::pow(1.0 - c, gamma);
  }
  return total / double(rows.size());
}

namespace metamae {

inline ad::Var layer_expr(ad::Var prop, ad::Var x, ad::Var weight, ad::Var bias, Activation act) {
  ad::Var h = ad::add(ad::matmul(prop, ad::matmul(x, weight)), bias);
  return act == Activation::PRelu ? ad::prelu(h, kPReluSlope) : h;
}

inline ad::Var outer_sigmoid_expr(ad::Var z) { return ad::sigmoid(ad::matmul(z, ad::transpose(z))); }

inline ad::Var recon_expr(const Mat& a, ad::Var a_hat, double gamma) {
  check_gamma(gamma);
  require_same_shape(a, a_hat.value(), "recon_loss");
  const auto rows = valid_rows(a);
  if (rows.empty()) throw DomainError("recon_loss: view has no edges");
  ad::Tape& t = *a_hat.tape;
  ad::Var c = ad::row_cos(t.constant(kernels::select_rows(a, rows)), ad::select_rows(a_hat, rows));
  ad::Var one_minus = ad::add(ad::neg(c), t.constant(Mat::scalar(1.0)));
  return ad::mean(gamma == 1.0 ? one_minus : ad::pow(one_minus, gamma));
}

// Encoder -> decoder -> reconstruction -> loss for one view on the tape.
struct ViewExpr {
  ad::Var z;       // encoder output
  ad::Var z_hat;   // decoder output
  ad::Var loss;
};

inline ViewExpr view_expr(const Mat& a, const Mat& masked_prop, ad::Var x, ad::Var enc_w, ad::Var enc_b, ad::Var dec_w, ad::Var dec_b, double gamma) {
  ad::Tape& t = *x.tape;
  ad::Var p = t.constant(masked_prop);
  ViewExpr v;
  v.z = layer_expr(p, x, enc_w, enc_b, Activation::PRelu);
  v.z_hat = layer_expr(p, v.z, dec_w, dec_b, Activation::Identity);
  v.loss = recon_expr(a, outer_sigmoid_expr(v.z_hat), gamma);
  return v;
}

}  // namespace metamae

}  // namespace mug
