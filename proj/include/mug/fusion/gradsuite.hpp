#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mug/fusion/pretrain.hpp"
#include "mug/numerics/gradcheck.hpp"
#include "mug/structenc/sgns.hpp"

namespace mug {

struct GradSuiteOptions {
  std::size_t instances = 20;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  bool inject_fault = false;  // corrupts one analytic gradient; the suite must fail
};

struct SuiteCheck {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  bool passed() const { return failures == 0; }
};

struct GradSuiteReport {
  std::vector<SuiteCheck> checks;
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.passed() ? 0 : 1;
    return n;
  }
};

namespace gradsuite {

// Identity in value, gradient scaled by 1.5 on the way back.
inline ad::Var faulty(ad::Var a) {
  return a.tape->record("faulty", a.value(), {a}, [a](ad::Tape& t, const Mat& g) {
    if (!t.requires_grad(a.id)) return;
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += 1.5 * g.data[i];
  });
}

// Random symmetric view with at least one edge.
inline Mat random_view(std::size_t n, RngStream& rng) {
  Mat a(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.4)) a(u, v) = a(v, u) = 1.0;
  if (std::all_of(a.data.begin(), a.data.end(), [](double x) { return x == 0.0; })) a(0, 1) = a(1, 0) = 1.0;
  return a;
}

inline MpAdj to_adj(const Mat& a) {
  MpAdj m;
  m.n = a.rows;
  m.symmetric = true;
  m.rows.resize(a.rows);
  for (std::size_t u = 0; u < a.rows; ++u)
    for (std::size_t v = 0; v < a.cols; ++v)
      if (a(u, v) != 0.0) m.rows[u].push_back(std::uint32_t(v));
  return m;
}

struct Instance {
  std::vector<NamedMat> params;
  ExprBuilder build;
};

}  // namespace gradsuite

// Finite-difference verification of every loss the training objective is
// built from, each on `instances` random toy problems (<= 8 nodes, 2 views).
inline GradSuiteReport run_grad_suite(const GradSuiteOptions& opt = {}) {
  using gradsuite::Instance;
  const RngStream root(opt.seed, 0);
  auto wrap = [&](ad::Var v) { return opt.inject_fault ? gradsuite::faulty(v) : v; };

  struct Spec {
    std::string name;
    std::function<Instance(RngStream&)> make;
  };
  std::vector<Spec> specs;

  specs.push_back({"struct_sgns", [&](RngStream& rng) {
                     const std::size_t n = 4 + rng.index(5), d = 3;
                     std::vector<std::vector<std::size_t>> groups(3);
                     for (auto& g : groups)
                       for (int i = 0; i < 4; ++i) g.push_back(rng.index(n));
                     return Instance{{{"center", random_mat(n, d, rng)}, {"context", random_mat(n, d, rng)}},
                                     [groups](ad::Tape&, const std::vector<ad::Var>& p) { return sgns::loss_expr(p[0], p[1], groups); }};
                   }});

  specs.push_back({"align", [&](RngStream& rng) {
                     const std::size_t d = 3 + rng.index(4), ns = 3, k = 3;
                     const Mat xs = random_mat(d, ns, rng);
                     return Instance{{{"W", random_mat(ns, k, rng)}, {"b", random_mat(1, k, rng)}},
                                     [xs](ad::Tape& t, const std::vector<ad::Var>& p) { return dimalign::align_expr(dimalign::basis_expr(t.constant(xs), p[0], p[1])); }};
                   }});

  specs.push_back({"recon", [&](RngStream& rng) {
                     const std::size_t n = 4 + rng.index(5), d = 3, k = 3;
                     const Mat a = gradsuite::random_view(n, rng);
                     const Mat prop = propagation_matrix(mask_edges(gradsuite::to_adj(a), MaskSpec{}, rng.split(1)).adj);
                     return Instance{{{"X", random_mat(n, d, rng)}, {"enc_w", random_mat(d, k, rng)}, {"enc_b", random_mat(1, k, rng)}, {"dec_w", random_mat(k, k, rng)}, {"dec_b", random_mat(1, k, rng)}},
                                     [a, prop](ad::Tape&, const std::vector<ad::Var>& p) { return metamae::view_expr(a, prop, p[0], p[1], p[2], p[3], p[4], 2.0).loss; }};
                   }});

  specs.push_back({"scatter", [&](RngStream& rng) {
                     const std::size_t n = 4 + rng.index(5), k = 3;
                     return Instance{{{"Z1", random_mat(n, k, rng)}, {"Z2", random_mat(n, k, rng)}, {"q", random_mat(1, k, rng)}, {"W", random_mat(k, k, rng)}, {"b", random_mat(1, k, rng)}},
                                     [wrap](ad::Tape&, const std::vector<ad::Var>& p) {
                                       const std::vector<ad::Var> views{p[0], p[1]};
                                       return wrap(fusion::scatter_expr(fusion::fuse_expr(fusion::beta_expr(views, p[2], p[3], p[4]), views)));
                                     }};
                   }});

  specs.push_back({"total", [&](RngStream& rng) {
                     const std::size_t n = 4 + rng.index(5), d = 4, ns = 3, k = 3;
                     const Mat x = random_mat(n, d, rng);
                     const Mat xs = kernels::transpose(kernels::select_rows(x, {0, 1, 2}));
                     std::vector<Mat> adj, props;
                     for (int v = 0; v < 2; ++v) {
                       adj.push_back(gradsuite::random_view(n, rng));
                       props.push_back(propagation_matrix(mask_edges(gradsuite::to_adj(adj.back()), MaskSpec{}, rng.split(v)).adj));
                     }
                     std::vector<NamedMat> params{{"align_W", random_mat(ns, k, rng)}, {"align_b", random_mat(1, k, rng)}, {"enc_w", random_mat(k, k, rng)},
                                                  {"enc_b", random_mat(1, k, rng)}, {"dec_w", random_mat(k, k, rng)}, {"dec_b", random_mat(1, k, rng)},
                                                  {"att_q", random_mat(1, k, rng)}, {"att_W", random_mat(k, k, rng)}, {"att_b", random_mat(1, k, rng)}};
                     return Instance{params, [x, xs, adj, props](ad::Tape& t, const std::vector<ad::Var>& p) {
                                       ModelVars mv;
                                       mv.align_w = p[0];
                                       mv.align_b = p[1];
                                       mv.enc_w = p[2];
                                       mv.enc_b = p[3];
                                       mv.dec_w = p[4];
                                       mv.dec_b = p[5];
                                       mv.att_q = p[6];
                                       mv.att_w = p[7];
                                       mv.att_b = p[8];
                                       return mug_loss_expr(t, xs, x, adj, props, mv, 2.0, LossWeights{}).total;
                                     }};
                   }});

  GradSuiteReport report;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    SuiteCheck c;
    c.name = specs[s].name;
    for (std::size_t i = 0; i < opt.instances; ++i) {
      RngStream rng = root.split(s).split(i);
      const Instance inst = specs[s].make(rng);
      const auto r = grad_check(inst.params, inst.build, opt.tolerance);
      c.max_rel_err = std::max(c.max_rel_err, r.max_rel_err());
      ++c.instances;
      if (!r.passed()) ++c.failures;
    }
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace mug
