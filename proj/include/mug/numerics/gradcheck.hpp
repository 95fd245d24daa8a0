#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mug/numerics/rng.hpp"
#include "mug/numerics/tape.hpp"

namespace mug {

struct NamedMat {
  std::string name;
  Mat value;
};

struct ParamCheck {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_err);
    return m;
  }
  bool passed() const { return max_rel_err() <= tolerance; }
};

// Builds a scalar expression on `tape` from parameter leaves given in order.
using ExprBuilder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries whose
// true gradient is ~0 from turning roundoff into huge relative errors.
inline constexpr double kGradCheckFloor = 1e-4;

inline double rel_err(double analytic, double numeric, double floor = kGradCheckFloor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double eval_expr(const std::vector<NamedMat>& params, const ExprBuilder& build) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.parameter(p.value));
  return build(tape, leaves).value().data.at(0);
}

// Compares analytic gradients from the tape against central differences.
inline GradCheckReport grad_check(std::vector<NamedMat> params, const ExprBuilder& build, double tolerance, double step = 1e-5) {
  std::vector<Mat> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.parameter(p.value));
    ad::Var root = build(tape, leaves);
    tape.backward(root);
    for (const auto& l : leaves) analytic.push_back(l.grad());
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    ParamCheck pc{params[p].name, 0.0, 0.0};
    for (std::size_t i = 0; i < params[p].value.size(); ++i) {
      const double orig = params[p].value.data[i];
      params[p].value.data[i] = orig + step;
      const double up = eval_expr(params, build);
      params[p].value.data[i] = orig - step;
      const double down = eval_expr(params, build);
      params[p].value.data[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data[i];
      pc.max_rel_err = std::max(pc.max_rel_err, rel_err(a, numeric));
      pc.max_abs_analytic = std::max(pc.max_abs_analytic, std::abs(a));
    }
    report.params.push_back(std::move(pc));
  }
  return report;
}

inline Mat random_mat(std::size_t r, std::size_t c, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace mug
