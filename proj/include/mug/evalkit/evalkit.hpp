#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mug/config.hpp"
#include "mug/error.hpp"
#include "mug/fusion/model.hpp"
#include "mug/fusion/pretrain.hpp"
#include "mug/hetgraph/graph.hpp"
#include "mug/io.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/numerics/rng.hpp"

namespace mug {

enum class SplitMode { Standard, KShot };

struct SplitSpec {
  SplitMode mode = SplitMode::Standard;
  std::size_t per_class = 60;
  std::size_t val_size = 1000;
  std::size_t test_size = 1000;
  std::size_t repeats = 50;
  std::uint64_t seed = 0;

  static SplitSpec standard() { return SplitSpec{}; }
  static SplitSpec k_shot(std::size_t k) { return SplitSpec{SplitMode::KShot, k, 1000, 1000, 20, 0}; }

  std::size_t shots() const { return mode == SplitMode::KShot ? per_class : 0; }

  std::vector<ConfigField> fields() {
    using namespace cfgbind;
    return {size("train_per_class", per_class), size("val_size", val_size), size("test_size", test_size), size("repeats", repeats), u64("split_seed", seed)};
  }

  void validate() const {
    if (per_class == 0) throw SpecError("train_per_class must be >= 1");
    if (val_size == 0 || test_size == 0) throw SpecError("val_size and test_size must be >= 1");
    if (repeats < 2) throw SpecError("repeats must be >= 2 (a standard deviation needs two runs)");
  }
};

struct Split {
  std::vector<std::size_t> train, val, test;  // ascending target-node indices
};

inline void check_disjoint(const Split& s) {
  std::vector<std::size_t> all;
  all.insert(all.end(), s.train.begin(), s.train.end());
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw ContractError("split: train/val/test overlap");
}

inline std::size_t class_count(const std::vector<int>& labels) {
  int c = -1;
  for (int l : labels) {
    if (l < 0) throw DomainError("labels must be non-negative");
    c = std::max(c, l);
  }
  return std::size_t(c + 1);
}

// Stratified train draw, then disjoint uniform validation and test draws
// from the remainder. Unachievable sizes shrink with a warning.
inline Split make_split(const std::vector<int>& labels, std::size_t num_classes, const SplitSpec& spec, RngStream rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || std::size_t(labels[i]) >= num_classes) throw DomainError("label " + std::to_string(labels[i]) + " outside 0.." + std::to_string(num_classes - 1));
    by_class[std::size_t(labels[i])].push_back(i);
  }
  std::size_t min_count = labels.size();
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class[c].empty()) throw DomainError("class " + std::to_string(c) + " has no labeled nodes");
    min_count = std::min(min_count, by_class[c].size());
  }
  std::size_t per = spec.per_class;
  if (per >= min_count) {
    per = std::max<std::size_t>(1, min_count / 2);
    warn("split: " + std::to_string(spec.per_class) + " training nodes per class not achievable (smallest class has " + std::to_string(min_count) + "); using " + std::to_string(per));
  }
  Split s;
  std::vector<std::size_t> rest;
  for (auto& members : by_class) {
    rng.shuffle(members);
    s.train.insert(s.train.end(), members.begin(), members.begin() + std::ptrdiff_t(per));
    rest.insert(rest.end(), members.begin() + std::ptrdiff_t(per), members.end());
  }
  std::sort(rest.begin(), rest.end());
  rng.shuffle(rest);
  std::size_t nv = spec.val_size, nt = spec.test_size;
  if (rest.size() < 2) throw DomainError("split: fewer than two nodes left for validation and test");
  if (nv + nt > rest.size()) {
    nv = std::clamp<std::size_t>(rest.size() * spec.val_size / (spec.val_size + spec.test_size), 1, rest.size() - 1);
    nt = rest.size() - nv;
    warn("split: only " + std::to_string(rest.size()) + " nodes left for validation/test; using " + std::to_string(nv) + "/" + std::to_string(nt));
  }
  s.val.assign(rest.begin(), rest.begin() + std::ptrdiff_t(nv));
  s.test.assign(rest.begin() + std::ptrdiff_t(nv), rest.begin() + std::ptrdiff_t(nv + nt));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  check_disjoint(s);
  return s;
}

inline std::vector<Split> make_splits(const std::vector<int>& labels, std::size_t num_classes, const SplitSpec& spec) {
  spec.validate();
  std::vector<Split> out;
  const RngStream root(spec.seed, 0);
  out.push_back(make_split(labels, num_classes, spec, root.split(0)));
  // Shrink warnings depend only on class counts; report them once.
  std::ostringstream sink;
  std::ostream* saved = std::exchange(warning_stream(), &sink);
  try {
    for (std::size_t r = 1; r < spec.repeats; ++r) out.push_back(make_split(labels, num_classes, spec, root.split(r)));
  } catch (...) {
    warning_stream() = saved;
    throw;
  }
  warning_stream() = saved;
  return out;
}

struct F1 {
  double macro = 0.0, micro = 0.0;
};

// Micro = global-count F1 (accuracy for single-label data); macro = mean of
// per-class F1 over all num_classes classes, 0 for a class with no support
// and no predictions.
inline F1 f1_scores(const std::vector<int>& pred, const std::vector<int>& truth, std::size_t num_classes) {
  if (pred.empty() || pred.size() != truth.size()) throw DimensionError("f1: " + std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
  std::vector<double> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0 || std::size_t(pred[i]) >= num_classes || std::size_t(truth[i]) >= num_classes) throw DomainError("f1: label outside 0.." + std::to_string(num_classes - 1));
    if (pred[i] == truth[i]) {
      tp[std::size_t(pred[i])] += 1;
    } else {
      fp[std::size_t(pred[i])] += 1;
      fn[std::size_t(truth[i])] += 1;
    }
  }
  F1 f;
  double stp = 0, sfp = 0, sfn = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    f.macro += denom > 0 ? 2 * tp[c] / denom : 0.0;
    stp += tp[c];
    sfp += fp[c];
    sfn += fn[c];
  }
  f.macro /= double(num_classes);
  f.micro = 2 * stp / (2 * stp + sfp + sfn);
  return f;
}

struct ProbeConfig {
  double l2 = 1e-4;
  std::size_t steps = 500;
  double learning_rate = 0.5;
  double decay = 0.01;  // lr_t = lr / (1 + decay * t)
};

struct ProbeResult {
  std::vector<int> test_pred;
  double best_val_macro = 0.0;
  std::size_t best_step = 0;
};

// Column standardisation from all rows; no labels involved.
inline Mat standardize(const Mat& z) {
  Mat out = z;
  for (std::size_t j = 0; j < z.cols; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) m += z(i, j);
    m /= double(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) v += (z(i, j) - m) * (z(i, j) - m);
    const double sd = std::sqrt(v / double(z.rows));
    for (std::size_t i = 0; i < z.rows; ++i) out(i, j) = sd > 1e-12 ? (z(i, j) - m) / sd : 0.0;
  }
  return out;
}

namespace probe {

inline std::vector<int> predict(const Mat& x, const std::vector<std::size_t>& rows, const Mat& W, const Mat& b) {
  const Mat logits = kernels::matmul(kernels::select_rows(x, rows), W);
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < W.cols; ++c)
      if (logits(i, c) + b(0, c) > logits(i, best) + b(0, best)) best = c;
    out[i] = int(best);
  }
  return out;
}

inline std::vector<int> gather(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

}  // namespace probe

// L2-regularised multinomial logistic regression on frozen embeddings,
// full-batch gradient descent; parameters from the step with the best
// validation Macro-F1 produce the test predictions.
inline ProbeResult linear_probe(const Mat& z, const std::vector<int>& labels, std::size_t num_classes, const Split& split, const ProbeConfig& cfg = {}) {
  if (labels.size() != z.rows) throw DimensionError("probe: " + std::to_string(labels.size()) + " labels for " + std::to_string(z.rows) + " rows");
  std::vector<std::size_t> train = split.train;
  std::sort(train.begin(), train.end());
  if (train.empty()) throw DomainError("probe: empty training set");
  {
    const int first = labels[train[0]];
    if (std::all_of(train.begin(), train.end(), [&](std::size_t r) { return labels[r] == first; })) throw DomainError("probe: training set has a single class");
  }
  const Mat x = standardize(z);
  const Mat xt = kernels::select_rows(x, train);
  const std::size_t n = train.size(), d = x.cols, C = num_classes;
  Mat W(d, C), b(1, C);
  Mat bestW = W, bestB = b;
  ProbeResult res;
  res.best_val_macro = -1.0;
  const std::vector<int> val_truth = probe::gather(labels, split.val);

  auto consider = [&](std::size_t step) {
    if (split.val.empty()) return;
    const double m = f1_scores(probe::predict(x, split.val, W, b), val_truth, C).macro;
    if (m > res.best_val_macro) {
      res.best_val_macro = m;
      res.best_step = step;
      bestW = W;
      bestB = b;
    }
  };

  Mat grad_logits(n, C);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    consider(step);
    const Mat logits = kernels::matmul(xt, W);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -INFINITY;
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, logits(i, c) + b(0, c));
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += (grad_logits(i, c) = std::exp(logits(i, c) + b(0, c) - mx));
      for (std::size_t c = 0; c < C; ++c) grad_logits(i, c) = (grad_logits(i, c) / s - (labels[train[i]] == int(c) ? 1.0 : 0.0)) / double(n);
    }
    Mat gW = kernels::matmul_tn(xt, grad_logits);
    const double lr = cfg.learning_rate / (1.0 + cfg.decay * double(step));
    for (std::size_t i = 0; i < W.size(); ++i) W.data[i] -= lr * (gW.data[i] + cfg.l2 * W.data[i]);
    for (std::size_t c = 0; c < C; ++c) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) g += grad_logits(i, c);
      b(0, c) -= lr * g;
    }
  }
  consider(cfg.steps);
  if (split.val.empty()) {
    bestW = W;
    bestB = b;
  }
  res.test_pred = probe::predict(x, split.test, bestW, bestB);
  return res;
}

struct EvalReport {
  std::string variant = "full";
  std::string train_bundle, eval_bundle;
  std::size_t shots = 0;  // 0 = standard protocol
  std::vector<double> macro, micro;

  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
  }
  // Sample standard deviation.
  static double stdev(const std::vector<double>& v) {
    if (v.size() < 2) throw ContractError("std needs at least two repeats");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
  }
  double macro_mean() const { return mean(macro); }
  double macro_std() const { return stdev(macro); }
  double micro_mean() const { return mean(micro); }
  double micro_std() const { return stdev(micro); }
};

inline EvalReport evaluate_embedding(const Mat& z, const std::vector<int>& labels, std::size_t num_classes, const SplitSpec& spec, const ProbeConfig& probe_cfg = {}) {
  EvalReport r;
  r.shots = spec.shots();
  const Mat frozen = z;
  for (const Split& s : make_splits(labels, num_classes, spec)) {
    check_disjoint(s);
    const ProbeResult p = linear_probe(z, labels, num_classes, s, probe_cfg);
    const F1 f = f1_scores(p.test_pred, probe::gather(labels, s.test), num_classes);
    r.macro.push_back(f.macro);
    r.micro.push_back(f.micro);
  }
  if (!(frozen == z)) throw ContractError("probe modified the embedding");
  return r;
}

struct NamedGraph {
  std::string name;
  const HetGraph* graph = nullptr;
};

// One report per labeled evaluation graph; the model is only read.
inline std::vector<EvalReport> cross_domain_eval(const MugModel& model, const std::string& train_name, const std::vector<NamedGraph>& targets, const SplitSpec& spec,
                                                 std::optional<std::uint64_t> embed_seed = std::nullopt, unsigned threads = 1, const ProbeConfig& probe_cfg = {}) {
  const std::uint64_t hash = model_hash(model);
  std::vector<EvalReport> out;
  for (const auto& t : targets) {
    if (!t.graph->labels) {
      warn("skipping '" + t.name + "': no labels");
      continue;
    }
    const Embedding e = embed(model, *t.graph, embed_seed, threads);
    EvalReport r = evaluate_embedding(e.z, *t.graph->labels, t.graph->num_classes(), spec, probe_cfg);
    r.train_bundle = train_name;
    r.eval_bundle = t.name;
    out.push_back(std::move(r));
    if (model_hash(model) != hash) throw ContractError("model parameters changed during evaluation");
  }
  return out;
}

inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"full", "no-cse", "no-align", "no-scatter"};
  return v;
}

inline TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
  if (variant == "no-cse") cfg.no_cse = true;
  else if (variant == "no-align") cfg.no_align = true;
  else if (variant == "no-scatter") cfg.no_scatter = true;
  else if (variant != "full") throw SpecError("unknown ablation variant '" + variant + "'");
  return cfg;
}

// Pre-train once per variant with otherwise identical settings and seeds,
// then evaluate every target.
inline std::vector<EvalReport> ablation_run(const NamedGraph& train, const std::vector<NamedGraph>& targets, const TrainConfig& base, const SplitSpec& spec,
                                            const std::vector<std::string>& variants = ablation_variants(), unsigned threads = 1, const ProbeConfig& probe_cfg = {}) {
  std::vector<EvalReport> out;
  for (const auto& v : variants) {
    const MugModel m = pretrain(*train.graph, apply_variant(base, v), threads).model;
    for (EvalReport& r : cross_domain_eval(m, train.name, targets, spec, std::nullopt, threads, probe_cfg)) {
      r.variant = v;
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::string report_csv(const std::vector<EvalReport>& reports) {
  std::string out = "variant,train_bundle,eval_bundle,shots,macro_mean,macro_std,micro_mean,micro_std\n";
  for (const auto& r : reports)
    out += r.variant + "," + r.train_bundle + "," + r.eval_bundle + "," + std::to_string(r.shots) + "," + format_double(r.macro_mean()) + "," + format_double(r.macro_std()) + "," +
           format_double(r.micro_mean()) + "," + format_double(r.micro_std()) + "\n";
  return out;
}

inline std::string report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "variant" << std::setw(16) << "train" << std::setw(16) << "eval" << std::setw(7) << "shots" << std::setw(20) << "Macro-F1" << "Micro-F1\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    std::ostringstream ma, mi;
    ma << std::fixed << std::setprecision(2) << 100 * r.macro_mean() << " +- " << 100 * r.macro_std();
    mi << std::fixed << std::setprecision(2) << 100 * r.micro_mean() << " +- " << 100 * r.micro_std();
    os << std::setw(12) << r.variant << std::setw(16) << r.train_bundle << std::setw(16) << r.eval_bundle << std::setw(7) << (r.shots ? std::to_string(r.shots) : "std") << std::setw(20) << ma.str()
       << mi.str() << "\n";
  }
  return os.str();
}

}  // namespace mug
