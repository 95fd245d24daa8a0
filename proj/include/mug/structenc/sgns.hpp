#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mug/error.hpp"
#include "mug/hetgraph/graph.hpp"
#include "mug/io.hpp"
#include "mug/numerics/mat.hpp"
#include "mug/numerics/rng.hpp"
#include "mug/numerics/tape.hpp"
#include "mug/structenc/walks.hpp"

namespace mug {

// Per-graph contextual structural embeddings, one row per node of any type
// (global id order). Read-only once frozen.
class StructTable {
 public:
  StructTable() = default;
  explicit StructTable(Mat embeddings) : emb_(std::move(embeddings)) {}

  const Mat& embeddings() const noexcept { return emb_; }
  std::size_t dim() const noexcept { return emb_.cols; }
  std::size_t size() const noexcept { return emb_.rows; }
  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  Mat& mutable_embeddings() {
    if (frozen_) throw ContractError("StructTable is frozen");
    return emb_;
  }

 private:
  Mat emb_;
  bool frozen_ = false;
};

namespace sgns {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

// -log s(z_v . c_u) - sum_n log(1 - s(z_v . c_n))
inline double pair_loss(std::span<const double> center, std::span<const double> context, const std::vector<std::span<const double>>& negatives) {
  const std::size_t d = center.size();
  double loss = -log_sigmoid(kernels::dot(center.data(), context.data(), d));
  for (const auto& n : negatives) loss -= log_sigmoid(-kernels::dot(center.data(), n.data(), d));
  return loss;
}

// One SGD step on a (center, positive, negatives) group, in place. `rows[0]`
// is the positive context, the rest are negatives. Returns the pre-update loss.
inline double update(double* center, const std::vector<double*>& rows, std::size_t d, double lr, std::vector<double>& scratch) {
  scratch.assign(d, 0.0);
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    double* ctx = rows[k];
    const double label = k == 0 ? 1.0 : 0.0;
    const double score = kernels::dot(center, ctx, d);
    loss -= k == 0 ? log_sigmoid(score) : log_sigmoid(-score);
    const double g = lr * (label - sigmoid(score));
    for (std::size_t j = 0; j < d; ++j) scratch[j] += g * ctx[j];
    for (std::size_t j = 0; j < d; ++j) ctx[j] += g * center[j];
  }
  for (std::size_t j = 0; j < d; ++j) center[j] += scratch[j];
  return loss;
}

// The same objective recorded on a tape for gradient checking: mean over
// (center, positive, negatives...) index groups.
inline ad::Var loss_expr(ad::Var center_table, ad::Var context_table, const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<ad::Var> terms;
  for (const auto& grp : groups) {
    ad::Var zv = ad::select_rows(center_table, {grp[0]});
    ad::Var pos = ad::sum(ad::mul(zv, ad::select_rows(context_table, {grp[1]})));
    ad::Var t = ad::neg(ad::log_sigmoid(pos));
    for (std::size_t k = 2; k < grp.size(); ++k) {
      ad::Var s = ad::sum(ad::mul(zv, ad::select_rows(context_table, {grp[k]})));
      t = ad::sub(t, ad::log_sigmoid(ad::neg(s)));
    }
    terms.push_back(t);
  }
  return ad::mean(ad::concat_cols(terms));
}

}  // namespace sgns

struct SgnsResult {
  StructTable table;                // center table, frozen
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

// Skip-gram with negative sampling over window pairs of the walks.
// Single-threaded and deterministic for a fixed rng.
inline SgnsResult train_sgns(const std::vector<Walk>& walks, std::size_t num_nodes, const WalkConfig& cfg, RngStream rng) {
  cfg.validate();
  if (walks.empty()) throw ContractError("train_sgns: empty walk list");
  const std::size_t d = cfg.dim;
  Mat center(num_nodes, d), context(num_nodes, d);
  for (double& v : center.data) v = (rng.uniform() - 0.5) / double(d);

  // Negative sampling table (cumulative weights); empty means uniform.
  std::vector<double> cdf;
  if (cfg.negative_power > 0.0) {
    std::vector<double> freq(num_nodes, 0.0);
    for (const Walk& w : walks)
      for (auto v : w) freq[v] += 1.0;
    cdf.resize(num_nodes);
    double acc = 0.0;
    for (std::size_t i = 0; i < num_nodes; ++i) cdf[i] = (acc += std::pow(freq[i], cfg.negative_power));
  }
  auto draw_negative = [&]() -> std::size_t {
    if (cdf.empty()) return rng.index(num_nodes);
    const double x = rng.uniform() * cdf.back();
    return std::size_t(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
  };

  std::size_t pairs_per_epoch = 0;
  for (const Walk& w : walks)
    for (std::size_t i = 0; i < w.size(); ++i) pairs_per_epoch += std::min(w.size() - 1, i + cfg.window) - (i >= cfg.window ? i - cfg.window : 0);
  const double total = double(pairs_per_epoch * cfg.epochs);

  SgnsResult out;
  std::vector<std::size_t> order(walks.size());
  std::vector<double*> rows(cfg.negatives + 1);
  std::vector<double> scratch;
  std::size_t seen = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double loss = 0.0;
    std::size_t count = 0;
    for (std::size_t wi : order) {
      const Walk& w = walks[wi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0, hi = std::min(w.size() - 1, i + cfg.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const double progress = total > 0 ? double(seen++) / total : 0.0;
          const double lr = cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * progress;
          rows[0] = context.row_ptr(w[j]);
          for (std::size_t k = 1; k <= cfg.negatives; ++k) {
            std::size_t neg = draw_negative();
            while (neg == w[j] && num_nodes > 1) neg = draw_negative();
            rows[k] = context.row_ptr(neg);
          }
          loss += sgns::update(center.row_ptr(w[i]), rows, d, lr, scratch);
          ++count;
        }
      }
    }
    out.epoch_loss.push_back(count ? loss / double(count) : 0.0);
  }
  if (!center.all_finite()) throw NumericalError("train_sgns: non-finite embedding");
  out.table = StructTable(std::move(center));
  out.table.freeze();
  return out;
}

// Walks over every meta-path, then SGNS on the pooled multiset.
inline SgnsResult build_struct_table(const HetGraph& g, const WalkConfig& cfg, const RngStream& rng, unsigned threads = 1) {
  cfg.validate();
  const auto walks = sample_all_walks(g, cfg, rng.split(1), threads);
  return train_sgns(walks, g.total_nodes(), cfg, rng.split(2));
}

// struct.tsv: header "node_id<TAB><dim>", then node_id and dim decimals.
inline void save_struct_tsv(const HetGraph& g, const StructTable& t, const std::filesystem::path& path) {
  std::string out = "node_id\t" + std::to_string(t.dim()) + "\n";
  for (std::size_t ty = 0; ty < g.node_types.size(); ++ty)
    for (std::size_t i = 0; i < g.type_size(ty); ++i) {
      out += g.node_ids[ty][i];
      const double* r = t.embeddings().row_ptr(g.global_id(ty, i));
      for (std::size_t j = 0; j < t.dim(); ++j) out += "\t" + format_double(r[j]);
      out += "\n";
    }
  write_file(path, out);
}

}  // namespace mug
