#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mug/dimalign/dimalign.hpp"
#include "mug/error.hpp"
#include "mug/fusion/attention.hpp"
#include "mug/fusion/model.hpp"
#include "mug/fusion/train_config.hpp"
#include "mug/hetgraph/graph.hpp"
#include "mug/hetgraph/metapath.hpp"
#include "mug/io.hpp"
#include "mug/metamae/metamae.hpp"
#include "mug/numerics/optim.hpp"
#include "mug/numerics/rng.hpp"
#include "mug/numerics/tape.hpp"
#include "mug/structenc/sgns.hpp"
#include "mug/structenc/unify.hpp"

namespace mug {

// Per-graph data derived before any model parameter is touched: unified
// attributes, node sample, meta-path views.
struct GraphInputs {
  Mat x;                 // unified attributes (target rows)
  NodeSample sample;
  Mat sampled_t;         // x[sample]^T
  std::vector<MpAdj> views;
  std::vector<std::string> view_names;
  std::vector<double> struct_loss;  // SGNS epoch losses, empty when disabled
};

// RNG layout shared by pretrain and embed: the graph stream owns split(1) for
// the struct table, split(2) for the node sample, split(3) for masks.
inline RngStream graph_stream(std::uint64_t seed, std::size_t graph_index) { return RngStream(seed, 0).split(100 + graph_index); }

inline GraphInputs prepare_graph(const HetGraph& g, const TrainConfig& cfg, const RngStream& rng, unsigned threads) {
  if (g.metapaths.empty()) throw SchemaError("graph declares no meta-paths");
  GraphInputs in;
  if (cfg.no_cse) {
    if (!g.attrs[g.target_type]) throw SchemaError("target type has no attributes and structural encoding is disabled");
    in.x = unify_attrs(g, nullptr);
  } else {
    auto res = build_struct_table(g, cfg.walk, rng.split(1), threads);
    in.struct_loss = std::move(res.epoch_loss);
    in.x = unify_attrs(g, &res.table);
  }
  if (in.x.cols == 0) throw SchemaError("unified input has zero width");
  in.sample = NodeSample::draw(g.num_targets(), cfg.sample_size, rng.split(2));
  in.sampled_t = sample_columns(in.x, in.sample);
  in.views = all_metapath_adjacencies(g);
  for (const auto& p : g.metapaths) in.view_names.push_back(p.name);
  return in;
}

struct LossRow {
  std::size_t epoch = 0;
  double align = 0.0, recon_weighted = 0.0, scatter = 0.0, total = 0.0;
  std::vector<double> beta;
};

inline std::string loss_trace_csv(const std::vector<LossRow>& rows) {
  std::string out = "epoch,l_align,l_recon_weighted,l_scatter,total\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + format_double(r.align) + "," + format_double(r.recon_weighted) + "," + format_double(r.scatter) + "," + format_double(r.total) + "\n";
  return out;
}

struct PretrainResult {
  MugModel model;
  std::vector<LossRow> trace;
};

inline MugModel init_model(const TrainConfig& cfg) {
  RngStream rng = RngStream(cfg.seed, 0).split(1);
  MugModel m;
  m.dimalign = DimEncoder::init(cfg.sample_size, cfg.unified_dim, rng, cfg.hidden_dim);
  m.encoder = GnnLayer::init(cfg.unified_dim, cfg.unified_dim, Activation::PRelu, rng);
  m.decoder = GnnLayer::init(cfg.unified_dim, cfg.unified_dim, Activation::Identity, rng);
  m.attention = Attention::init(cfg.unified_dim, rng);
  m.meta = cfg.echo();
  return m;
}

inline LossWeights effective_weights(const TrainConfig& cfg) {
  return LossWeights{cfg.no_align ? 0.0 : cfg.lambda_align, cfg.lambda_recon, cfg.no_scatter ? 0.0 : cfg.lambda_scatter};
}

// Tape variables for every model parameter; the hidden dimalign pair is only
// used when set.
struct ModelVars {
  std::optional<ad::Var> align_w_hidden, align_b_hidden;
  ad::Var align_w, align_b, enc_w, enc_b, dec_w, dec_b, att_q, att_w, att_b;
};

struct ForwardVars {
  ad::Var align, beta, z, scatter, total;
  std::vector<ad::Var> views, losses;
};

// The complete objective for one graph: basis vectors, alignment, one shared
// encoder/decoder pass per view, attention, fusion, scatter, weighted sum.
inline ForwardVars mug_loss_expr(ad::Tape& t, const Mat& sampled_t, const Mat& x, const std::vector<Mat>& adjacency, const std::vector<Mat>& props,
                                 const ModelVars& mv, double gamma, const LossWeights& w) {
  if (adjacency.size() != props.size() || adjacency.empty()) throw DimensionError("loss: view count mismatch");
  ad::Var h = t.constant(sampled_t);
  if (mv.align_w_hidden) h = ad::tanh(ad::add(ad::matmul(h, *mv.align_w_hidden), *mv.align_b_hidden));
  const ad::Var S = dimalign::basis_expr(h, mv.align_w, mv.align_b);
  const ad::Var xu = ad::matmul(t.constant(x), S);
  ForwardVars f;
  f.align = dimalign::align_expr(S);
  for (std::size_t v = 0; v < adjacency.size(); ++v) {
    const auto ve = metamae::view_expr(adjacency[v], props[v], xu, mv.enc_w, mv.enc_b, mv.dec_w, mv.dec_b, gamma);
    f.views.push_back(ve.z);
    f.losses.push_back(ve.loss);
  }
  f.beta = fusion::beta_expr(f.views, mv.att_q, mv.att_w, mv.att_b);
  f.z = fusion::fuse_expr(f.beta, f.views);
  f.scatter = fusion::scatter_expr(f.z);
  f.total = fusion::total_expr(f.align, f.beta, f.losses, f.scatter, w);
  return f;
}

// Full-batch pre-training. With several graphs, epochs visit them round-robin.
inline PretrainResult pretrain(const std::vector<const HetGraph*>& graphs, const TrainConfig& cfg, unsigned threads = 1,
                               const std::function<void(const LossRow&)>& on_epoch = {}) {
  cfg.validate();
  if (graphs.empty()) throw ContractError("pretrain: no training graphs");
  std::vector<GraphInputs> inputs;
  std::vector<std::vector<Mat>> dense;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    inputs.push_back(prepare_graph(*graphs[gi], cfg, graph_stream(cfg.seed, gi), threads));
    auto& d = dense.emplace_back();
    for (std::size_t v = 0; v < inputs.back().views.size(); ++v) {
      if (inputs.back().views[v].nnz() == 0) throw DomainError("meta-path view '" + inputs.back().view_names[v] + "' has no edges");
      d.push_back(inputs.back().views[v].dense());
    }
  }

  PretrainResult out;
  out.model = init_model(cfg);
  MugModel& m = out.model;
  const LossWeights w = effective_weights(cfg);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const bool hidden = m.dimalign.hidden > 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::size_t gi = (epoch - 1) % graphs.size();
    const GraphInputs& in = inputs[gi];
    const RngStream mask_rng = graph_stream(cfg.seed, gi).split(3).split(cfg.mask.resample ? epoch : 0);
    LossRow row;
    row.epoch = epoch;
    try {
      ad::Tape t;
      std::vector<std::pair<Mat*, ad::Var>> params;
      auto param = [&](Mat& p, bool trainable) {
        ad::Var v = trainable ? t.parameter(p) : t.constant(p);
        if (trainable) params.emplace_back(&p, v);
        return v;
      };
      const bool train_align = !cfg.no_align;
      ModelVars mv;
      if (hidden) {
        mv.align_w_hidden = param(m.dimalign.W_hidden, train_align);
        mv.align_b_hidden = param(m.dimalign.b_hidden, train_align);
      }
      mv.align_w = param(m.dimalign.W, train_align);
      mv.align_b = param(m.dimalign.b, train_align);
      mv.enc_w = param(m.encoder.weight, true);
      mv.enc_b = param(m.encoder.bias, true);
      mv.dec_w = param(m.decoder.weight, true);
      mv.dec_b = param(m.decoder.bias, true);
      mv.att_q = param(m.attention.q, true);
      mv.att_w = param(m.attention.W, true);
      mv.att_b = param(m.attention.b, true);

      std::vector<Mat> props;
      for (std::size_t v = 0; v < in.views.size(); ++v) props.push_back(propagation_matrix(mask_edges(in.views[v], cfg.mask, mask_rng.split(v)).adj));
      const ForwardVars f = mug_loss_expr(t, in.sampled_t, in.x, dense[gi], props, mv, cfg.gamma, w);
      const ad::Var& align = f.align;
      const ad::Var& beta = f.beta;
      const ad::Var& scatter = f.scatter;
      const ad::Var& total = f.total;
      const auto& losses = f.losses;
      t.backward(total);

      row.align = cfg.no_align ? 0.0 : align.value()(0, 0);
      row.scatter = cfg.no_scatter ? 0.0 : scatter.value()(0, 0);
      for (std::size_t v = 0; v < losses.size(); ++v) {
        row.beta.push_back(beta.value()(0, v));
        row.recon_weighted += beta.value()(0, v) * losses[v].value()(0, 0);
      }
      row.total = total.value()(0, 0);
      if (!std::isfinite(row.total)) throw NumericalError("non-finite total loss");

      std::vector<Mat*> ps;
      std::vector<const Mat*> gs;
      for (auto& [p, v] : params) {
        ps.push_back(p);
        gs.push_back(&v.grad());
      }
      opt.step(ps, gs);
      for (Mat* p : ps)
        if (!p->all_finite()) throw NumericalError("non-finite parameter after update");
    } catch (const NumericalError& e) {
      throw NumericalError("pre-training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    out.trace.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return out;
}

inline PretrainResult pretrain(const HetGraph& g, const TrainConfig& cfg, unsigned threads = 1, const std::function<void(const LossRow&)>& on_epoch = {}) {
  return pretrain(std::vector<const HetGraph*>{&g}, cfg, threads, on_epoch);
}

struct Embedding {
  Mat z;                                // fused, |V_target| x k
  std::vector<double> beta;
  std::vector<std::string> view_names;
  std::vector<Mat> views;               // per-view encoder outputs
  std::size_t input_width = 0;          // unified attribute width before alignment
};

inline TrainConfig model_config(const MugModel& m) {
  if (m.meta.empty()) return TrainConfig{};
  return TrainConfig::from_echo(m.meta);
}

// Frozen transfer: per-graph steps (struct table, node sample) are redone on
// `g`; model parameters are only read. No edge masking.
inline Embedding embed(const MugModel& model, const HetGraph& g, std::optional<std::uint64_t> seed = std::nullopt, unsigned threads = 1) {
  model.check();
  TrainConfig cfg = model_config(model);
  if (seed) cfg.seed = *seed;
  cfg.sample_size = model.dimalign.sample_size;
  const GraphInputs in = prepare_graph(g, cfg, graph_stream(cfg.seed, 0), threads);
  const Mat xu = project(basis_vectors(model.dimalign, in.sample, in.x), in.x);
  Embedding e;
  e.input_width = in.x.cols;
  e.view_names = in.view_names;
  for (const MpAdj& a : in.views) e.views.push_back(encode(model.encoder, a, xu));
  e.beta = attention_weights(model.attention, e.views);
  e.z = fuse(e.beta, e.views);
  return e;
}

inline std::string embedding_tsv(const HetGraph& g, const Mat& z) {
  std::string out;
  for (std::size_t i = 0; i < z.rows; ++i) {
    out += g.node_ids[g.target_type][i];
    for (std::size_t j = 0; j < z.cols; ++j) out += "\t" + format_double(z(i, j));
    out += "\n";
  }
  return out;
}

// One line, one weight per meta-path in declaration order.
inline std::string beta_csv(const std::vector<double>& beta) {
  std::string out;
  for (std::size_t i = 0; i < beta.size(); ++i) out += (i ? "," : "") + format_double(beta[i]);
  return out + "\n";
}

}  // namespace mug
