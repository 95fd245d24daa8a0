#pragma once

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mug/config.hpp"
#include "mug/evalkit/evalkit.hpp"
#include "mug/fusion/gradsuite.hpp"
#include "mug/fusion/pretrain.hpp"
#include "mug/hetgraph/bundle.hpp"
#include "mug/hetgraph/homophily.hpp"
#include "mug/hetgraph/synth.hpp"

namespace mug::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Every tunable of a run, one flat key space.
struct RunConfig {
  TrainConfig train;
  SplitSpec split;
  ProbeConfig probe;

  std::vector<ConfigField> fields() {
    using namespace cfgbind;
    auto out = train.fields();
    for (auto& f : split.fields()) out.push_back(std::move(f));
    out.push_back(real("probe_l2", probe.l2));
    out.push_back(size("probe_steps", probe.steps));
    out.push_back(real("probe_learning_rate", probe.learning_rate));
    out.push_back(real("probe_decay", probe.decay));
    return out;
  }

  void set(std::string_view key, std::string_view value) { config_set(fields(), key, value); }

  void apply(const ConfigEcho& pairs) {
    for (const auto& [k, v] : pairs) set(k, v);
  }

  ConfigEcho echo() { return config_echo(fields()); }
};

inline std::string path_config(const std::filesystem::path& p) { return p.string() + ".config"; }

// Defaults, then the config file, then explicit overrides.
inline void layer_config(RunConfig& rc, const std::string& file, const std::vector<std::string>& overrides) {
  if (!file.empty()) {
    if (!std::filesystem::exists(file)) throw SpecError("config file not found: " + file);
    try {
      rc.apply(parse_config_text(read_file(file)));
    } catch (const SpecError& e) {
      throw SpecError(file + ": " + e.what());
    }
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw SpecError("--set expects key=value, got '" + kv + "'");
    rc.set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
}

inline std::string echo_text(const std::string& command_line, RunConfig& rc) {
  return "# " + command_line + "\n" + format_echo(rc.echo());
}

inline std::string joined(const std::vector<std::string>& args) {
  std::string s = "mug";
  for (const auto& a : args) s += " " + a;
  return s;
}

inline HetGraph load_checked(const std::string& dir, std::ostream& err) {
  std::vector<std::string> warnings;
  HetGraph g = load_bundle(dir, &warnings);
  for (const auto& w : warnings) err << "warning: " << dir << ": " << w << "\n";
  return g;
}

inline std::string bundle_name(const std::string& dir) {
  std::filesystem::path p(dir);
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

inline std::string homophily_csv(const HomophilyReport& r, double baseline) {
  std::string out = "metapath,homophily\n";
  for (std::size_t i = 0; i < r.names.size(); ++i) out += r.names[i] + "," + (r.ratios[i] ? format_double(*r.ratios[i]) : "NA") + "\n";
  out += "average," + (r.average ? format_double(*r.average) : "NA") + "\n";
  out += "class_baseline," + format_double(baseline) + "\n";
  return out;
}

inline std::string homophily_table(const HomophilyReport& r, double baseline) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "metapath" << "homophily\n" << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, std::optional<double> v) {
    os << std::setw(16) << name;
    if (v) os << *v;
    else os << "n/a (no edges)";
    os << "\n";
  };
  for (std::size_t i = 0; i < r.names.size(); ++i) row(r.names[i], r.ratios[i]);
  row("average", r.average);
  row("class_baseline", baseline);
  return os.str();
}

inline std::string gradcheck_table(const GradSuiteReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "check" << std::setw(11) << "instances" << std::setw(10) << "failures" << "max_rel_err\n";
  for (const auto& c : r.checks) os << std::setw(14) << c.name << std::setw(11) << c.instances << std::setw(10) << c.failures << std::scientific << std::setprecision(3) << c.max_rel_err << std::defaultfloat << "\n";
  os << (r.failures() ? "FAILED: " + std::to_string(r.failures()) + " check(s)\n" : std::string("all checks passed\n"));
  return os.str();
}

// Runs one invocation. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"mug: universal heterogeneous-graph pre-training"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  unsigned threads = 1;
  auto threads_opt = [&](CLI::App* c) { c->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber); };

  // synth
  std::string spec_file, out_path;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a planted-partition bundle");
  synth->add_option("--spec", spec_file, "Synth spec file (default: built-in 3-class spec)")->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "Output bundle directory")->required();
  synth->add_option("--seed", seed, "Generator seed");

  // homophily
  std::string data_dir;
  auto* homo = app.add_subcommand("homophily", "Per-meta-path homophily ratios of a labeled bundle");
  homo->add_option("--data", data_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  homo->add_option("--out", out_path, "CSV output path")->default_val("homophily.csv");

  // pretrain
  std::vector<std::string> data_dirs, overrides;
  std::string config_file;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> train_seed;
  bool no_cse = false, no_align = false, no_scatter = false;
  auto* pre = app.add_subcommand("pretrain", "Pre-train on one or more bundles");
  pre->add_option("--data", data_dirs, "Bundle directory (repeat for multi-graph pre-training)")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--config", config_file, "Flat key = value config file");
  pre->add_option("--out", out_path, "Checkpoint path")->required();
  pre->add_option("--set", overrides, "Override one config key (key=value)");
  pre->add_option("--epochs", epochs, "Override epochs");
  pre->add_option("--seed", train_seed, "Override seed");
  pre->add_flag("--no-cse", no_cse, "Drop the structural encoding");
  pre->add_flag("--no-align", no_align, "Disable the alignment loss");
  pre->add_flag("--no-scatter", no_scatter, "Disable the scattering loss");
  threads_opt(pre);

  // embed
  std::string model_path, beta_path;
  std::optional<std::uint64_t> embed_seed;
  auto* emb = app.add_subcommand("embed", "Frozen embedding of a bundle");
  emb->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  emb->add_option("--data", data_dir, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  emb->add_option("--out", out_path, "Embedding TSV path")->required();
  emb->add_option("--beta", beta_path, "Attention weights CSV (default: <out>.beta.csv)");
  emb->add_option("--seed", embed_seed, "Seed for per-graph preprocessing (default: checkpoint seed)");
  threads_opt(emb);

  // eval
  std::string train_dir;
  std::optional<std::size_t> shots, repeats;
  std::optional<std::uint64_t> split_seed;
  auto* ev = app.add_subcommand("eval", "Frozen cross-domain linear-probe evaluation");
  ev->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--train-data", train_dir, "Bundle the checkpoint was trained on (names the report rows)")->required();
  ev->add_option("--eval-data", data_dirs, "Labeled evaluation bundles")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--shots", shots, "k-shot protocol instead of the standard split")->check(CLI::IsMember({1, 3, 5}));
  ev->add_option("--config", config_file, "Flat key = value config file");
  ev->add_option("--set", overrides, "Override one config key (key=value)");
  ev->add_option("--repeats", repeats, "Override the number of random splits");
  ev->add_option("--seed", split_seed, "Override the split seed");
  ev->add_option("--embed-seed", embed_seed, "Seed for per-graph preprocessing (default: checkpoint seed)");
  ev->add_option("--out", out_path, "Report CSV path")->default_val("eval.csv");
  threads_opt(ev);

  // gradcheck
  GradSuiteOptions gopt;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss expression");
  gc->add_option("--instances", gopt.instances, "Random toy problems per check")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gopt.tolerance, "Maximum relative error");
  gc->add_option("--seed", gopt.seed, "Instance seed");
  gc->add_flag("--inject-fault", gopt.inject_fault, "Corrupt one analytic gradient")->group("");

  const std::string command_line = joined(args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      SynthSpec spec;
      std::string spec_text;
      if (spec_file.empty()) {
        spec = SynthSpec::acm_like();
      } else {
        spec_text = read_file(spec_file);
        try {
          spec = SynthSpec::parse(spec_text);
        } catch (const SpecError& e) {
          throw SpecError(spec_file + ": " + e.what());
        }
      }
      const HetGraph g = synth_graph(spec, RngStream(seed, 0));
      save_bundle(g, out_path);
      write_file(std::filesystem::path(out_path) / "synth.config",
                 "# " + command_line + "\nspec = " + (spec_file.empty() ? std::string("builtin") : spec_file) + "\nseed = " + std::to_string(seed) + "\n");
      out << "wrote bundle " << out_path << " (" << g.node_ids[g.target_type].size() << " target nodes, " << g.metapaths.size() << " meta-paths)\n";
      return kOk;
    }

    if (homo->parsed()) {
      const HetGraph g = load_checked(data_dir, err);
      const HomophilyReport r = homophily_report(g);
      const double base = class_frequency_baseline(*g.labels);
      write_file(out_path, homophily_csv(r, base));
      write_file(path_config(out_path), "# " + command_line + "\ndata = " + data_dir + "\n");
      out << homophily_table(r, base);
      return kOk;
    }

    if (pre->parsed()) {
      RunConfig rc;
      layer_config(rc, config_file, overrides);
      if (epochs) rc.train.epochs = *epochs;
      if (train_seed) rc.train.seed = *train_seed;
      rc.train.no_cse = rc.train.no_cse || no_cse;
      rc.train.no_align = rc.train.no_align || no_align;
      rc.train.no_scatter = rc.train.no_scatter || no_scatter;
      rc.train.validate();

      std::vector<HetGraph> graphs;
      for (const auto& d : data_dirs) graphs.push_back(load_checked(d, err));
      std::vector<const HetGraph*> ptrs;
      for (const auto& g : graphs) ptrs.push_back(&g);

      const std::size_t every = std::max<std::size_t>(1, rc.train.epochs / 10);
      const PretrainResult res = pretrain(ptrs, rc.train, threads, [&](const LossRow& row) {
        if (row.epoch % every == 0 || row.epoch == 1) err << "epoch " << row.epoch << " loss " << format_double(row.total) << "\n";
      });
      save_model(res.model, out_path);
      write_file(out_path + ".loss.csv", loss_trace_csv(res.trace));
      write_file(path_config(out_path), echo_text(command_line, rc));
      out << "wrote checkpoint " << out_path << " (" << res.trace.size() << " epochs)\n";
      return kOk;
    }

    if (emb->parsed()) {
      const MugModel m = load_model(model_path);
      const HetGraph g = load_checked(data_dir, err);
      const Embedding e = embed(m, g, embed_seed, threads);
      if (beta_path.empty()) beta_path = out_path + ".beta.csv";
      write_file(out_path, embedding_tsv(g, e.z));
      write_file(beta_path, beta_csv(e.beta));
      RunConfig rc;
      rc.train = model_config(m);
      if (embed_seed) rc.train.seed = *embed_seed;
      write_file(path_config(out_path), echo_text(command_line, rc));
      out << "wrote " << e.z.rows << " x " << e.z.cols << " embedding to " << out_path << "\n";
      return kOk;
    }

    if (ev->parsed()) {
      RunConfig rc;
      if (shots) rc.split = SplitSpec::k_shot(*shots);
      layer_config(rc, config_file, overrides);
      if (shots) {
        rc.split.mode = SplitMode::KShot;
        rc.split.per_class = *shots;
      }
      if (repeats) rc.split.repeats = *repeats;
      if (split_seed) rc.split.seed = *split_seed;
      rc.split.validate();

      const MugModel m = load_model(model_path);
      rc.train = model_config(m);
      std::vector<HetGraph> graphs;
      for (const auto& d : data_dirs) graphs.push_back(load_checked(d, err));
      std::vector<NamedGraph> targets;
      for (std::size_t i = 0; i < graphs.size(); ++i) targets.push_back({bundle_name(data_dirs[i]), &graphs[i]});

      std::ostream* saved = warning_stream();
      warning_stream() = &err;
      std::vector<EvalReport> reports;
      try {
        reports = cross_domain_eval(m, bundle_name(train_dir), targets, rc.split, embed_seed, threads, rc.probe);
      } catch (...) {
        warning_stream() = saved;
        throw;
      }
      warning_stream() = saved;
      write_file(out_path, report_csv(reports));
      write_file(path_config(out_path), echo_text(command_line, rc));
      out << report_table(reports);
      return kOk;
    }

    if (gc->parsed()) {
      const GradSuiteReport r = run_grad_suite(gopt);
      out << gradcheck_table(r);
      return r.failures() ? kNumerical : kOk;
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace mug::cli
