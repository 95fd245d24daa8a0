#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mug/config.hpp"
#include "mug/error.hpp"
#include "mug/metamae/metamae.hpp"
#include "mug/numerics/optim.hpp"
#include "mug/structenc/walks.hpp"

namespace mug {

// Everything a pre-training run depends on. The echo of these fields is
// stored in the checkpoint so that embedding can replay the per-graph steps.
struct TrainConfig {
  double lambda_align = 1.0;
  double lambda_recon = 1.0;
  double lambda_scatter = 0.1;
  std::size_t epochs = 400;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool no_cse = false, no_align = false, no_scatter = false;

  WalkConfig walk;
  std::size_t sample_size = 128;
  std::size_t unified_dim = 64;
  std::size_t hidden_dim = 0;
  MaskSpec mask;
  double gamma = 2.0;

  std::vector<ConfigField> fields() {
    using namespace cfgbind;
    return {
        real("lambda_align", lambda_align),
        real("lambda_recon", lambda_recon),
        real("lambda_scatter", lambda_scatter),
        size("epochs", epochs),
        real("learning_rate", learning_rate),
        {"optimizer", [this] { return std::string(optimizer_name(optimizer)); }, [this](std::string_view v) { optimizer = parse_optimizer(std::string(v)); }},
        real("adam_beta1", adam_beta1),
        real("adam_beta2", adam_beta2),
        real("adam_eps", adam_eps),
        u64("seed", seed),
        flag("no_cse", no_cse),
        flag("no_align", no_align),
        flag("no_scatter", no_scatter),
        size("walks_per_node", walk.walks_per_node),
        size("walk_length", walk.walk_length),
        size("window", walk.window),
        size("negatives", walk.negatives),
        size("struct_dim", walk.dim),
        size("struct_epochs", walk.epochs),
        real("struct_learning_rate", walk.learning_rate),
        real("struct_min_learning_rate", walk.min_learning_rate),
        real("negative_power", walk.negative_power),
        size("sample_size", sample_size),
        size("unified_dim", unified_dim),
        size("hidden_dim", hidden_dim),
        real("mask_rate", mask.rate),
        flag("mask_resample", mask.resample),
        real("gamma", gamma),
    };
  }

  void set(std::string_view key, std::string_view value) { config_set(fields(), key, value); }
  ConfigEcho echo() const { return config_echo(const_cast<TrainConfig*>(this)->fields()); }

  static TrainConfig from_echo(const ConfigEcho& echo) {
    TrainConfig c;
    for (const auto& [k, v] : echo) c.set(k, v);
    c.validate();
    return c;
  }

  void validate() const {
    if (lambda_align < 0.0 || lambda_recon < 0.0 || lambda_scatter < 0.0) throw SpecError("loss weights must be >= 0");
    if (!(learning_rate > 0.0)) throw SpecError("learning_rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw SpecError("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw SpecError("adam_eps must be positive");
    if (sample_size == 0 || unified_dim == 0) throw SpecError("sample_size and unified_dim must be >= 1");
    walk.validate();
    mask.validate();
    check_gamma(gamma);
  }
};

}  // namespace mug
