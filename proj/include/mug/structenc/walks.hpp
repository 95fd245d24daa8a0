#pragma once

#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include "mug/error.hpp"
#include "mug/hetgraph/graph.hpp"
#include "mug/numerics/rng.hpp"

namespace mug {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 20;  // edges per walk (K)
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t dim = 64;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decayed linearly to min_learning_rate
  double min_learning_rate = 0.0001;
  double negative_power = 0.0;  // 0 = uniform over all nodes; 0.75 = word2vec unigram^0.75

  void validate() const {
    if (walks_per_node < 1 || walk_length < 1 || window < 1 || negatives < 1 || dim < 1 || epochs < 1)
      throw SpecError("walk config: all counts must be >= 1");
    if (!(learning_rate > 0.0)) throw SpecError("walk config: learning rate must be positive");
    if (min_learning_rate < 0.0 || min_learning_rate > learning_rate) throw SpecError("walk config: min learning rate must lie in [0, learning rate]");
    if (negative_power < 0.0) throw SpecError("walk config: negative power must be >= 0");
  }
};

using Walk = std::vector<std::uint32_t>;  // global node ids

// Meta-path guided random walks from every target node. Step i follows the
// relation at position (i mod l) of the cyclically repeated pattern; a walk
// stops early when no type-conforming neighbor exists. Each start node owns
// the child stream rng.split(node), so results do not depend on `threads`.
inline std::vector<Walk> sample_walks(const HetGraph& g, std::size_t metapath_index, const WalkConfig& cfg, const RngStream& rng, unsigned threads = 1) {
  const MetaPath& p = g.metapaths.at(metapath_index);
  const std::size_t n = g.num_targets(), per = cfg.walks_per_node, l = p.length();
  std::vector<Walk> walks(n * per);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      RngStream r = rng.split(v);
      for (std::size_t w = 0; w < per; ++w) {
        Walk& walk = walks[v * per + w];
        walk.reserve(cfg.walk_length + 1);
        std::size_t local = v;
        walk.push_back(std::uint32_t(g.global_id(p.types[0], local)));
        for (std::size_t i = 0; i < cfg.walk_length; ++i) {
          const PathStep& s = p.steps[i % l];
          const Csr& adj = g.neighbors(s.relation, s.reverse);
          const std::size_t deg = adj.degree(local);
          if (deg == 0) break;
          local = adj.begin(local)[r.index(deg)];
          walk.push_back(std::uint32_t(g.global_id(p.types[i % l + 1], local)));
        }
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1 || n < 2 * threads) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return walks;
}

// Pooled walks over every declared meta-path; meta-path m uses rng.split(m).
inline std::vector<Walk> sample_all_walks(const HetGraph& g, const WalkConfig& cfg, const RngStream& rng, unsigned threads = 1) {
  std::vector<Walk> all;
  for (std::size_t m = 0; m < g.metapaths.size(); ++m) {
    auto w = sample_walks(g, m, cfg, rng.split(m), threads);
    all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return all;
}

}  // namespace mug
