#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mug/hetgraph/graph.hpp"

namespace mug {

// Binary target x target adjacency induced by a meta-path, zero diagonal.
struct MpAdj {
  std::size_t metapath = 0;
  std::size_t n = 0;
  bool symmetric = false;
  std::vector<std::vector<std::uint32_t>> rows;  // sorted column indices

  std::size_t nnz() const {
    std::size_t s = 0;
    for (const auto& r : rows) s += r.size();
    return s;
  }

  bool has(std::size_t u, std::size_t v) const { return std::binary_search(rows[u].begin(), rows[u].end(), std::uint32_t(v)); }

  Mat dense() const {
    Mat m(n, n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::uint32_t v : rows[u]) m(u, v) = 1.0;
    return m;
  }
};

// Boolean product of the (orientation-corrected) step relations, computed
// as a frontier expansion from every target node.
inline MpAdj metapath_adjacency(const HetGraph& g, std::size_t metapath_index) {
  const MetaPath& p = g.metapaths.at(metapath_index);
  MpAdj out;
  out.metapath = metapath_index;
  out.n = g.num_targets();
  out.symmetric = p.palindromic();
  out.rows.resize(out.n);

  std::vector<std::vector<char>> mark(p.types.size());
  for (std::size_t i = 0; i < p.types.size(); ++i) mark[i].assign(g.type_size(p.types[i]), 0);

  std::vector<std::uint32_t> frontier, next;
  for (std::size_t u = 0; u < out.n; ++u) {
    frontier.assign(1, std::uint32_t(u));
    for (std::size_t s = 0; s < p.steps.size() && !frontier.empty(); ++s) {
      const Csr& adj = g.neighbors(p.steps[s].relation, p.steps[s].reverse);
      std::vector<char>& seen = mark[s + 1];
      next.clear();
      for (std::uint32_t a : frontier)
        for (const std::uint32_t* it = adj.begin(a); it != adj.end(a); ++it)
          if (!seen[*it]) {
            seen[*it] = 1;
            next.push_back(*it);
          }
      for (std::uint32_t b : next) seen[b] = 0;
      frontier.swap(next);
    }
    auto& row = out.rows[u];
    for (std::uint32_t v : frontier)
      if (v != u) row.push_back(v);
    std::sort(row.begin(), row.end());
  }
  return out;
}

inline std::vector<MpAdj> all_metapath_adjacencies(const HetGraph& g) {
  std::vector<MpAdj> out;
  out.reserve(g.metapaths.size());
  for (std::size_t i = 0; i < g.metapaths.size(); ++i) out.push_back(metapath_adjacency(g, i));
  return out;
}

}  // namespace mug
