#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mug/hetgraph/metapath.hpp"

namespace mug {

// Fraction of view edges joining same-label nodes. Symmetric views count
// each unordered pair once. An edgeless view has no defined ratio.
inline double homophily_ratio(const MpAdj& adj, const std::vector<int>& labels) {
  if (labels.size() != adj.n) throw DimensionError("homophily_ratio: " + std::to_string(labels.size()) + " labels for " + std::to_string(adj.n) + " nodes");
  std::size_t edges = 0, same = 0;
  for (std::size_t u = 0; u < adj.n; ++u)
    for (std::uint32_t v : adj.rows[u]) {
      if (adj.symmetric && v < u) continue;
      ++edges;
      same += labels[u] == labels[v];
    }
  if (edges == 0) throw DomainError("homophily_ratio: view has no edges, ratio undefined");
  return double(same) / double(edges);
}

struct HomophilyReport {
  std::vector<std::string> names;
  std::vector<std::optional<double>> ratios;  // absent for edgeless views
  std::optional<double> average;              // over defined ratios
};

inline HomophilyReport homophily_report(const HetGraph& g) {
  if (!g.labels) throw SchemaError("homophily: graph has no labels");
  HomophilyReport r;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < g.metapaths.size(); ++i) {
    r.names.push_back(g.metapaths[i].name);
    try {
      const double h = homophily_ratio(metapath_adjacency(g, i), *g.labels);
      r.ratios.emplace_back(h);
      sum += h;
      ++defined;
    } catch (const DomainError&) {
      r.ratios.emplace_back(std::nullopt);
    }
  }
  if (defined) r.average = sum / double(defined);
  return r;
}

// Probability that two nodes drawn independently share a label.
inline double class_frequency_baseline(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::vector<double> counts;
  for (int c : labels) {
    if (std::size_t(c) >= counts.size()) counts.resize(std::size_t(c) + 1, 0.0);
    counts[std::size_t(c)] += 1.0;
  }
  double s = 0.0;
  for (double c : counts) s += (c / double(labels.size())) * (c / double(labels.size()));
  return s;
}

}  // namespace mug
