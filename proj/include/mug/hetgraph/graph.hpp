#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mug/error.hpp"
#include "mug/io.hpp"
#include "mug/numerics/mat.hpp"

namespace mug {

struct Relation {
  std::string name;
  std::size_t src = 0;
  std::size_t dst = 0;
};

// One relation hop of a meta-path. `reverse` walks the relation dst -> src.
struct PathStep {
  std::size_t relation = 0;
  bool reverse = false;
};

// A1 -R1-> A2 -R2-> ... -Rl-> A(l+1), with A1 = A(l+1) = target type.
struct MetaPath {
  std::string name;
  std::vector<std::size_t> types;
  std::vector<PathStep> steps;

  std::size_t length() const noexcept { return steps.size(); }

  // Reading the path backwards gives the same path.
  bool palindromic() const {
    const std::size_t l = steps.size();
    for (std::size_t i = 0; i <= l; ++i)
      if (types[i] != types[l - i]) return false;
    for (std::size_t i = 0; i < l; ++i) {
      const PathStep& a = steps[i];
      const PathStep& b = steps[l - 1 - i];
      if (a.relation != b.relation || a.reverse == b.reverse) return false;
    }
    return true;
  }
};

// Compressed neighbor lists over local node indices.
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> targets;

  std::size_t degree(std::size_t u) const { return offsets[u + 1] - offsets[u]; }
  const std::uint32_t* begin(std::size_t u) const { return targets.data() + offsets[u]; }
  const std::uint32_t* end(std::size_t u) const { return targets.data() + offsets[u + 1]; }
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

// Typed node/edge store. Populate the public fields, then call finalize();
// the graph is treated as immutable afterwards.
struct HetGraph {
  std::vector<std::string> node_types;
  std::vector<Relation> relations;
  std::vector<std::vector<std::string>> node_ids;  // per type, local index order
  std::vector<std::vector<Edge>> edges;            // per relation, local (src, dst)
  std::vector<std::optional<Mat>> attrs;           // per type
  std::size_t target_type = 0;
  std::optional<std::vector<int>> labels;  // per target node
  std::vector<MetaPath> metapaths;

  std::size_t type_size(std::size_t t) const { return node_ids.at(t).size(); }
  std::size_t num_targets() const { return type_size(target_type); }
  std::size_t total_nodes() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t global_id(std::size_t type, std::size_t local) const { return offsets_[type] + local; }
  std::size_t type_offset(std::size_t type) const { return offsets_[type]; }

  std::size_t type_of_global(std::size_t gid) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), gid);
    return std::size_t(it - offsets_.begin()) - 1;
  }

  const Csr& neighbors(std::size_t relation, bool reverse) const { return reverse ? rev_[relation] : fwd_[relation]; }

  std::optional<std::size_t> find_type(std::string_view name) const {
    for (std::size_t i = 0; i < node_types.size(); ++i)
      if (node_types[i] == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> find_relation(std::string_view name) const {
    for (std::size_t i = 0; i < relations.size(); ++i)
      if (relations[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> find_metapath(std::string_view name) const {
    for (std::size_t i = 0; i < metapaths.size(); ++i)
      if (metapaths[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t num_classes() const {
    if (!labels || labels->empty()) return 0;
    return std::size_t(*std::max_element(labels->begin(), labels->end())) + 1;
  }

  std::size_t attr_dim(std::size_t t) const { return attrs.at(t) ? attrs[t]->cols : 0; }

  // Resolves [type, rel, type, ...] names into a target-to-target meta-path.
  MetaPath make_metapath(const std::string& name, const std::vector<std::string>& seq) const {
    if (seq.size() < 3 || seq.size() % 2 == 0)
      throw SchemaError("meta-path " + name + ": expected alternating type,relation,...,type sequence of odd length >= 3");
    MetaPath p;
    p.name = name;
    for (std::size_t i = 0; i < seq.size(); i += 2) {
      auto t = find_type(seq[i]);
      if (!t) throw SchemaError("meta-path " + name + ": unknown node type '" + seq[i] + "'");
      p.types.push_back(*t);
    }
    for (std::size_t i = 1; i < seq.size(); i += 2) {
      auto r = find_relation(seq[i]);
      if (!r) throw SchemaError("meta-path " + name + ": unknown relation '" + seq[i] + "'");
      const std::size_t a = p.types[i / 2], b = p.types[i / 2 + 1];
      const Relation& rel = relations[*r];
      if (rel.src == a && rel.dst == b)
        p.steps.push_back({*r, false});
      else if (rel.src == b && rel.dst == a)
        p.steps.push_back({*r, true});
      else
        throw SchemaError("meta-path " + name + ": relation '" + rel.name + "' does not connect " + node_types[a] + " and " + node_types[b]);
    }
    if (p.types.front() != target_type || p.types.back() != target_type)
      throw SchemaError("meta-path " + name + ": must start and end at target type '" + node_types[target_type] + "'");
    return p;
  }

  // Checks every invariant and builds derived indices. Returns warnings.
  std::vector<std::string> finalize() {
    std::vector<std::string> warnings;
    const std::size_t nt = node_types.size();
    if (nt == 0) throw SchemaError("graph has no node types");
    if (node_ids.size() != nt) throw SchemaError("node id table does not match node types");
    if (target_type >= nt) throw SchemaError("target type out of range");
    if (nt + relations.size() <= 2)
      warnings.push_back("graph is not heterogeneous: " + std::to_string(nt) + " node types + " + std::to_string(relations.size()) + " relation types <= 2");
    attrs.resize(nt);
    edges.resize(relations.size());
    for (std::size_t r = 0; r < relations.size(); ++r) {
      const Relation& rel = relations[r];
      if (rel.src >= nt || rel.dst >= nt) throw SchemaError("relation " + rel.name + " references an undeclared type");
      for (const auto& [s, d] : edges[r])
        if (s >= type_size(rel.src) || d >= type_size(rel.dst)) throw SchemaError("relation " + rel.name + ": edge endpoint out of range");
    }
    for (std::size_t t = 0; t < nt; ++t)
      if (attrs[t] && attrs[t]->rows != type_size(t))
        throw SchemaError("attributes of type " + node_types[t] + ": " + std::to_string(attrs[t]->rows) + " rows for " + std::to_string(type_size(t)) + " nodes");
    if (labels) {
      if (labels->size() != num_targets()) throw SchemaError("labels must cover exactly the target-type nodes");
      for (int c : *labels)
        if (c < 0) throw SchemaError("negative class id");
    }
    for (const MetaPath& p : metapaths) {
      if (p.types.size() != p.steps.size() + 1 || p.steps.empty()) throw SchemaError("meta-path " + p.name + ": malformed");
      if (p.types.front() != target_type || p.types.back() != target_type) throw SchemaError("meta-path " + p.name + ": not target-to-target");
      for (std::size_t i = 0; i < p.steps.size(); ++i) {
        const Relation& rel = relations.at(p.steps[i].relation);
        const auto [a, b] = p.steps[i].reverse ? std::pair{rel.dst, rel.src} : std::pair{rel.src, rel.dst};
        if (a != p.types[i] || b != p.types[i + 1]) throw SchemaError("meta-path " + p.name + ": step orientation unsatisfiable at relation " + rel.name);
      }
    }

    offsets_.assign(nt + 1, 0);
    for (std::size_t t = 0; t < nt; ++t) offsets_[t + 1] = offsets_[t] + type_size(t);

    fwd_.assign(relations.size(), {});
    rev_.assign(relations.size(), {});
    for (std::size_t r = 0; r < relations.size(); ++r) {
      fwd_[r] = build_csr(edges[r], type_size(relations[r].src), false);
      rev_[r] = build_csr(edges[r], type_size(relations[r].dst), true);
    }
    return warnings;
  }

 private:
  static Csr build_csr(const std::vector<Edge>& es, std::size_t n, bool reverse) {
    Csr c;
    c.offsets.assign(n + 1, 0);
    for (const auto& [s, d] : es) ++c.offsets[(reverse ? d : s) + 1];
    for (std::size_t i = 0; i < n; ++i) c.offsets[i + 1] += c.offsets[i];
    c.targets.resize(es.size());
    std::vector<std::size_t> fill(c.offsets.begin(), c.offsets.end() - 1);
    for (const auto& [s, d] : es) {
      const auto from = reverse ? d : s;
      c.targets[fill[from]++] = reverse ? s : d;
    }
    return c;
  }

  std::vector<std::size_t> offsets_;
  std::vector<Csr> fwd_;
  std::vector<Csr> rev_;
};

}  // namespace mug
