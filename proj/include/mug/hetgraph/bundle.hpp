#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mug/hetgraph/graph.hpp"
#include "mug/io.hpp"

// On-disk bundle: schema.json, nodes.tsv, edges.tsv, optional
// features.<type>.tsv and labels.tsv. UTF-8, tab-separated, LF, one header
// line per TSV file.
namespace mug {

namespace detail {

struct TsvFile {
  std::string name;
  std::vector<std::string> lines;
};

inline TsvFile read_tsv(const std::filesystem::path& dir, const std::string& name) {
  const auto p = dir / name;
  if (!std::filesystem::exists(p)) throw BundleError(BundleError::Kind::MissingFile, name, 0, "missing file");
  TsvFile f{name, lines_of(read_file(p))};
  if (f.lines.empty()) throw BundleError(BundleError::Kind::MalformedRow, name, 1, "missing header line");
  return f;
}

}  // namespace detail

inline HetGraph load_bundle(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr) {
  using K = BundleError::Kind;
  HetGraph g;

  // schema.json
  const auto schema_path = dir / "schema.json";
  if (!std::filesystem::exists(schema_path)) throw BundleError(K::MissingFile, "schema.json", 0, "missing file");
  nlohmann::json schema;
  try {
    schema = nlohmann::json::parse(read_file(schema_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw BundleError(K::MalformedRow, "schema.json", 1, e.what());
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> path_specs;
  try {
    for (const auto& t : schema.at("node_types")) g.node_types.push_back(t.get<std::string>());
    g.node_ids.resize(g.node_types.size());
    for (const auto& r : schema.at("relations")) {
      const std::string name = r.at("name").get<std::string>();
      auto s = g.find_type(r.at("src").get<std::string>());
      auto d = g.find_type(r.at("dst").get<std::string>());
      if (!s || !d) throw BundleError(K::UnknownType, "schema.json", 1, "relation " + name + " references an unknown type");
      g.relations.push_back({name, *s, *d});
    }
    auto tt = g.find_type(schema.at("target_type").get<std::string>());
    if (!tt) throw BundleError(K::UnknownType, "schema.json", 1, "unknown target type");
    g.target_type = *tt;
    for (const auto& m : schema.at("metapaths")) path_specs.emplace_back(m.at("name").get<std::string>(), m.at("steps").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw BundleError(K::Schema, "schema.json", 1, e.what());
  }
  try {
    for (const auto& [name, steps] : path_specs) g.metapaths.push_back(g.make_metapath(name, steps));
  } catch (const SchemaError& e) {
    throw BundleError(K::Schema, "schema.json", 1, e.what());
  }

  // nodes.tsv
  struct Loc {
    std::size_t type;
    std::size_t local;
  };
  std::unordered_map<std::string, Loc> index;
  {
    const auto f = detail::read_tsv(dir, "nodes.tsv");
    for (std::size_t i = 1; i < f.lines.size(); ++i) {
      const std::size_t ln = i + 1;
      const auto cols = split(f.lines[i], '\t');
      if (cols.size() != 2 || cols[0].empty()) throw BundleError(K::MalformedRow, f.name, ln, "expected node_id<TAB>type");
      auto t = g.find_type(cols[1]);
      if (!t) throw BundleError(K::UnknownType, f.name, ln, "unknown node type '" + std::string(cols[1]) + "'");
      std::string id(cols[0]);
      if (index.count(id)) throw BundleError(K::Duplicate, f.name, ln, "duplicate node id '" + id + "'");
      index.emplace(id, Loc{*t, g.node_ids[*t].size()});
      g.node_ids[*t].push_back(std::move(id));
    }
  }

  // edges.tsv
  g.edges.resize(g.relations.size());
  {
    const auto f = detail::read_tsv(dir, "edges.tsv");
    for (std::size_t i = 1; i < f.lines.size(); ++i) {
      const std::size_t ln = i + 1;
      const auto cols = split(f.lines[i], '\t');
      if (cols.size() != 3) throw BundleError(K::MalformedRow, f.name, ln, "expected src_id<TAB>relation<TAB>dst_id");
      auto r = g.find_relation(cols[1]);
      if (!r) throw BundleError(K::UnknownRelation, f.name, ln, "unknown relation '" + std::string(cols[1]) + "'");
      auto s = index.find(std::string(cols[0]));
      auto d = index.find(std::string(cols[2]));
      if (s == index.end()) throw BundleError(K::UnknownNode, f.name, ln, "unknown node id '" + std::string(cols[0]) + "'");
      if (d == index.end()) throw BundleError(K::UnknownNode, f.name, ln, "unknown node id '" + std::string(cols[2]) + "'");
      const Relation& rel = g.relations[*r];
      if (s->second.type != rel.src || d->second.type != rel.dst)
        throw BundleError(K::OutOfRange, f.name, ln, "endpoint types do not match relation " + rel.name);
      g.edges[*r].emplace_back(std::uint32_t(s->second.local), std::uint32_t(d->second.local));
    }
  }

  // features.<type>.tsv
  g.attrs.resize(g.node_types.size());
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    const std::string name = "features." + g.node_types[t] + ".tsv";
    if (!std::filesystem::exists(dir / name)) continue;
    const auto f = detail::read_tsv(dir, name);
    const std::size_t d = split(f.lines[0], '\t').size() - 1;
    Mat m(g.type_size(t), d);
    std::vector<char> seen(g.type_size(t), 0);
    for (std::size_t i = 1; i < f.lines.size(); ++i) {
      const std::size_t ln = i + 1;
      const auto cols = split(f.lines[i], '\t');
      if (cols.size() != d + 1) throw BundleError(K::MalformedRow, name, ln, "expected node_id and " + std::to_string(d) + " values");
      auto it = index.find(std::string(cols[0]));
      if (it == index.end()) throw BundleError(K::UnknownNode, name, ln, "unknown node id '" + std::string(cols[0]) + "'");
      if (it->second.type != t) throw BundleError(K::OutOfRange, name, ln, "node '" + std::string(cols[0]) + "' is not of type " + g.node_types[t]);
      if (seen[it->second.local]++) throw BundleError(K::Duplicate, name, ln, "duplicate row for '" + std::string(cols[0]) + "'");
      for (std::size_t j = 0; j < d; ++j) {
        auto v = parse_double(cols[j + 1]);
        if (!v || !std::isfinite(*v)) throw BundleError(K::MalformedRow, name, ln, "bad decimal '" + std::string(cols[j + 1]) + "'");
        m(it->second.local, j) = *v;
      }
    }
    for (std::size_t l = 0; l < seen.size(); ++l)
      if (!seen[l]) throw BundleError(K::Coverage, name, f.lines.size() + 1, "no feature row for node '" + g.node_ids[t][l] + "'");
    g.attrs[t] = std::move(m);
  }

  // labels.tsv
  if (std::filesystem::exists(dir / "labels.tsv")) {
    const auto f = detail::read_tsv(dir, "labels.tsv");
    std::vector<int> labels(g.num_targets(), -1);
    for (std::size_t i = 1; i < f.lines.size(); ++i) {
      const std::size_t ln = i + 1;
      const auto cols = split(f.lines[i], '\t');
      if (cols.size() != 2) throw BundleError(K::MalformedRow, f.name, ln, "expected node_id<TAB>class_id");
      auto it = index.find(std::string(cols[0]));
      if (it == index.end()) throw BundleError(K::UnknownNode, f.name, ln, "unknown node id '" + std::string(cols[0]) + "'");
      if (it->second.type != g.target_type) throw BundleError(K::OutOfRange, f.name, ln, "labelled node is not of the target type");
      auto c = parse_int<int>(cols[1]);
      if (!c || *c < 0) throw BundleError(K::MalformedRow, f.name, ln, "bad class id '" + std::string(cols[1]) + "'");
      if (labels[it->second.local] != -1) throw BundleError(K::Duplicate, f.name, ln, "duplicate label row");
      labels[it->second.local] = *c;
    }
    for (std::size_t l = 0; l < labels.size(); ++l)
      if (labels[l] < 0) throw BundleError(K::Coverage, f.name, f.lines.size() + 1, "no label for target node '" + g.node_ids[g.target_type][l] + "'");
    g.labels = std::move(labels);
  }

  std::vector<std::string> w;
  try {
    w = g.finalize();
  } catch (const SchemaError& e) {
    throw BundleError(K::Schema, "schema.json", 1, e.what());
  }
  for (const auto& msg : w) warn(msg);
  if (warnings) *warnings = std::move(w);
  return g;
}

inline std::string schema_json(const HetGraph& g) {
  nlohmann::ordered_json j;
  j["node_types"] = g.node_types;
  j["relations"] = nlohmann::ordered_json::array();
  for (const auto& r : g.relations) j["relations"].push_back({{"name", r.name}, {"src", g.node_types[r.src]}, {"dst", g.node_types[r.dst]}});
  j["target_type"] = g.node_types[g.target_type];
  j["metapaths"] = nlohmann::ordered_json::array();
  for (const auto& p : g.metapaths) {
    std::vector<std::string> steps{g.node_types[p.types[0]]};
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      steps.push_back(g.relations[p.steps[i].relation].name);
      steps.push_back(g.node_types[p.types[i + 1]]);
    }
    j["metapaths"].push_back({{"name", p.name}, {"steps", steps}});
  }
  return j.dump(2) + "\n";
}

inline void save_bundle(const HetGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "schema.json", schema_json(g));

  std::string nodes = "node_id\ttype\n";
  for (std::size_t t = 0; t < g.node_types.size(); ++t)
    for (const auto& id : g.node_ids[t]) nodes += id + "\t" + g.node_types[t] + "\n";
  write_file(dir / "nodes.tsv", nodes);

  std::string edges = "src_id\trelation\tdst_id\n";
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const Relation& rel = g.relations[r];
    for (const auto& [s, d] : g.edges[r]) edges += g.node_ids[rel.src][s] + "\t" + rel.name + "\t" + g.node_ids[rel.dst][d] + "\n";
  }
  write_file(dir / "edges.tsv", edges);

  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    const auto name = "features." + g.node_types[t] + ".tsv";
    if (!g.attrs[t]) {
      std::filesystem::remove(dir / name);
      continue;
    }
    const Mat& m = *g.attrs[t];
    std::string out = "node_id";
    for (std::size_t j = 0; j < m.cols; ++j) out += "\tf" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
      out += g.node_ids[t][i];
      for (std::size_t j = 0; j < m.cols; ++j) out += "\t" + format_double(m(i, j));
      out += "\n";
    }
    write_file(dir / name, out);
  }

  if (g.labels) {
    std::string out = "node_id\tclass_id\n";
    for (std::size_t i = 0; i < g.labels->size(); ++i) out += g.node_ids[g.target_type][i] + "\t" + std::to_string((*g.labels)[i]) + "\n";
    write_file(dir / "labels.tsv", out);
  } else {
    std::filesystem::remove(dir / "labels.tsv");
  }
}

}  // namespace mug
