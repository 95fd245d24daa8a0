#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "mug/hetgraph/graph.hpp"
#include "mug/io.hpp"
#include "mug/numerics/rng.hpp"

// Planted-partition heterogeneous graph generator.
//
// Every node of every type carries a hidden class. An edge of a relation is
// drawn from a source node to a destination chosen with weight `intra` if the
// classes agree and `inter` otherwise, so meta-path views inherit homophily
// from the relation parameters. Target attributes are a class centroid
// (scaled by attr_signal) plus Gaussian noise.
namespace mug {

struct SynthSpec {
  struct Type {
    std::string name;
    std::size_t count = 0;
  };
  struct Rel {
    std::string name, src, dst;
    std::size_t degree = 1;  // edges drawn per source node
    double intra = 0.9;
    double inter = 0.1;
  };
  struct Path {
    std::string name;
    std::vector<std::string> steps;
  };

  std::size_t classes = 3;
  std::string target;
  std::vector<Type> types;  // types[0] is the target type
  std::size_t attr_dim = 8;
  double attr_noise = 0.5;
  double attr_signal = 1.0;
  std::vector<Rel> relations;
  std::vector<Path> metapaths;

  const Type* find_type(const std::string& n) const {
    for (const auto& t : types)
      if (t.name == n) return &t;
    return nullptr;
  }

  // Line format, '#' starts a comment:
  //   classes <C>
  //   target <name> <count>
  //   type <name> <count>
  //   attr_dim <d> | attr_noise <sigma> | attr_signal <scale>
  //   relation <name> <src> <dst> <degree> <intra> <inter>
  //   metapath <name> <type> <rel> <type> ... <type>
  static SynthSpec parse(const std::string& text) {
    SynthSpec s;
    std::size_t ln = 0;
    auto need_count = [&](const std::string& tok) {
      auto v = parse_int<std::size_t>(tok);
      if (!v) throw SpecError("expected a non-negative integer, got '" + tok + "'", ln);
      return *v;
    };
    auto need_real = [&](const std::string& tok) {
      auto v = parse_double(tok);
      if (!v || !std::isfinite(*v)) throw SpecError("expected a number, got '" + tok + "'", ln);
      return *v;
    };
    bool have_target = false;
    for (const std::string& raw : lines_of(text)) {
      ++ln;
      std::string line = raw.substr(0, raw.find('#'));
      std::istringstream in(line);
      std::vector<std::string> tok;
      for (std::string t; in >> t;) tok.push_back(t);
      if (tok.empty()) continue;
      const std::string& key = tok[0];
      auto arity = [&](std::size_t n) {
        if (tok.size() != n) throw SpecError("'" + key + "' expects " + std::to_string(n - 1) + " arguments", ln);
      };
      if (key == "classes") {
        arity(2);
        s.classes = need_count(tok[1]);
      } else if (key == "target") {
        arity(3);
        if (have_target) throw SpecError("target declared twice", ln);
        if (s.find_type(tok[1])) throw SpecError("duplicate type '" + tok[1] + "'", ln);
        have_target = true;
        s.target = tok[1];
        s.types.insert(s.types.begin(), Type{tok[1], need_count(tok[2])});
      } else if (key == "type") {
        arity(3);
        if (s.find_type(tok[1])) throw SpecError("duplicate type '" + tok[1] + "'", ln);
        s.types.push_back({tok[1], need_count(tok[2])});
      } else if (key == "attr_dim") {
        arity(2);
        s.attr_dim = need_count(tok[1]);
      } else if (key == "attr_noise") {
        arity(2);
        s.attr_noise = need_real(tok[1]);
      } else if (key == "attr_signal") {
        arity(2);
        s.attr_signal = need_real(tok[1]);
      } else if (key == "relation") {
        arity(7);
        if (!s.find_type(tok[2])) throw SpecError("relation '" + tok[1] + "' references undeclared type '" + tok[2] + "'", ln);
        if (!s.find_type(tok[3])) throw SpecError("relation '" + tok[1] + "' references undeclared type '" + tok[3] + "'", ln);
        Rel r{tok[1], tok[2], tok[3], need_count(tok[4]), need_real(tok[5]), need_real(tok[6])};
        if (r.intra < 0 || r.inter < 0 || r.intra + r.inter <= 0) throw SpecError("attach weights must be non-negative and not both zero", ln);
        if (r.degree > s.find_type(r.dst)->count) throw SpecError("degree exceeds destination type size", ln);
        s.relations.push_back(std::move(r));
      } else if (key == "metapath") {
        if (tok.size() < 5 || tok.size() % 2 != 1) throw SpecError("metapath expects a name and an odd-length type/relation sequence", ln);
        s.metapaths.push_back({tok[1], std::vector<std::string>(tok.begin() + 2, tok.end())});
      } else {
        throw SpecError("unknown key '" + key + "'", ln);
      }
    }
    if (!have_target) throw SpecError("no target declared");
    if (s.classes < 1) throw SpecError("classes must be >= 1");
    if (s.metapaths.empty()) throw SpecError("no metapath declared");
    return s;
  }

  static SynthSpec acm_like(std::size_t per_class = 100) {
    return parse("classes 3\ntarget paper " + std::to_string(3 * per_class) +
                 "\ntype author " + std::to_string(per_class) +
                 "\ntype subject 30\n"
                 "attr_dim 8\nattr_noise 0.5\nattr_signal 1.0\n"
                 "relation writes paper author 3 0.9 0.1\n"
                 "relation about paper subject 1 0.9 0.1\n"
                 "metapath PAP paper writes author writes paper\n"
                 "metapath PSP paper about subject about paper\n");
  }
};

// Builds the graph and validates it. Labels are the target nodes' classes.
inline HetGraph synth_graph(const SynthSpec& spec, RngStream rng) {
  const std::size_t C = spec.classes;
  HetGraph g;
  for (const auto& t : spec.types) g.node_types.push_back(t.name);
  g.target_type = 0;
  g.node_ids.resize(spec.types.size());

  // Balanced hidden classes per type, shuffled.
  std::vector<std::vector<int>> cls(spec.types.size());
  std::vector<std::vector<std::vector<std::uint32_t>>> members(spec.types.size(), std::vector<std::vector<std::uint32_t>>(C));
  for (std::size_t t = 0; t < spec.types.size(); ++t) {
    const std::size_t n = spec.types[t].count;
    for (std::size_t i = 0; i < n; ++i) g.node_ids[t].push_back(spec.types[t].name + "_" + std::to_string(i));
    cls[t].resize(n);
    for (std::size_t i = 0; i < n; ++i) cls[t][i] = int(i % C);
    RngStream sub = rng.split(100 + t);
    sub.shuffle(cls[t]);
    for (std::size_t i = 0; i < n; ++i) members[t][std::size_t(cls[t][i])].push_back(std::uint32_t(i));
  }

  for (std::size_t r = 0; r < spec.relations.size(); ++r) {
    const auto& rs = spec.relations[r];
    const std::size_t s = *g.find_type(rs.src), d = *g.find_type(rs.dst);
    g.relations.push_back({rs.name, s, d});
    std::vector<Edge> edges;
    RngStream sub = rng.split(1000 + r);
    std::vector<double> cw(C);
    std::vector<std::uint32_t> picked;
    for (std::size_t u = 0; u < spec.types[s].count; ++u) {
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        cw[c] = (int(c) == cls[s][u] ? rs.intra : rs.inter) * double(members[d][c].size());
        total += cw[c];
      }
      if (total <= 0.0) continue;
      picked.clear();
      std::size_t attempts = 0;
      while (picked.size() < rs.degree && attempts++ < 64 * rs.degree) {
        double x = sub.uniform() * total;
        std::size_t c = 0;
        while (c + 1 < C && x >= cw[c]) x -= cw[c++];
        const auto& pool = members[d][c];
        if (pool.empty()) continue;
        const std::uint32_t v = pool[sub.index(pool.size())];
        if (s == d && v == u) continue;
        if (std::find(picked.begin(), picked.end(), v) != picked.end()) continue;
        picked.push_back(v);
      }
      std::sort(picked.begin(), picked.end());
      for (std::uint32_t v : picked) edges.emplace_back(std::uint32_t(u), v);
    }
    g.edges.push_back(std::move(edges));
  }

  g.attrs.resize(spec.types.size());
  if (spec.attr_dim > 0) {
    const std::size_t n = spec.types[0].count, dim = spec.attr_dim;
    RngStream sub = rng.split(7);
    Mat centroids(C, dim);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t j = 0; j < dim; ++j) centroids(c, j) = dim >= C ? double(c == j) : sub.normal();
    Mat x(n, dim);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) x(i, j) = spec.attr_signal * centroids(std::size_t(cls[0][i]), j) + spec.attr_noise * sub.normal();
    g.attrs[0] = std::move(x);
  }

  g.labels = cls[0];
  for (const auto& p : spec.metapaths) {
    try {
      g.metapaths.push_back(g.make_metapath(p.name, p.steps));
    } catch (const SchemaError& e) {
      throw SpecError(e.what());
    }
  }
  for (const auto& w : g.finalize()) warn(w);
  return g;
}

// Predicted homophily of a meta-path view from the class-transition chain
// of the generator, ignoring multi-path collisions and binarization.
inline double expected_homophily(const SynthSpec& spec, std::size_t metapath_index) {
  const std::size_t C = spec.classes;
  auto type_index = [&](const std::string& n) {
    for (std::size_t i = 0; i < spec.types.size(); ++i)
      if (spec.types[i].name == n) return i;
    throw SpecError("unknown type '" + n + "'");
  };
  auto class_counts = [&](std::size_t t) {
    std::vector<double> c(C, 0.0);
    for (std::size_t i = 0; i < spec.types[t].count; ++i) c[i % C] += 1.0;
    return c;
  };
  auto forward = [&](const SynthSpec::Rel& r) {
    const auto dc = class_counts(type_index(r.dst));
    Mat m(C, C);
    for (std::size_t a = 0; a < C; ++a) {
      double z = 0.0;
      for (std::size_t b = 0; b < C; ++b) z += (m(a, b) = (a == b ? r.intra : r.inter) * dc[b]);
      for (std::size_t b = 0; b < C; ++b) m(a, b) = z > 0 ? m(a, b) / z : 0.0;
    }
    return m;
  };
  const auto& path = spec.metapaths.at(metapath_index).steps;
  std::vector<double> dist(C);
  const auto tc = class_counts(0);
  for (std::size_t c = 0; c < C; ++c) dist[c] = tc[c] / double(spec.types[0].count);

  // joint[c0][c] = P(start class c0, current class c)
  Mat joint(C, C);
  for (std::size_t c = 0; c < C; ++c) joint(c, c) = dist[c];
  for (std::size_t i = 1; i + 1 < path.size(); i += 2) {
    const SynthSpec::Rel* rel = nullptr;
    for (const auto& r : spec.relations)
      if (r.name == path[i]) rel = &r;
    if (!rel) throw SpecError("unknown relation '" + path[i] + "'");
    Mat step;
    if (rel->src == path[i - 1] && rel->dst == path[i + 1]) {
      step = forward(*rel);
    } else {
      // P(src class | dst class) by Bayes over the forward draw.
      const Mat f = forward(*rel);
      const auto sc = class_counts(type_index(rel->src));
      step = Mat(C, C);
      for (std::size_t b = 0; b < C; ++b) {
        double z = 0.0;
        for (std::size_t a = 0; a < C; ++a) z += (step(b, a) = sc[a] * f(a, b));
        for (std::size_t a = 0; a < C; ++a) step(b, a) = z > 0 ? step(b, a) / z : 0.0;
      }
    }
    joint = kernels::matmul(joint, step);
  }
  double h = 0.0, z = 0.0;
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t b = 0; b < C; ++b) {
      z += joint(a, b);
      if (a == b) h += joint(a, b);
    }
  return z > 0 ? h / z : 0.0;
}

}  // namespace mug
