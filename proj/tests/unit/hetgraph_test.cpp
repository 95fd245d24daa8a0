#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mug/hetgraph/bundle.hpp"
#include "mug/hetgraph/homophily.hpp"
#include "mug/hetgraph/metapath.hpp"
#include "mug/hetgraph/synth.hpp"

namespace fs = std::filesystem;

namespace {

using namespace mug;

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mug_hetgraph_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void put(const fs::path& dir, const std::string& file, const std::string& content) { write_file(dir / file, content); }

fs::path acm_bundle(const std::string& name) {
  auto dir = fresh_dir(name);
  put(dir, "schema.json", R"({"node_types":["paper","author","subject"],
    "relations":[{"name":"pa","src":"paper","dst":"author"},{"name":"ps","src":"paper","dst":"subject"}],
    "target_type":"paper",
    "metapaths":[{"name":"PAP","steps":["paper","pa","author","pa","paper"]},
                 {"name":"PSP","steps":["paper","ps","subject","ps","paper"]}]})");
  put(dir, "nodes.tsv", "node_id\ttype\np1\tpaper\np2\tpaper\np3\tpaper\na1\tauthor\na2\tauthor\ns1\tsubject\n");
  put(dir, "edges.tsv", "src_id\trelation\tdst_id\np1\tpa\ta1\np2\tpa\ta1\np3\tpa\ta2\np1\tps\ts1\np3\tps\ts1\n");
  put(dir, "features.paper.tsv", "node_id\tf0\tf1\np1\t0.5\t1\np2\t-0.25\t0\np3\t1e-3\t2\n");
  put(dir, "labels.tsv", "node_id\tclass_id\np1\t0\np2\t0\np3\t1\n");
  return dir;
}

TEST(Bundle, LoadsAcmStyleBundleWithTwoMetaPaths) {
  const HetGraph g = load_bundle(acm_bundle("acm"));
  ASSERT_EQ(g.metapaths.size(), 2u);
  EXPECT_EQ(g.metapaths[0].name, "PAP");
  EXPECT_EQ(g.metapaths[1].name, "PSP");
  EXPECT_EQ(g.num_targets(), 3u);
  EXPECT_EQ(g.attr_dim(0), 2u);
  EXPECT_EQ((*g.attrs[0])(2, 0), 1e-3);
  EXPECT_EQ(*g.labels, (std::vector<int>{0, 0, 1}));
  EXPECT_TRUE(g.metapaths[0].palindromic());
  EXPECT_FALSE(g.metapaths[0].steps[0].reverse);
  EXPECT_TRUE(g.metapaths[0].steps[1].reverse);
}

TEST(Bundle, LoadsDblpStyleBundleWithThreeMetaPaths) {
  auto dir = fresh_dir("dblp");
  put(dir, "schema.json", R"({"node_types":["author","paper","conf","term"],
    "relations":[{"name":"ap","src":"author","dst":"paper"},{"name":"pc","src":"paper","dst":"conf"},{"name":"pt","src":"paper","dst":"term"}],
    "target_type":"author",
    "metapaths":[{"name":"APA","steps":["author","ap","paper","ap","author"]},
                 {"name":"APCPA","steps":["author","ap","paper","pc","conf","pc","paper","ap","author"]},
                 {"name":"APTPA","steps":["author","ap","paper","pt","term","pt","paper","ap","author"]}]})");
  put(dir, "nodes.tsv", "node_id\ttype\na1\tauthor\na2\tauthor\np1\tpaper\np2\tpaper\nc1\tconf\nt1\tterm\n");
  put(dir, "edges.tsv", "src_id\trelation\tdst_id\na1\tap\tp1\na2\tap\tp2\np1\tpc\tc1\np2\tpc\tc1\np1\tpt\tt1\n");
  const HetGraph g = load_bundle(dir);
  ASSERT_EQ(g.metapaths.size(), 3u);
  EXPECT_EQ(g.node_types.size(), 4u);
  EXPECT_EQ(g.relations.size(), 3u);
  const MpAdj apcpa = metapath_adjacency(g, 1);
  EXPECT_TRUE(apcpa.has(0, 1));
  EXPECT_TRUE(apcpa.has(1, 0));
  EXPECT_EQ(metapath_adjacency(g, 0).nnz(), 0u);
  EXPECT_EQ(metapath_adjacency(g, 2).nnz(), 0u);
  EXPECT_FALSE(g.labels.has_value());
}

TEST(Bundle, EdgeToUnknownNodeFailsAtThatLine) {
  auto dir = acm_bundle("badedge");
  put(dir, "edges.tsv", "src_id\trelation\tdst_id\np1\tpa\ta1\np2\tpa\ta9\n");
  try {
    load_bundle(dir);
    FAIL() << "expected BundleError";
  } catch (const BundleError& e) {
    EXPECT_EQ(e.kind(), BundleError::Kind::UnknownNode);
    EXPECT_EQ(e.file(), "edges.tsv");
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Bundle, DistinctErrorsForDistinctDefects) {
  auto expect_kind = [](const fs::path& dir, BundleError::Kind k, const std::string& file, std::size_t line) {
    try {
      load_bundle(dir);
      ADD_FAILURE() << "expected BundleError";
    } catch (const BundleError& e) {
      EXPECT_EQ(e.kind(), k) << e.what();
      EXPECT_EQ(e.file(), file);
      EXPECT_EQ(e.line(), line);
    }
  };
  {
    auto dir = acm_bundle("missing");
    fs::remove(dir / "nodes.tsv");
    expect_kind(dir, BundleError::Kind::MissingFile, "nodes.tsv", 0);
  }
  {
    auto dir = acm_bundle("badtype");
    put(dir, "nodes.tsv", "node_id\ttype\np1\tpaper\nx1\tvenue\n");
    expect_kind(dir, BundleError::Kind::UnknownType, "nodes.tsv", 3);
  }
  {
    auto dir = acm_bundle("malformed");
    put(dir, "edges.tsv", "src_id\trelation\tdst_id\np1\tpa\n");
    expect_kind(dir, BundleError::Kind::MalformedRow, "edges.tsv", 2);
  }
  {
    auto dir = acm_bundle("wrongtype");
    put(dir, "edges.tsv", "src_id\trelation\tdst_id\np1\tpa\ts1\n");
    expect_kind(dir, BundleError::Kind::OutOfRange, "edges.tsv", 2);
  }
  {
    auto dir = acm_bundle("badfloat");
    put(dir, "features.paper.tsv", "node_id\tf0\tf1\np1\t0.5\tx\np2\t0\t0\np3\t0\t0\n");
    expect_kind(dir, BundleError::Kind::MalformedRow, "features.paper.tsv", 2);
  }
  {
    auto dir = acm_bundle("badpath");
    put(dir, "schema.json", R"({"node_types":["paper","author","subject"],
      "relations":[{"name":"pa","src":"paper","dst":"author"},{"name":"ps","src":"paper","dst":"subject"}],
      "target_type":"paper", "metapaths":[{"name":"PAS","steps":["paper","pa","author","ps","subject"]}]})");
    expect_kind(dir, BundleError::Kind::Schema, "schema.json", 1);
  }
}

TEST(Bundle, SaveLoadRoundTripIsBitExact) {
  SynthSpec spec = SynthSpec::acm_like(20);
  const HetGraph g = synth_graph(spec, RngStream(3, 0));
  auto a = fresh_dir("rt_a"), b = fresh_dir("rt_b");
  save_bundle(g, a);
  const HetGraph h = load_bundle(a);
  save_bundle(h, b);
  for (const char* f : {"schema.json", "nodes.tsv", "edges.tsv", "features.paper.tsv", "labels.tsv"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  EXPECT_EQ(*g.attrs[0], *h.attrs[0]);
  EXPECT_EQ(g.edges, h.edges);
  EXPECT_EQ(*g.labels, *h.labels);
}

TEST(HetGraph, NonHeterogeneousGraphWarnsButLoads) {
  HetGraph g;
  g.node_types = {"paper"};
  g.node_ids = {{"p0", "p1"}};
  g.relations = {{"cites", 0, 0}};
  g.edges = {{{0, 1}}};
  const auto w = g.finalize();
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("not heterogeneous"), std::string::npos);
}

TEST(HetGraph, RejectsNonTargetMetaPath) {
  HetGraph g;
  g.node_types = {"paper", "author"};
  g.node_ids = {{"p0"}, {"a0"}};
  g.relations = {{"pa", 0, 1}};
  g.edges = {{{0, 0}}};
  EXPECT_THROW(g.make_metapath("PA", {"paper", "pa", "author"}), SchemaError);
}

// Two papers sharing one author.
HetGraph tiny_pap() {
  HetGraph g;
  g.node_types = {"paper", "author"};
  g.node_ids = {{"P1", "P2"}, {"A1"}};
  g.relations = {{"pa", 0, 1}};
  g.edges = {{{0, 0}, {1, 0}}};
  g.metapaths.push_back(g.make_metapath("PAP", {"paper", "pa", "author", "pa", "paper"}));
  g.finalize();
  return g;
}

TEST(MetaPathAdjacency, SharedAuthorLinksExactlyTheTwoPapers) {
  const MpAdj a = metapath_adjacency(tiny_pap(), 0);
  EXPECT_EQ(a.dense(), (Mat{{0, 1}, {1, 0}}));
  EXPECT_TRUE(a.symmetric);
}

TEST(MetaPathAdjacency, NoSharedIntermediatesGivesZeroMatrix) {
  HetGraph g;
  g.node_types = {"paper", "author"};
  g.node_ids = {{"P1", "P2", "P3"}, {"A1", "A2", "A3"}};
  g.relations = {{"pa", 0, 1}};
  g.edges = {{{0, 0}, {1, 1}, {2, 2}}};
  g.metapaths.push_back(g.make_metapath("PAP", {"paper", "pa", "author", "pa", "paper"}));
  g.finalize();
  EXPECT_EQ(metapath_adjacency(g, 0).dense(), Mat(3, 3, 0.0));
}

// Exhaustive enumeration of all type-conforming walks, straight from the
// raw edge lists.
std::set<std::pair<std::size_t, std::size_t>> enumerate_paths(const HetGraph& g, const MetaPath& p) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  std::function<void(std::size_t, std::size_t, std::size_t)> walk = [&](std::size_t start, std::size_t node, std::size_t step) {
    if (step == p.steps.size()) {
      if (node != start) out.emplace(start, node);
      return;
    }
    const PathStep& s = p.steps[step];
    for (const auto& [a, b] : g.edges[s.relation]) {
      const std::size_t from = s.reverse ? b : a, to = s.reverse ? a : b;
      if (from == node) walk(start, to, step + 1);
    }
  };
  for (std::size_t u = 0; u < g.num_targets(); ++u) walk(u, u, 0);
  return out;
}

HetGraph random_schema_graph(RngStream& rng) {
  HetGraph g;
  g.node_types = {"t", "x", "y"};
  const std::size_t nt = 2 + rng.index(29), nx = 1 + rng.index(8), ny = 1 + rng.index(6);
  g.node_ids.resize(3);
  for (std::size_t i = 0; i < nt; ++i) g.node_ids[0].push_back("t" + std::to_string(i));
  for (std::size_t i = 0; i < nx; ++i) g.node_ids[1].push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < ny; ++i) g.node_ids[2].push_back("y" + std::to_string(i));
  g.relations = {{"tx", 0, 1}, {"xy", 1, 2}, {"tt", 0, 0}, {"yt", 2, 0}};
  g.edges.resize(4);
  const double density = rng.uniform(0.02, 0.3);
  const std::size_t sizes[3] = {nt, nx, ny};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t a = 0; a < sizes[g.relations[r].src]; ++a)
      for (std::size_t b = 0; b < sizes[g.relations[r].dst]; ++b)
        if (rng.bernoulli(density)) g.edges[r].emplace_back(std::uint32_t(a), std::uint32_t(b));
  g.metapaths.push_back(g.make_metapath("TXT", {"t", "tx", "x", "tx", "t"}));
  g.metapaths.push_back(g.make_metapath("TT", {"t", "tt", "t"}));
  g.metapaths.push_back(g.make_metapath("TXYT", {"t", "tx", "x", "xy", "y", "yt", "t"}));
  g.metapaths.push_back(g.make_metapath("TYT", {"t", "yt", "y", "yt", "t"}));
  g.metapaths.push_back(g.make_metapath("TTT", {"t", "tt", "t", "tt", "t"}));
  g.finalize();
  return g;
}

TEST(MetaPathAdjacency, MatchesExhaustiveEnumerationOnRandomGraphs) {
  RngStream rng(12345, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const HetGraph g = random_schema_graph(rng);
    for (std::size_t m = 0; m < g.metapaths.size(); ++m) {
      const MpAdj a = metapath_adjacency(g, m);
      std::set<std::pair<std::size_t, std::size_t>> got;
      for (std::size_t u = 0; u < a.n; ++u)
        for (auto v : a.rows[u]) got.emplace(u, v);
      ASSERT_EQ(got, enumerate_paths(g, g.metapaths[m])) << "trial " << trial << " path " << g.metapaths[m].name;
      for (std::size_t u = 0; u < a.n; ++u) ASSERT_FALSE(a.has(u, u));
      if (g.metapaths[m].palindromic()) {
        const Mat d = a.dense();
        ASSERT_EQ(d, kernels::transpose(d));
      }
    }
  }
}

TEST(Homophily, UniformLabelsGiveOne) {
  const HetGraph g = tiny_pap();
  EXPECT_DOUBLE_EQ(homophily_ratio(metapath_adjacency(g, 0), {4, 4}), 1.0);
}

TEST(Homophily, FourNodeHandCase) {
  MpAdj a;
  a.n = 4;
  a.symmetric = true;
  a.rows = {{1, 2}, {0}, {0, 3}, {2}};  // edges (1,2), (3,4), (1,3) in 1-based ids
  EXPECT_NEAR(homophily_ratio(a, {0, 0, 1, 1}), 2.0 / 3.0, 1e-15);
}

TEST(Homophily, EdgelessViewIsUndefinedAndExcludedFromAverage) {
  HetGraph g = tiny_pap();
  g.relations.push_back({"cites", 0, 0});
  g.edges.emplace_back();
  g.metapaths.push_back(g.make_metapath("PP", {"paper", "cites", "paper"}));
  g.labels = std::vector<int>{0, 1};
  g.finalize();
  EXPECT_THROW(homophily_ratio(metapath_adjacency(g, 1), *g.labels), DomainError);
  const auto r = homophily_report(g);
  ASSERT_EQ(r.ratios.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.ratios[0], 0.0);
  EXPECT_FALSE(r.ratios[1].has_value());
  EXPECT_DOUBLE_EQ(*r.average, 0.0);
}

TEST(Synth, PlantedGraphIsHomophilous) {
  const SynthSpec spec = SynthSpec::acm_like(100);
  const HetGraph g = synth_graph(spec, RngStream(1, 0));
  EXPECT_EQ(g.num_targets(), 300u);
  EXPECT_EQ(g.num_classes(), 3u);
  const auto r = homophily_report(g);
  for (std::size_t i = 0; i < r.ratios.size(); ++i) {
    ASSERT_TRUE(r.ratios[i].has_value());
    EXPECT_GE(*r.ratios[i], 0.6) << r.names[i];
  }
  EXPECT_GE(*r.average - class_frequency_baseline(*g.labels), 0.2);
}

TEST(Synth, MeasuredHomophilyTracksPrediction) {
  // Single draws scatter by a few hundredths; compare the mean over seeds.
  const SynthSpec spec = SynthSpec::acm_like(100);
  for (std::size_t i = 0; i < spec.metapaths.size(); ++i) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) mean += *homophily_report(synth_graph(spec, RngStream(seed, 0))).ratios[i] / 5.0;
    EXPECT_NEAR(mean, expected_homophily(spec, i), 0.05) << spec.metapaths[i].name;
  }
}

TEST(Synth, EqualAttachWeightsGiveBaselineHomophily) {
  SynthSpec spec = SynthSpec::acm_like(100);
  for (auto& rel : spec.relations) rel.intra = rel.inter = 0.5;
  const HetGraph g = synth_graph(spec, RngStream(2, 0));
  const double base = class_frequency_baseline(*g.labels);
  for (const auto& h : homophily_report(g).ratios) EXPECT_NEAR(*h, base, 0.05);
}

TEST(Synth, ZeroNoiseAttributesAreOrthogonalCentroids) {
  SynthSpec spec = SynthSpec::acm_like(10);
  spec.attr_noise = 0.0;
  const HetGraph g = synth_graph(spec, RngStream(4, 0));
  const Mat& x = *g.attrs[0];
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) EXPECT_EQ(x(i, j), double(std::size_t((*g.labels)[i]) == j));
}

TEST(Synth, SameSeedSameGraph) {
  const SynthSpec spec = SynthSpec::acm_like(30);
  const HetGraph a = synth_graph(spec, RngStream(9, 0)), b = synth_graph(spec, RngStream(9, 0));
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(*a.attrs[0], *b.attrs[0]);
  EXPECT_EQ(*a.labels, *b.labels);
}

TEST(Synth, SpecErrorsCarryLineNumbers) {
  try {
    SynthSpec::parse("classes 3\ntarget paper 30\nrelation writes paper author 2 0.9 0.1\n");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("undeclared type"), std::string::npos);
  }
  EXPECT_THROW(SynthSpec::parse("bogus 1\n"), SpecError);
  EXPECT_THROW(SynthSpec::parse("target p 3\nmetapath X p\n"), SpecError);
}

}  // namespace
