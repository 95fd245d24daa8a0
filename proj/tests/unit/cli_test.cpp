#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mug/cli/app.hpp"

namespace fs = std::filesystem;

namespace {

using namespace mug;

struct Result {
  int code;
  std::string out, err;
};

Result mug_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

int mug_exec(const std::string& args) {
  const int status = std::system((std::string(MUG_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() / ("mug_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }

  // Small bundle and a fast config shared by most tests.
  std::string small_bundle(const std::string& name, std::uint64_t seed = 1, std::size_t per_class = 20) {
    write_file(p(name + ".spec"), "classes 3\ntarget paper " + std::to_string(3 * per_class) +
                                      "\ntype author " + std::to_string(per_class) +
                                      "\ntype subject 10\nattr_dim 6\n"
                                      "relation writes paper author 2 0.9 0.1\nrelation about paper subject 1 0.9 0.1\n"
                                      "metapath PAP paper writes author writes paper\nmetapath PSP paper about subject about paper\n");
    const auto r = mug_run({"synth", "--spec", p(name + ".spec"), "--out", p(name), "--seed", std::to_string(seed)});
    EXPECT_EQ(r.code, 0) << r.err;
    return p(name);
  }
  std::string fast_config() {
    write_file(p("fast.cfg"), "# quick run\nepochs = 5\nwalks_per_node = 3\nwalk_length = 8\nstruct_dim = 8\nstruct_epochs = 1\nsample_size = 16\nunified_dim 8\nlearning_rate = 0.01\n");
    return p("fast.cfg");
  }
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : lines_of(text)) {
    std::vector<std::string> cells;
    for (auto c : split(line, ',')) cells.emplace_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(mug_run({"--help"}).code, cli::kOk);
  EXPECT_EQ(mug_run({}).code, cli::kUsage);
  EXPECT_EQ(mug_run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(mug_run({"pretrain", "--out", p("x")}).code, cli::kUsage);
  EXPECT_EQ(mug_exec("synth"), cli::kUsage);
}

TEST_F(Cli, SynthDefaultSpecLoadsBack) {
  const auto r = mug_run({"synth", "--out", p("d"), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> warnings;
  const HetGraph g = load_bundle(p("d"), &warnings);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(g.num_classes(), 3u);
  EXPECT_TRUE(fs::exists(p("d/synth.config")));
}

TEST_F(Cli, SynthSameSeedIsByteIdentical) {
  small_bundle("a", 5);
  small_bundle("b", 5);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(p("a"))) {
    const auto name = e.path().filename().string();
    if (name == "synth.config") continue;
    EXPECT_EQ(read_file(e.path()), read_file(dir / "b" / name)) << name;
    ++files;
  }
  EXPECT_GE(files, 5u);
  small_bundle("c", 6);
  EXPECT_NE(read_file(p("a/edges.tsv")), read_file(p("c/edges.tsv")));
}

TEST_F(Cli, SynthSpecErrorsCarryLineNumbers) {
  write_file(p("bad.spec"), "classes 3\ntarget paper 30\nrelation writes paper ghost 1 0.9 0.1\n");
  const auto r = mug_run({"synth", "--spec", p("bad.spec"), "--out", p("d")});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(Cli, SynthHomophilyMatchesTarget) {
  const SynthSpec spec = SynthSpec::acm_like();
  std::vector<double> mean(spec.metapaths.size(), 0.0);
  for (int seed = 0; seed < 5; ++seed) {
    ASSERT_EQ(mug_run({"synth", "--out", p("s"), "--seed", std::to_string(seed)}).code, 0);
    ASSERT_EQ(mug_run({"homophily", "--data", p("s"), "--out", p("h.csv")}).code, 0);
    const auto rows = csv_rows(read_file(p("h.csv")));
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += *parse_double(rows[i + 1][1]) / 5.0;
  }
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(mean[i], expected_homophily(spec, i), 0.05) << spec.metapaths[i].name;
}

void four_paper_bundle(const fs::path& d, const std::string& labels) {
  fs::create_directories(d);
  write_file(d / "schema.json", R"({"node_types":["paper","author"],
    "relations":[{"name":"pa","src":"paper","dst":"author"}],
    "target_type":"paper",
    "metapaths":[{"name":"PAP","steps":["paper","pa","author","pa","paper"]}]})");
  write_file(d / "nodes.tsv", "node_id\ttype\np1\tpaper\np2\tpaper\np3\tpaper\np4\tpaper\na1\tauthor\na2\tauthor\na3\tauthor\n");
  write_file(d / "edges.tsv", "src_id\trelation\tdst_id\np1\tpa\ta1\np2\tpa\ta1\np3\tpa\ta2\np4\tpa\ta2\np1\tpa\ta3\np3\tpa\ta3\n");
  write_file(d / "features.paper.tsv", "node_id\tf0\np1\t1\np2\t2\np3\t3\np4\t4\n");
  if (!labels.empty()) write_file(d / "labels.tsv", labels);
}

TEST_F(Cli, HomophilyHandBundle) {
  four_paper_bundle(dir / "hand", "node_id\tclass_id\np1\t0\np2\t0\np3\t1\np4\t1\n");
  const auto r = mug_run({"homophily", "--data", p("hand"), "--out", p("h.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(read_file(p("h.csv")));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"metapath", "homophily"}));
  EXPECT_NEAR(*parse_double(rows[1][1]), 2.0 / 3.0, 1e-15);
  EXPECT_NE(r.out.find("0.6667"), std::string::npos);
  EXPECT_TRUE(fs::exists(p("h.csv.config")));
}

TEST_F(Cli, HomophilyUniformLabelsGiveOne) {
  four_paper_bundle(dir / "uni", "node_id\tclass_id\np1\t0\np2\t0\np3\t0\np4\t0\n");
  ASSERT_EQ(mug_run({"homophily", "--data", p("uni"), "--out", p("h.csv")}).code, 0);
  const auto rows = csv_rows(read_file(p("h.csv")));
  EXPECT_EQ(rows[1][1], "1");
  EXPECT_EQ(rows[2][1], "1");
}

TEST_F(Cli, HomophilyAverageIsMeanOfRatios) {
  ASSERT_EQ(mug_run({"homophily", "--data", small_bundle("g"), "--out", p("h.csv")}).code, 0);
  const auto rows = csv_rows(read_file(p("h.csv")));
  ASSERT_EQ(rows[3][0], "average");
  EXPECT_NEAR(*parse_double(rows[3][1]), (*parse_double(rows[1][1]) + *parse_double(rows[2][1])) / 2.0, 1e-15);
}

TEST_F(Cli, HomophilyRejectsUnlabeledBundle) {
  four_paper_bundle(dir / "nolab", "");
  const auto r = mug_run({"homophily", "--data", p("nolab"), "--out", p("h.csv")});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("no labels"), std::string::npos);
}

TEST_F(Cli, PretrainNoScatterZerosTheColumn) {
  const auto data = small_bundle("g");
  const auto r = mug_run({"pretrain", "--data", data, "--config", fast_config(), "--out", p("m.ckpt"), "--no-scatter"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(read_file(p("m.ckpt.loss.csv")));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"epoch", "l_align", "l_recon_weighted", "l_scatter", "total"}));
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "0");
  EXPECT_NE(read_file(p("m.ckpt.config")).find("no_scatter = true"), std::string::npos);
}

TEST_F(Cli, PretrainZeroEpochsWritesInitialCheckpoint) {
  const auto r = mug_run({"pretrain", "--data", small_bundle("g"), "--config", fast_config(), "--epochs", "0", "--out", p("m.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const MugModel m = load_model(p("m.ckpt"));
  EXPECT_EQ(m.k(), 8u);
  EXPECT_EQ(lines_of(read_file(p("m.ckpt.loss.csv"))).size(), 1u);
}

TEST_F(Cli, PretrainIsByteIdenticalAcrossRuns) {
  const auto data = small_bundle("g");
  const auto cfg = fast_config();
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", cfg, "--out", p("a.ckpt")}).code, 0);
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", cfg, "--out", p("b.ckpt")}).code, 0);
  EXPECT_EQ(read_file(p("a.ckpt")), read_file(p("b.ckpt")));
  EXPECT_EQ(read_file(p("a.ckpt.loss.csv")), read_file(p("b.ckpt.loss.csv")));
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", cfg, "--seed", "9", "--out", p("c.ckpt")}).code, 0);
  EXPECT_NE(read_file(p("a.ckpt")), read_file(p("c.ckpt")));
}

TEST_F(Cli, ConfigEchoReplaysTheRun) {
  const auto data = small_bundle("g");
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", fast_config(), "--set", "gamma=3", "--seed", "4", "--out", p("a.ckpt")}).code, 0);
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", p("a.ckpt.config"), "--out", p("b.ckpt")}).code, 0);
  EXPECT_EQ(read_file(p("a.ckpt")), read_file(p("b.ckpt")));
  const std::string echo = read_file(p("a.ckpt.config"));
  EXPECT_NE(echo.find("gamma = 3"), std::string::npos);
  EXPECT_NE(echo.find("seed = 4"), std::string::npos);
  EXPECT_NE(echo.find("repeats = "), std::string::npos);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  write_file(p("c.cfg"), read_file(fast_config()) + "epochs = 4\n");
  ASSERT_EQ(mug_run({"pretrain", "--data", small_bundle("g"), "--config", p("c.cfg"), "--epochs", "2", "--out", p("m.ckpt")}).code, 0);
  EXPECT_EQ(lines_of(read_file(p("m.ckpt.loss.csv"))).size(), 3u);
}

TEST_F(Cli, UnknownConfigKeyRejected) {
  const auto data = small_bundle("g");
  write_file(p("bad.cfg"), "epochs = 2\nlearnin_rate = 0.1\n");
  auto r = mug_run({"pretrain", "--data", data, "--config", p("bad.cfg"), "--out", p("m.ckpt")});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("learnin_rate"), std::string::npos);
  r = mug_run({"pretrain", "--data", data, "--set", "nope=1", "--out", p("m.ckpt")});
  EXPECT_EQ(r.code, cli::kData);
  write_file(p("bad2.cfg"), "epochs = 2\njunkline\n");
  r = mug_run({"pretrain", "--data", data, "--config", p("bad2.cfg"), "--out", p("m.ckpt")});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(p("m.ckpt")));
}

TEST_F(Cli, DivergenceExitsWithNumericalCode) {
  const auto r = mug_run({"pretrain", "--data", small_bundle("g"), "--config", fast_config(), "--set", "optimizer=sgd", "--set", "learning_rate=1e6", "--set", "lambda_scatter=100",
                          "--epochs", "200", "--out", p("m.ckpt")});
  EXPECT_EQ(r.code, cli::kNumerical) << r.err;
  EXPECT_NE(r.err.find("diverged"), std::string::npos);
}

TEST_F(Cli, EmbedShapesBetaAndFrozenCheckpoint) {
  const auto data = small_bundle("g");
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", fast_config(), "--out", p("m.ckpt")}).code, 0);
  const std::string before = read_file(p("m.ckpt"));
  const auto other = small_bundle("h", 2, 30);
  const auto r = mug_run({"embed", "--model", p("m.ckpt"), "--data", other, "--out", p("z.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(read_file(p("z.tsv")));
  ASSERT_EQ(rows.size(), 90u);
  EXPECT_EQ(split(rows[0], '\t').size(), 9u);
  double sum = 0.0;
  const auto beta = lines_of(read_file(p("z.tsv.beta.csv")));
  ASSERT_EQ(beta.size(), 1u);
  for (auto v : split(beta[0], ',')) sum += *parse_double(v);
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(read_file(p("m.ckpt")), before);
  EXPECT_TRUE(fs::exists(p("z.tsv.config")));
}

TEST_F(Cli, EmbedSchemaMismatchIsDataError) {
  ASSERT_EQ(mug_run({"pretrain", "--data", small_bundle("g"), "--config", fast_config(), "--no-cse", "--out", p("m.ckpt")}).code, 0);
  four_paper_bundle(dir / "noattr", "");
  fs::remove(dir / "noattr" / "features.paper.tsv");
  const auto r = mug_run({"embed", "--model", p("m.ckpt"), "--data", p("noattr"), "--out", p("z.tsv")});
  EXPECT_EQ(r.code, cli::kData);
  write_file(p("broken.ckpt"), "MUG-CKPT v1\n[dimalign]\nn_s x\n");
  EXPECT_EQ(mug_run({"embed", "--model", p("broken.ckpt"), "--data", small_bundle("g2"), "--out", p("z.tsv")}).code, cli::kData);
}

TEST_F(Cli, EvalRowsShotsAndFrozenModel) {
  const auto a = small_bundle("A");
  ASSERT_EQ(mug_run({"pretrain", "--data", a, "--config", fast_config(), "--out", p("m.ckpt")}).code, 0);
  const std::string before = read_file(p("m.ckpt"));
  const auto b = small_bundle("B", 2), c = small_bundle("C", 3);

  auto r = mug_run({"eval", "--model", p("m.ckpt"), "--train-data", a, "--eval-data", b, "--repeats", "3", "--out", p("one.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv_rows(read_file(p("one.csv")));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "full");
  EXPECT_EQ(rows[1][1], "A");
  EXPECT_EQ(rows[1][2], "B");
  EXPECT_EQ(rows[1][3], "0");

  r = mug_run({"eval", "--model", p("m.ckpt"), "--train-data", a, "--eval-data", a, b, c, "--shots", "1", "--repeats", "3", "--out", p("three.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  rows = csv_rows(read_file(p("three.csv")));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(rows[i][3], "1");
  const std::string echo = read_file(p("three.csv.config"));
  EXPECT_NE(echo.find("train_per_class = 1"), std::string::npos);
  EXPECT_NE(echo.find("repeats = 3"), std::string::npos);
  EXPECT_EQ(read_file(p("m.ckpt")), before);

  EXPECT_EQ(mug_run({"eval", "--model", p("m.ckpt"), "--train-data", a, "--eval-data", b, "--shots", "2"}).code, cli::kUsage);
  EXPECT_EQ(mug_run({"eval", "--model", p("m.ckpt"), "--train-data", a, "--eval-data", b, "--repeats", "1", "--out", p("x.csv")}).code, cli::kData);
}

TEST_F(Cli, GradcheckPassesAndDetectsFault) {
  const auto r = mug_run({"gradcheck"});
  EXPECT_EQ(r.code, 0);
  std::size_t checks = 0;
  for (const auto& line : lines_of(r.out))
    if (line.find(" 20 ") != std::string::npos) ++checks;
  EXPECT_GE(checks, 5u);
  EXPECT_EQ(mug_exec("gradcheck"), 0);
  EXPECT_EQ(mug_exec("gradcheck --inject-fault"), cli::kNumerical);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutputs) {
  const auto data = small_bundle("g");
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", fast_config(), "--out", p("a.ckpt")}).code, 0);
  ASSERT_EQ(mug_run({"pretrain", "--data", data, "--config", fast_config(), "--threads", "3", "--out", p("b.ckpt")}).code, 0);
  EXPECT_EQ(read_file(p("a.ckpt")), read_file(p("b.ckpt")));
}

}  // namespace
