#include <sys/wait.h>

#include <cstdlib>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "saenad/cli/commands.hpp"
#include "saenad/cli/config.hpp"
#include "saenad/cli/synth.hpp"
#include "saenad/error.hpp"

using namespace saenad;
using namespace saenad::cli;
using oracle::read_text;
using oracle::TempDir;
using oracle::write_text;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run run_tool(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string(SAENAD_TOOL_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

const char* kPipelineConfig = R"(# small end-to-end run
checkins = data/checkins.tsv
coords = data/coords.tsv
cache_dir = cache
checkpoint = model.bin
report = report.tsv
report_json = report.json
log = train.log
seed = 7
min_user_checkins = 5
min_poi_visits = 2
hidden1 = 16
hidden = 8
aspects = 4
batch_size = 8
num_iterations = 3
cutoffs = 5, 10, 20
synth_clusters = 3
synth_pois_per_cluster = 10
synth_users = 25
synth_checkins_per_user = 15
)";

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg", "/base");
}

}  // namespace

TEST(Config, DefaultsMirrorTheReportedSetup) {
  const auto c = parse("");
  EXPECT_EQ(c.arch.hidden1, 200u);
  EXPECT_EQ(c.arch.hidden, 50u);
  EXPECT_EQ(c.arch.aspects, 20u);
  EXPECT_EQ(c.arch.dropout, 0.5);
  EXPECT_EQ(c.kernel.gamma, 60.0);
  EXPECT_EQ(c.train.alpha, 2.0);
  EXPECT_EQ(c.train.epsilon, 1e-5);
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.train.lambda, 1e-3);
  EXPECT_EQ(c.train.batch_size, 256u);
  EXPECT_EQ(c.min_user_checkins, 20u);
  EXPECT_EQ(c.min_poi_visits, 20u);
  EXPECT_EQ(c.cutoffs, (std::vector<std::size_t>{5, 10, 20}));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesValuesAndResolvesPaths) {
  const auto c = parse("checkins = in/c.tsv\ncoords=/abs/p.tsv\nvariant = NAD-WAE\nseed = 42 # trailing\ncutoffs=1,3\n");
  EXPECT_EQ(c.checkins, std::filesystem::path("/base/in/c.tsv"));
  EXPECT_EQ(c.coords, std::filesystem::path("/abs/p.tsv"));
  EXPECT_EQ(c.arch.variant, Variant::NAD_WAE);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.split.seed, 42u);
  EXPECT_EQ(c.cutoffs, (std::vector<std::size_t>{1, 3}));
}

TEST(Config, GowallaPresetWidensTheOuterLayer) {
  EXPECT_EQ(parse("preset = gowalla\n").arch.hidden1, 500u);
}

TEST(Config, HaversineGetsItsOwnDefaultGamma) {
  EXPECT_NEAR(parse("metric = haversine-km\n").kernel.gamma, oracle::kHaversineGamma, 1e-15);
  EXPECT_EQ(parse("metric = haversine-km\ngamma = 2\n").kernel.gamma, 2.0);
}

TEST(Config, RejectsUnknownRepeatedAndMalformedKeys) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("seed = 1\nlearning_rat = 0.1\n"), 2u);
  EXPECT_EQ(line_of("seed = 1\n\nseed = 2\n"), 3u);
  EXPECT_EQ(line_of("seed\n"), 1u);
  EXPECT_EQ(line_of("seed =\n"), 1u);
  EXPECT_EQ(line_of("learning_rate = fast\n"), 1u);
  EXPECT_EQ(line_of("learning_rate = nan\n"), 1u);
  EXPECT_EQ(line_of("variant = XYZ\n"), 1u);
}

TEST(Config, ValidateCatchesOutOfRangeValues) {
  EXPECT_THROW(parse("test_fraction = 1.5\n").validate(), ValidationError);
  EXPECT_THROW(parse("dropout = 1\n").validate(), ValidationError);
  EXPECT_THROW(parse("partition_count = 2\npartition = 2\n").validate(), ValidationError);
  EXPECT_THROW(parse("cutoffs = 0\n").validate(), ValidationError);
  EXPECT_THROW(parse("synth_intra_prob = 0\n").validate(), ValidationError);
}

TEST(Synth, CountsAndDeterminism) {
  SyntheticSpec s;
  s.clusters = 5;
  s.pois_per_cluster = 10;
  s.users = 8;
  s.checkins_per_user = 12;
  s.seed = 3;
  const auto a = generate_synthetic(s);
  EXPECT_EQ(a.catalog.size(), 50u);
  EXPECT_EQ(a.user_ids.size(), 8u);
  EXPECT_EQ(a.visits.size(), 96u);
  const auto b = generate_synthetic(s);
  std::ostringstream ca, cb, pa, pb;
  write_checkins(ca, a);
  write_checkins(cb, b);
  write_coords(pa, a);
  write_coords(pb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(pa.str(), pb.str());
  s.seed = 4;
  std::ostringstream cc;
  write_checkins(cc, generate_synthetic(s));
  EXPECT_NE(ca.str(), cc.str());
}

TEST(Synth, FullIntraProbabilityStaysHome) {
  SyntheticSpec s;
  s.intra_cluster_prob = 1.0;
  s.users = 20;
  const auto d = generate_synthetic(s);
  for (const auto& v : d.visits) EXPECT_EQ(d.cluster_of[v.poi], d.home_cluster[v.user]);
}

TEST(Synth, OutputParsesBack) {
  SyntheticSpec s;
  s.users = 10;
  const auto d = generate_synthetic(s);
  std::ostringstream c, p;
  write_checkins(c, d);
  write_coords(p, d);
  std::istringstream ci(c.str()), pi(p.str());
  const auto log = parse_checkins(ci, pi, "checkins", "coords");
  EXPECT_EQ(log.records.size(), d.visits.size());
  EXPECT_EQ(log.poi_count(), d.catalog.size());
  EXPECT_EQ(log.user_count(), 10u);
}

TEST(Tool, PipelineRunsAndIsRepeatable) {
  TempDir dir("cli-pipeline");
  write_text(dir / "run.cfg", kPipelineConfig);
  const std::string cfg = "--config " + (dir / "run.cfg").string();

  auto synth = run_tool(dir, cfg + " synth");
  ASSERT_EQ(synth.status, 0) << synth.err;
  EXPECT_NE(synth.out.find("pois\t30"), std::string::npos);

  auto pre = run_tool(dir, cfg + " preprocess");
  ASSERT_EQ(pre.status, 0) << pre.err;
  EXPECT_EQ(pre.out.rfind("cache written", 0), 0u);
  const auto manifest = read_text(dir / "cache" / "manifest.txt");
  EXPECT_NE(manifest.find("min_user_checkins\t5\n"), std::string::npos);
  EXPECT_NE(manifest.find("min_poi_visits\t2\n"), std::string::npos);
  EXPECT_NE(manifest.find("density\t"), std::string::npos);

  auto again = run_tool(dir, cfg + " preprocess");
  ASSERT_EQ(again.status, 0) << again.err;
  EXPECT_EQ(again.out.rfind("cache hit", 0), 0u);
  EXPECT_EQ(again.out.substr(again.out.find("users")), pre.out.substr(pre.out.find("users")));
  EXPECT_EQ(read_text(dir / "cache" / "manifest.txt"), manifest);

  auto train = run_tool(dir, cfg + " train");
  ASSERT_EQ(train.status, 0) << train.err;
  EXPECT_NE(train.out.find("final_epoch_objective\t"), std::string::npos);
  const auto log = read_text(dir / "train.log");
  EXPECT_EQ(log.rfind("iteration\tbatch\tobjective\n", 0), 0u);
  const auto model = read_text(dir / "model.bin");

  auto eval = run_tool(dir, cfg + " eval");
  ASSERT_EQ(eval.status, 0) << eval.err;
  EXPECT_EQ(eval.out.rfind("k\tprecision\trecall\tmap\n5\t", 0), 0u);
  EXPECT_EQ(std::count(eval.out.begin(), eval.out.end(), '\n'), 4);
  EXPECT_EQ(read_text(dir / "report.tsv"), eval.out);
  EXPECT_NE(read_text(dir / "report.json").find("\"cutoffs\""), std::string::npos);

  auto eval2 = run_tool(dir, cfg + " eval");
  EXPECT_EQ(eval2.out, eval.out);

  auto retrain = run_tool(dir, cfg + " train");
  ASSERT_EQ(retrain.status, 0) << retrain.err;
  EXPECT_EQ(read_text(dir / "model.bin"), model);
  EXPECT_EQ(read_text(dir / "train.log"), log);

  ASSERT_EQ(run_tool(dir, cfg + " --seed 8 preprocess").status, 0);
  auto other_seed = run_tool(dir, cfg + " --seed 8 train");
  ASSERT_EQ(other_seed.status, 0) << other_seed.err;
  EXPECT_NE(read_text(dir / "model.bin"), model);
}

TEST(Tool, ZeroIterationsWritesTheSeededInitialization) {
  TempDir dir("cli-zero");
  std::string cfg_text = kPipelineConfig;
  cfg_text.replace(cfg_text.find("num_iterations = 3"), 18, "num_iterations = 0");
  write_text(dir / "run.cfg", cfg_text);
  const std::string cfg = "--config " + (dir / "run.cfg").string();
  ASSERT_EQ(run_tool(dir, cfg + " synth").status, 0);
  ASSERT_EQ(run_tool(dir, cfg + " preprocess").status, 0);
  const auto r = run_tool(dir, cfg + " train");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto ck = load_checkpoint(dir / "model.bin");
  const auto init = ModelParams::initialize(ck.params.arch, 7);
  EXPECT_EQ(ck.params.w.W1, init.w.W1);
  EXPECT_EQ(ck.params.w.W4, init.w.W4);
  const auto e = run_tool(dir, cfg + " eval");
  EXPECT_EQ(e.status, 0) << e.err;
}

TEST(Tool, ExitCodesAreDistinct) {
  TempDir dir("cli-codes");
  write_text(dir / "bad.cfg", "learning_rat = 1\n");
  EXPECT_EQ(run_tool(dir, "--config " + (dir / "bad.cfg").string() + " train").status, kExitValidation);

  write_text(dir / "range.cfg", "dropout = 2\n");
  EXPECT_EQ(run_tool(dir, "--config " + (dir / "range.cfg").string() + " gradcheck").status, kExitValidation);

  write_text(dir / "missing.cfg", "checkins = nowhere.tsv\ncoords = nowhere2.tsv\ncache_dir = cache\n");
  const auto missing = run_tool(dir, "--config " + (dir / "missing.cfg").string() + " preprocess");
  EXPECT_EQ(missing.status, kExitIo);
  EXPECT_FALSE(std::filesystem::exists(dir / "cache" / "manifest.txt"));
  EXPECT_EQ(run_tool(dir, "--config " + (dir / "missing.cfg").string() + " eval").status, kExitIo);

  EXPECT_EQ(run_tool(dir, "").status, kExitUsage);
  EXPECT_EQ(run_tool(dir, "frobnicate").status, kExitUsage);
  EXPECT_EQ(run_tool(dir, "--threads 0 gradcheck").status, kExitUsage);
  EXPECT_EQ(run_tool(dir, "--help").status, kExitOk);
}

TEST(Tool, DivergenceHasItsOwnExitCode) {
  TempDir dir("cli-diverge");
  std::string cfg_text = kPipelineConfig;
  cfg_text += "learning_rate = 1e300\n";
  write_text(dir / "run.cfg", cfg_text);
  const std::string cfg = "--config " + (dir / "run.cfg").string();
  ASSERT_EQ(run_tool(dir, cfg + " synth").status, 0);
  ASSERT_EQ(run_tool(dir, cfg + " preprocess").status, 0);
  const auto r = run_tool(dir, cfg + " train");
  EXPECT_EQ(r.status, kExitDivergence) << r.out << r.err;
}

TEST(Tool, MissingCoordinatesLeaveNoPartialCache) {
  TempDir dir("cli-partial");
  write_text(dir / "run.cfg", kPipelineConfig);
  const std::string cfg = "--config " + (dir / "run.cfg").string();
  ASSERT_EQ(run_tool(dir, cfg + " synth").status, 0);
  std::filesystem::remove(dir / "data" / "coords.tsv");
  const auto r = run_tool(dir, cfg + " preprocess");
  EXPECT_EQ(r.status, kExitIo);
  EXPECT_NE(r.err.find("coords.tsv"), std::string::npos);
  if (std::filesystem::exists(dir / "cache")) {
    for (const auto& entry : std::filesystem::directory_iterator(dir / "cache")) {
      EXPECT_EQ(entry.path().filename(), ".lock");
    }
  }
}

TEST(Tool, EvalRejectsCheckpointOfAnotherSize) {
  TempDir dir("cli-shape");
  write_text(dir / "run.cfg", kPipelineConfig);
  const std::string cfg = "--config " + (dir / "run.cfg").string();
  ASSERT_EQ(run_tool(dir, cfg + " synth").status, 0);
  ASSERT_EQ(run_tool(dir, cfg + " preprocess").status, 0);
  save_checkpoint(dir / "model.bin", ModelParams::initialize({3, 4, 2, 2, Variant::SAE_NAD, 0.5}, 1), 1);
  const auto r = run_tool(dir, cfg + " eval");
  EXPECT_EQ(r.status, kExitValidation);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Tool, GradcheckPassesAndCatchesCorruption) {
  TempDir dir("cli-gradcheck");
  const auto ok = run_tool(dir, "gradcheck");
  EXPECT_EQ(ok.status, 0) << ok.out;
  for (const char* v : {"WAE\t", "SAE-WAE\t", "NAD-WAE\t", "SAE-NAD\t"}) EXPECT_NE(ok.out.find(v), std::string::npos);
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  EXPECT_EQ(run_tool(dir, "--seed 12 gradcheck").status, 0);
  const auto bad = run_tool(dir, "gradcheck --corrupt-gradient");
  EXPECT_EQ(bad.status, kExitGradcheck);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}
