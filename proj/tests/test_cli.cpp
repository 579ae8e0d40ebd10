#include "anchorgae/commands.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace anchorgae;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run() {
  RunConfig cfg;
  cfg.format = "blobs";
  cfg.input = "n=240,d=6,sep=8";
  cfg.clusters = 3;
  cfg.anchors = 24;
  cfg.layers = {12, 6};
  cfg.outer_epochs = 2;
  cfg.inner_epochs = 15;
  cfg.seed = 3;
  return cfg;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("anchorgae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::size_t file_count() const { return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir_), fs::directory_iterator())); }

  fs::path dir_;
};

std::string strip_runtime(const std::string& report) {
  return std::regex_replace(report, std::regex("\"runtime_seconds\": [^,\n]+"), "\"runtime_seconds\": 0");
}

}  // namespace

TEST(ReportJson, RoundTripsThroughStrictParser) {
  ClusterReport r;
  r.config = tiny_run();
  r.config.label_col = -1;
  r.dataset = {"blobs", 240, 6, 3};
  r.acc = 0.75;
  r.nmi = 0.5;
  r.runtime_seconds = 1.25;
  r.loss_traces = {{3.0, 2.5}, {2.0}};
  CollapseDiagnostics d;
  d.iteration = 1;
  d.k = 5;
  d.uniformity_gap = 0.1;
  d.mean_uniformity_gap = 0.05;
  d.component_count = 2;
  d.reconstruction_gap = 0.3;
  r.diagnostics = {d};
  r.k_path = {3, 5};
  r.warnings = {"w"};
  const std::string text = dump_report(r);
  const ClusterReport back = parse_report(text);
  EXPECT_EQ(dump_report(back), text);
  EXPECT_EQ(back.config.label_col, -1);
  EXPECT_EQ(back.diagnostics[0].component_count, 2);
}

TEST(ReportJson, NullMetricsWithoutLabels) {
  ClusterReport r;
  r.config = tiny_run();
  const ClusterReport back = parse_report(dump_report(r));
  EXPECT_FALSE(back.acc.has_value());
  EXPECT_FALSE(back.config.n_s.has_value());
}

TEST(ReportJson, RejectsUnknownMissingAndWrongVersion) {
  ClusterReport r;
  r.config = tiny_run();
  Json j = to_json(r);
  Json extra = j;
  extra["surprise"] = 1;
  EXPECT_THROW(parse_report(extra.dump()), ReportError);
  Json missing = j;
  missing.erase("k_path");
  EXPECT_THROW(parse_report(missing.dump()), ReportError);
  Json nested = j;
  nested["config"]["extra"] = true;
  EXPECT_THROW(parse_report(nested.dump()), ReportError);
  Json version = j;
  version["schema_version"] = 99;
  EXPECT_THROW(parse_report(version.dump()), ReportError);
  Json mode = j;
  mode["config"]["mode"] = "bogus";
  EXPECT_THROW(parse_report(mode.dump()), ReportError);
  EXPECT_THROW(parse_report("{not json"), ReportError);
}

TEST(RunConfigCheck, RejectsBadValues) {
  RunConfig c = tiny_run();
  c.clusters = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_run();
  c.k0 = c.anchors;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_run();
  c.format = "csv";
  c.input.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_run();
  c.layers = {};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SyntheticSpec, ParsesAndRejects) {
  const auto kv = detail::parse_synthetic_spec("n=10, d=3", {"n", "d"});
  EXPECT_EQ(kv.at("n"), 10.0);
  EXPECT_THROW(detail::parse_synthetic_spec("q=1", {"n"}), ConfigError);
  EXPECT_THROW(detail::parse_synthetic_spec("n", {"n"}), ConfigError);
  EXPECT_THROW(detail::parse_synthetic_spec("n=abc", {"n"}), ConfigError);
}

TEST_F(CliTest, FitWritesAllOutputsAndReportsAreReproducible) {
  OutputPaths out{path("r1.json"), path("labels.txt"), path("z.csv"), ""};
  std::ostringstream log, err;
  ASSERT_EQ(cmd_fit(tiny_run(), out, log, err), kExitOk) << err.str();
  const ClusterReport rep = parse_report(slurp(out.report));
  EXPECT_EQ(rep.dataset.n, 240);
  ASSERT_TRUE(rep.acc.has_value());
  EXPECT_EQ(load_labels(out.labels).size(), 240u);
  EXPECT_EQ(load_csv(out.embedding).x.cols(), 6);
  EXPECT_EQ(rep.k_path.size(), 3u);

  OutputPaths out2{path("r2.json"), "", "", ""};
  ASSERT_EQ(cmd_fit(tiny_run(), out2, log, err), kExitOk);
  EXPECT_EQ(strip_runtime(slurp(out.report)), strip_runtime(slurp(out2.report)));
}

TEST_F(CliTest, FitPrintsReportWhenNoPathGiven) {
  std::ostringstream log, err;
  ASSERT_EQ(cmd_fit(tiny_run(), OutputPaths{}, log, err), kExitOk);
  EXPECT_NO_THROW(parse_report(log.str()));
}

TEST_F(CliTest, MissingInputExitsOneWithoutOutputs) {
  RunConfig cfg = tiny_run();
  cfg.format = "csv";
  cfg.input = path("absent.csv");
  OutputPaths out{path("r.json"), path("l.txt"), path("z.csv"), ""};
  std::ostringstream log, err;
  EXPECT_EQ(cmd_fit(cfg, out, log, err), kExitConfig);
  EXPECT_NE(err.str().find("absent.csv"), std::string::npos);
  EXPECT_EQ(file_count(), 0u);
}

TEST_F(CliTest, TooManyAnchorsExitsOne) {
  RunConfig cfg = tiny_run();
  cfg.anchors = 1000;
  std::ostringstream log, err;
  EXPECT_EQ(cmd_fit(cfg, OutputPaths{path("r.json"), "", "", ""}, log, err), kExitConfig);
  EXPECT_EQ(file_count(), 0u);
}

TEST_F(CliTest, MissingOutputDirectoryExitsOne) {
  std::ostringstream log, err;
  EXPECT_EQ(cmd_fit(tiny_run(), OutputPaths{path("nodir/r.json"), "", "", ""}, log, err), kExitConfig);
}

TEST_F(CliTest, CsvWithLabelsFitsAndScores) {
  std::ofstream f(path("data.csv"));
  SeededRng rng(1);
  const Dataset ds = make_blobs(120, 3, 2, 12.0, rng);
  for (Index i = 0; i < ds.n(); ++i) f << ds.x(i, 0) << ',' << ds.x(i, 1) << ',' << ds.x(i, 2) << ",c" << (*ds.labels)[i] << '\n';
  f.close();
  RunConfig cfg = tiny_run();
  cfg.format = "csv";
  cfg.input = path("data.csv");
  cfg.label_col = -1;
  cfg.clusters = 2;
  cfg.anchors = 12;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_fit(cfg, OutputPaths{path("r.json"), "", "", ""}, log, err), kExitOk) << err.str();
  const ClusterReport rep = parse_report(slurp(path("r.json")));
  EXPECT_EQ(rep.dataset.d, 3);
  EXPECT_EQ(rep.dataset.classes, 2);
  EXPECT_GE(*rep.acc, 0.9);
}

TEST_F(CliTest, CollapseDemoWithoutRefitsGivesMatchingSingleRows) {
  RunConfig cfg = tiny_run();
  cfg.outer_epochs = 0;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_collapse_demo(cfg, OutputPaths{"", "", "", path("s.csv")}, log, err), kExitOk) << err.str();
  std::ifstream in(path("s.csv"));
  std::string header, a, b, extra;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header, "mode,iteration,k,uniformity_gap,mean_uniformity_gap,component_count,reconstruction_gap,acc");
  ASSERT_EQ(a.rfind("fixed-k,", 0), 0u);
  ASSERT_EQ(b.rfind("full,", 0), 0u);
  EXPECT_EQ(a.substr(8), b.substr(5));
}

TEST_F(CliTest, CollapseDemoFullModeKColumnGrows) {
  const auto rows = collapse_series(tiny_run(), load_dataset(tiny_run()));
  // n=240, m=24, n_s=80 -> k_max=8, delta_k=2
  std::vector<Index> full_k, fixed_k;
  for (const auto& r : rows) (r.mode == "full" ? full_k : fixed_k).push_back(r.k);
  EXPECT_EQ(full_k, (std::vector<Index>{3, 3, 5}));
  EXPECT_EQ(fixed_k, (std::vector<Index>{3, 3, 3}));
}

TEST(BenchCsv, InfinitySentinel) {
  const std::string csv = bench_csv({{100, 0.5, 0.25}, {200, 1.0, std::numeric_limits<double>::infinity()}});
  EXPECT_EQ(csv, "n,t_factored,t_dense\n100,0.5,0.25\n200,1,inf\n");
}

TEST_F(CliTest, BenchSmallRunAndValidation) {
  BenchConfig cfg;
  cfg.sizes = {300, 600};
  cfg.anchors = 20;
  cfg.dim = 8;
  cfg.layers = {8, 4};
  cfg.reps = 1;
  cfg.dense_cap = 300;
  std::ostringstream log, err;
  ASSERT_EQ(cmd_bench(cfg, OutputPaths{"", "", "", path("b.csv")}, log, err), kExitOk) << err.str();
  const std::string csv = slurp(path("b.csv"));
  EXPECT_NE(csv.find("\n600,"), std::string::npos);
  EXPECT_NE(csv.find(",inf\n"), std::string::npos);
  cfg.sizes = {600, 300};
  EXPECT_EQ(cmd_bench(cfg, OutputPaths{}, log, err), kExitConfig);
}

TEST_F(CliTest, EvalPrintsScores) {
  write_labels(path("p.txt"), {0, 0, 1, 1});
  write_labels(path("t.txt"), {1, 1, 0, 0});
  std::ostringstream log, err;
  ASSERT_EQ(cmd_eval(path("p.txt"), path("t.txt"), log, err), kExitOk);
  const Json j = Json::parse(log.str());
  EXPECT_EQ(j["acc"].get<double>(), 1.0);
  write_labels(path("short.txt"), {0});
  EXPECT_EQ(cmd_eval(path("p.txt"), path("short.txt"), log, err), kExitConfig);
  EXPECT_EQ(cmd_eval(path("missing.txt"), path("t.txt"), log, err), kExitConfig);
}

#ifdef ANCHORGAE_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = ANCHORGAE_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  auto run = [&](const std::string& args) { return WEXITSTATUS(std::system((bin + " " + args + quiet).c_str())); };
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("fit --format csv --input " + path("absent.csv") + " --report " + path("r.json")), 1);
  EXPECT_EQ(run("fit --mode sideways"), 1);
  EXPECT_EQ(run("fit --layers 8,x"), 1);
  EXPECT_EQ(file_count(), 0u);
  EXPECT_EQ(run("fit --input n=120,d=4 --clusters 2 --anchors 12 --layers 6,3 --outer-epochs 1 --inner-epochs 5 --report " + path("r.json")), 0);
  EXPECT_TRUE(fs::exists(path("r.json")));
}
#endif
