#include "anchorgae/commands.hpp"
#include "anchorgae/runtime.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace anchorgae;

namespace {

template <class T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = detail::parse_double(detail::trim(item));
    if (!v || *v != static_cast<double>(static_cast<T>(*v))) throw ConfigError(std::string(flag) + ": bad list entry '" + item + "'");
    out.push_back(static_cast<T>(*v));
  }
  if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
  return out;
}

struct RunFlags {
  RunConfig cfg;
  std::string layers = "128,64";
  std::string optimizer = "adam";
  std::string mode = "full";
  std::string scale = "on";
  std::string assign = "spectral";
  int label_col = 0;
  Index ns = 0;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--input", f.cfg.input, "CSV path; 'images,labels' IDX pair(s) separated by ';'; or synthetic spec like n=2000,d=16,sep=10");
  app->add_option("--format", f.cfg.format, "Input format")->check(CLI::IsMember({"csv", "idx", "blobs", "moons"}))->capture_default_str();
  app->add_option("--label-col", f.label_col, "CSV column holding class labels (negative counts from the end)");
  app->add_option("--clusters", f.cfg.clusters, "Number of clusters c")->capture_default_str();
  app->add_option("--anchors", f.cfg.anchors, "Number of anchors m")->capture_default_str();
  app->add_option("--layers", f.layers, "Encoder layer widths, comma separated")->capture_default_str();
  app->add_option("--k0", f.cfg.k0, "Initial sparsity")->capture_default_str();
  app->add_option("--outer-epochs", f.cfg.outer_epochs, "Graph refits E")->capture_default_str();
  app->add_option("--inner-epochs", f.cfg.inner_epochs, "Encoder epochs per refit")->capture_default_str();
  app->add_option("--lr", f.cfg.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--optimizer", f.optimizer, "gd or adam")->check(CLI::IsMember({"gd", "adam"}))->capture_default_str();
  app->add_option("--mode", f.mode,
                  "full; fixed-b (keep the initial graph); fixed-k (no sparsity growth); knn (unweighted kNN rows)")
      ->check(CLI::IsMember({"full", "fixed-b", "fixed-k", "knn"}))
      ->capture_default_str();
  app->add_option("--ns", f.ns, "Smallest-cluster size estimate (default n / c)");
  app->add_option("--seed", f.cfg.seed, "Random seed")->capture_default_str();
  app->add_option("--scale", f.scale, "Min-max scale features")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  app->add_option("--assign", f.assign, "Label extraction: spectral (bipartite SVD) or kmeans (on the embedding)")
      ->check(CLI::IsMember({"spectral", "kmeans"}))
      ->capture_default_str();
}

RunConfig finish(const CLI::App* app, RunFlags& f) {
  RunConfig cfg = f.cfg;
  cfg.layers = parse_list<Index>(f.layers, "--layers");
  cfg.optimizer = f.optimizer == "gd" ? Optimizer::gd : Optimizer::adam;
  cfg.mode = parse_loop_mode(f.mode);
  cfg.scale = f.scale == "on";
  cfg.assign = parse_assign_route(f.assign);
  if (app->count("--label-col")) cfg.label_col = f.label_col;
  if (app->count("--ns")) cfg.n_s = f.ns;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Anchor-graph auto-encoder clustering"};
  app.require_subcommand(1);

  RunFlags fit_flags;
  OutputPaths fit_out;
  auto* fit = app.add_subcommand("fit", "Cluster a dataset and write a JSON report");
  add_run_flags(fit, fit_flags);
  fit->add_option("--report", fit_out.report, "JSON report path (stdout when omitted)");
  fit->add_option("--labels-out", fit_out.labels, "Predicted labels, one per line");
  fit->add_option("--embedding-out", fit_out.embedding, "Final embedding as CSV");

  RunFlags demo_flags;
  OutputPaths demo_out;
  auto* demo = app.add_subcommand("collapse-demo", "Run fixed-k and full modes side by side and emit per-iteration diagnostics");
  add_run_flags(demo, demo_flags);
  demo->add_option("--series-out", demo_out.series, "CSV path (stdout when omitted)");

  BenchConfig bench_cfg;
  std::string sizes = "10000,20000,40000";
  std::string bench_layers = "128,64";
  OutputPaths bench_out;
  auto* bench = app.add_subcommand("bench", "Time the factored forward pass against the dense-adjacency reference");
  bench->add_option("--sizes", sizes, "Ascending sample counts")->capture_default_str();
  bench->add_option("--anchors", bench_cfg.anchors, "Number of anchors m")->capture_default_str();
  bench->add_option("--dim", bench_cfg.dim, "Feature dimension d")->capture_default_str();
  bench->add_option("--layers", bench_layers, "Encoder layer widths")->capture_default_str();
  bench->add_option("--k", bench_cfg.k, "Row sparsity of the benchmark graph")->capture_default_str();
  bench->add_option("--reps", bench_cfg.reps, "Timed repetitions per size (median reported)")->capture_default_str();
  bench->add_option("--dense-cap", bench_cfg.dense_cap, "Largest n for the dense path; larger sizes record inf")->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed, "Random seed")->capture_default_str();
  bench->add_option("--series-out", bench_out.series, "CSV path");

  std::string pred_path, truth_path;
  auto* eval = app.add_subcommand("eval", "ACC and NMI of a label file against ground truth");
  eval->add_option("--pred", pred_path, "Predicted labels, one per line")->required();
  eval->add_option("--truth", truth_path, "True labels, one per line")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*fit) return cmd_fit(finish(fit, fit_flags), fit_out, std::cout, std::cerr);
    if (*demo) return cmd_collapse_demo(finish(demo, demo_flags), demo_out, std::cout, std::cerr);
    if (*bench) {
      bench_cfg.sizes = parse_list<Index>(sizes, "--sizes");
      bench_cfg.layers = parse_list<Index>(bench_layers, "--layers");
      return cmd_bench(bench_cfg, bench_out, std::cout, std::cerr);
    }
    if (*eval) return cmd_eval(pred_path, truth_path, std::cout, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
