#pragma once

// Command bodies behind the CLI. Each returns a process exit code:
// 0 success, 1 configuration/input error, 2 runtime failure.

#include "anchorgae/bench.hpp"
#include "anchorgae/data_io.hpp"
#include "anchorgae/pipeline.hpp"
#include "anchorgae/report.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace anchorgae {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct OutputPaths {
  std::string report;
  std::string labels;
  std::string embedding;
  std::string series;  // per-iteration / per-size CSV
};

/// Stages every output to a temp file and renames them only once all
/// writes succeeded, so a failed run leaves nothing behind.
class OutputBatch {
 public:
  void add(const std::string& path, std::string content) {
    if (!path.empty()) files_.emplace_back(path, std::move(content));
  }

  void commit() {
    std::vector<std::string> staged;
    try {
      for (const auto& [path, content] : files_) {
        write_file_atomic(path + ".stage", content);
        staged.push_back(path);
      }
      for (const auto& path : staged) std::filesystem::rename(path + ".stage", path);
    } catch (...) {
      std::error_code ec;
      for (const auto& path : staged) std::filesystem::remove(path + ".stage", ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

namespace detail {

inline void check_output_dir(const std::string& path, const char* flag) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw ConfigError(std::string(flag) + ": directory '" + parent.string() + "' does not exist");
  }
}

inline std::string labels_to_text(const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) out += std::to_string(l) + '\n';
  return out;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace detail

inline int cmd_fit(const RunConfig& cfg, const OutputPaths& out, std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    cfg.validate();
    detail::check_output_dir(out.report, "--report");
    detail::check_output_dir(out.labels, "--labels-out");
    detail::check_output_dir(out.embedding, "--embedding-out");
    const Dataset ds = load_dataset(cfg);
    const PipelineResult r = cluster(ds.x, cfg.model_config(), cfg.assign);
    const ClusterReport rep = make_report(cfg, ds, r);

    OutputBatch batch;
    batch.add(out.report, dump_report(rep));
    batch.add(out.labels, detail::labels_to_text(r.assignment.labels));
    batch.add(out.embedding, matrix_to_csv(r.run.z));
    batch.commit();
    if (out.report.empty()) {
      log << dump_report(rep);
    } else {
      log << "n=" << ds.n() << " d=" << ds.d() << " mode=" << to_string(cfg.mode);
      if (rep.acc) log << " acc=" << *rep.acc << " nmi=" << *rep.nmi;
      log << " runtime=" << rep.runtime_seconds << "s\n";
    }
    return kExitOk;
  });
}

struct CollapseRow {
  std::string mode;
  int iteration = 0;
  Index k = 0;
  double uniformity_gap = 0.0;
  double mean_uniformity_gap = 0.0;
  Index component_count = 0;
  double reconstruction_gap = 0.0;
  std::optional<double> acc;
};

/// Runs the configured data through fixed-k and full modes, scoring the
/// spectral labels of every intermediate graph.
inline std::vector<CollapseRow> collapse_series(const RunConfig& cfg, const Dataset& ds) {
  std::vector<CollapseRow> rows;
  for (LoopMode mode : {LoopMode::fixed_k, LoopMode::full}) {
    AnchorGaeConfig mc = cfg.model_config();
    mc.mode = mode;
    auto observer = [&](const IterationSnapshot& s) {
      CollapseRow row;
      row.mode = to_string(mode);
      row.iteration = s.iteration;
      row.k = s.diagnostics->k;
      row.uniformity_gap = s.diagnostics->uniformity_gap;
      row.mean_uniformity_gap = s.diagnostics->mean_uniformity_gap;
      row.component_count = s.diagnostics->component_count;
      row.reconstruction_gap = s.diagnostics->reconstruction_gap;
      if (ds.labels) {
        const ClusterAssignment a = assign_labels(*s.graph, {}, cfg.clusters, AssignRoute::spectral, SeededRng(cfg.seed).fork(3).next_u64());
        row.acc = acc(a.labels, *ds.labels);
      }
      rows.push_back(row);
    };
    run_anchorgae(ds.x, mc, observer);
  }
  return rows;
}

inline std::string collapse_csv(const std::vector<CollapseRow>& rows) {
  std::string out = "mode,iteration,k,uniformity_gap,mean_uniformity_gap,component_count,reconstruction_gap,acc\n";
  for (const auto& r : rows) {
    out += r.mode + ',' + std::to_string(r.iteration) + ',' + std::to_string(r.k) + ',' + format_double(r.uniformity_gap) + ',' +
           format_double(r.mean_uniformity_gap) + ',' + std::to_string(r.component_count) + ',' + format_double(r.reconstruction_gap) + ',' +
           (r.acc ? format_double(*r.acc) : std::string("nan")) + '\n';
  }
  return out;
}

inline int cmd_collapse_demo(const RunConfig& cfg, const OutputPaths& out, std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    cfg.validate();
    detail::check_output_dir(out.series, "--series-out");
    const Dataset ds = load_dataset(cfg);
    const auto rows = collapse_series(cfg, ds);
    const std::string csv = collapse_csv(rows);
    OutputBatch batch;
    batch.add(out.series, csv);
    batch.commit();
    if (out.series.empty()) log << csv;
    const CollapseRow* last_fk = nullptr;
    const CollapseRow* last_full = nullptr;
    for (const auto& r : rows) (r.mode == "full" ? last_full : last_fk) = &r;
    log << "final components: fixed-k " << last_fk->component_count << ", full " << last_full->component_count;
    if (last_fk->acc) log << "; final acc: fixed-k " << *last_fk->acc << ", full " << *last_full->acc;
    log << "\n";
    return kExitOk;
  });
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "n,t_factored,t_dense\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + ',' + format_double(r.t_factored) + ',' + (std::isfinite(r.t_dense) ? format_double(r.t_dense) : "inf") + '\n';
  }
  return out;
}

inline int cmd_bench(const BenchConfig& cfg, const OutputPaths& out, std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    detail::check_output_dir(out.series, "--series-out");
    if (cfg.sizes.empty() || !std::is_sorted(cfg.sizes.begin(), cfg.sizes.end())) throw ConfigError("--sizes must be a non-empty ascending list");
    if (cfg.anchors < 2 || cfg.dim < 1 || cfg.reps < 1 || cfg.k < 1 || cfg.k >= cfg.anchors) {
      throw ConfigError("bench: need anchors >= 2, dim >= 1, reps >= 1 and 1 <= k < anchors");
    }
    if (cfg.sizes.front() < cfg.anchors) throw ConfigError("--sizes must all be >= --anchors");
    const double spot = bench_spot_check(cfg);
    if (!(spot < 1e-8)) throw NumericError("bench: dense and factored paths disagree at n=200 (max diff " + format_double(spot) + ")");
    const std::string csv = bench_csv(run_bench(cfg));
    OutputBatch batch;
    batch.add(out.series, csv);
    batch.commit();
    log << csv;
    return kExitOk;
  });
}

inline int cmd_eval(const std::string& pred_path, const std::string& truth_path, std::ostream& log, std::ostream& err) {
  return detail::guarded(err, [&] {
    std::vector<int> pred, truth;
    try {
      pred = load_labels(pred_path);
      truth = load_labels(truth_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    if (pred.size() != truth.size()) {
      throw ConfigError("eval: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " truth labels");
    }
    Json j;
    j["n"] = pred.size();
    j["acc"] = acc(pred, truth);
    j["nmi"] = nmi(pred, truth);
    log << j.dump(2) << "\n";
    return kExitOk;
  });
}

}  // namespace anchorgae
