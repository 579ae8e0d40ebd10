#pragma once

// Run configuration and the JSON cluster report. Reports are versioned and
// re-loading is strict: unknown or missing keys are errors.

#include "anchorgae/data_io.hpp"
#include "anchorgae/pipeline.hpp"
#include "anchorgae/self_supervised.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

#ifndef ANCHORGAE_VERSION
#define ANCHORGAE_VERSION "0.1.0"
#endif

namespace anchorgae {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kCodeVersion = ANCHORGAE_VERSION;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string format = "blobs";  // csv, idx, blobs, moons
  std::string input;             // path(s) or synthetic spec "n=2000,d=16,sep=10"
  std::optional<int> label_col;
  int clusters = 4;
  Index anchors = 200;
  std::vector<Index> layers = {128, 64};
  Index k0 = 3;
  int outer_epochs = 5;
  int inner_epochs = 200;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  LoopMode mode = LoopMode::full;
  std::optional<Index> n_s;
  std::uint64_t seed = 0;
  bool scale = true;
  AssignRoute assign = AssignRoute::spectral;

  /// Checks everything that does not depend on the data.
  void validate() const {
    if (format != "csv" && format != "idx" && format != "blobs" && format != "moons") {
      throw ConfigError("--format must be one of csv, idx, blobs, moons (got '" + format + "')");
    }
    if ((format == "csv" || format == "idx") && input.empty()) throw ConfigError("--input is required for --format " + format);
    if (clusters < 2) throw ConfigError("--clusters must be >= 2");
    if (anchors < 2) throw ConfigError("--anchors must be >= 2");
    if (layers.empty() || layers.size() > 4) throw ConfigError("--layers needs 1 to 4 sizes");
    for (Index l : layers) {
      if (l < 1) throw ConfigError("--layers sizes must be positive");
    }
    if (k0 < 1 || k0 >= anchors) throw ConfigError("--k0 must satisfy 1 <= k0 < anchors");
    if (outer_epochs < 0) throw ConfigError("--outer-epochs must be >= 0");
    if (inner_epochs < 1) throw ConfigError("--inner-epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("--lr must be >= 0");
    if (n_s && *n_s < 1) throw ConfigError("--ns must be >= 1");
  }

  AnchorGaeConfig model_config() const {
    AnchorGaeConfig c;
    c.anchors = anchors;
    c.clusters = clusters;
    c.hidden = layers;
    c.k0 = k0;
    c.outer_epochs = outer_epochs;
    c.n_s = n_s;
    c.mode = mode;
    c.train.inner_epochs = inner_epochs;
    c.train.learning_rate = learning_rate;
    c.train.optimizer = optimizer;
    c.seed = seed;
    return c;
  }
};

namespace detail {

/// "n=2000,d=16,sep=10" -> key/value pairs; unknown keys rejected.
inline std::map<std::string, double> parse_synthetic_spec(const std::string& spec, const std::set<std::string>& allowed) {
  std::map<std::string, double> out;
  if (trim(spec).empty()) return out;
  for (auto part : split(spec, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("synthetic spec entry '" + std::string(part) + "' is not key=value");
    const std::string key(trim(part.substr(0, eq)));
    if (!allowed.count(key)) throw ConfigError("synthetic spec: unknown key '" + key + "'");
    const auto v = parse_double(trim(part.substr(eq + 1)));
    if (!v) throw ConfigError("synthetic spec: bad value for '" + key + "'");
    out[key] = *v;
  }
  return out;
}

}  // namespace detail

/// Loads or generates the dataset described by `cfg`; failures are ConfigError.
inline Dataset load_dataset(const RunConfig& cfg) {
  Dataset ds;
  try {
    if (cfg.format == "csv") {
      ds = load_csv(cfg.input, cfg.label_col);
    } else if (cfg.format == "idx") {
      // "images,labels" with further pairs after ';' concatenated in order
      bool first = true;
      for (auto pair : detail::split(cfg.input, ';')) {
        const auto files = detail::split(pair, ',');
        if (files.size() != 2) throw ConfigError("--input for idx must be 'images,labels' (pairs separated by ';')");
        Dataset part = load_idx(std::string(files[0]), std::string(files[1]));
        ds = first ? std::move(part) : concat(ds, part);
        first = false;
      }
    } else if (cfg.format == "blobs") {
      auto kv = detail::parse_synthetic_spec(cfg.input, {"n", "d", "sep"});
      const auto n = static_cast<Index>(kv.count("n") ? kv["n"] : 2000);
      const auto d = static_cast<Index>(kv.count("d") ? kv["d"] : 16);
      SeededRng rng(cfg.seed);
      ds = make_blobs(n, d, cfg.clusters, kv.count("sep") ? kv["sep"] : 10.0, rng);
    } else {
      auto kv = detail::parse_synthetic_spec(cfg.input, {"n", "noise"});
      SeededRng rng(cfg.seed);
      ds = make_two_moons(static_cast<Index>(kv.count("n") ? kv["n"] : 2000), kv.count("noise") ? kv["noise"] : 0.1, rng);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (cfg.scale) ds.x = minmax_scale(ds.x);
  if (cfg.anchors > ds.n()) {
    throw ConfigError("--anchors " + std::to_string(cfg.anchors) + " exceeds the " + std::to_string(ds.n()) + " samples");
  }
  if (cfg.clusters > ds.n()) throw ConfigError("--clusters exceeds the number of samples");
  return ds;
}

struct DatasetInfo {
  std::string name;
  Index n = 0;
  Index d = 0;
  int classes = 0;  // 0 when no labels were supplied
};

struct ClusterReport {
  int schema_version = kReportSchemaVersion;
  std::string code_version = kCodeVersion;
  RunConfig config;
  DatasetInfo dataset;
  std::optional<double> acc;
  std::optional<double> nmi;
  double runtime_seconds = 0.0;
  std::vector<std::vector<double>> loss_traces;
  std::vector<CollapseDiagnostics> diagnostics;
  std::vector<Index> k_path;
  std::vector<std::string> warnings;
};

inline ClusterReport make_report(const RunConfig& cfg, const Dataset& ds, const PipelineResult& r) {
  ClusterReport rep;
  rep.config = cfg;
  rep.dataset = {ds.name, ds.n(), ds.d(), ds.num_classes()};
  if (ds.labels) {
    rep.acc = acc(r.assignment.labels, *ds.labels);
    rep.nmi = nmi(r.assignment.labels, *ds.labels);
  }
  rep.runtime_seconds = r.seconds;
  for (const auto& t : r.run.traces) rep.loss_traces.push_back(t.values);
  rep.diagnostics = r.run.diagnostics;
  rep.k_path = r.run.k_path;
  rep.warnings = r.warnings;
  return rep;
}

using Json = nlohmann::ordered_json;

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["format"] = c.format;
  j["input"] = c.input;
  j["label_col"] = c.label_col ? Json(*c.label_col) : Json(nullptr);
  j["clusters"] = c.clusters;
  j["anchors"] = c.anchors;
  j["layers"] = c.layers;
  j["k0"] = c.k0;
  j["outer_epochs"] = c.outer_epochs;
  j["inner_epochs"] = c.inner_epochs;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = to_string(c.optimizer);
  j["mode"] = to_string(c.mode);
  j["ns"] = c.n_s ? Json(*c.n_s) : Json(nullptr);
  j["seed"] = c.seed;
  j["scale"] = c.scale;
  j["assign"] = to_string(c.assign);
  return j;
}

inline Json to_json(const ClusterReport& r) {
  Json j;
  j["schema_version"] = r.schema_version;
  j["code_version"] = r.code_version;
  j["config"] = config_to_json(r.config);
  j["dataset"] = {{"name", r.dataset.name}, {"n", r.dataset.n}, {"d", r.dataset.d}, {"classes", r.dataset.classes}};
  j["acc"] = r.acc ? Json(*r.acc) : Json(nullptr);
  j["nmi"] = r.nmi ? Json(*r.nmi) : Json(nullptr);
  j["runtime_seconds"] = r.runtime_seconds;
  j["loss_traces"] = r.loss_traces;
  Json diag = Json::array();
  for (const auto& d : r.diagnostics) {
    diag.push_back({{"iteration", d.iteration},
                    {"k", d.k},
                    {"uniformity_gap", d.uniformity_gap},
                    {"mean_uniformity_gap", d.mean_uniformity_gap},
                    {"component_count", d.component_count},
                    {"reconstruction_gap", d.reconstruction_gap}});
  }
  j["diagnostics"] = diag;
  j["k_path"] = r.k_path;
  j["warnings"] = r.warnings;
  return j;
}

inline std::string dump_report(const ClusterReport& r) { return to_json(r).dump(2) + "\n"; }

namespace detail {

inline void require_keys(const Json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ReportError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ReportError(where + ": unknown field '" + k + "'");
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) throw ReportError(where + ": missing field '" + k + "'");
  }
}

template <class T>
std::optional<T> nullable(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  detail::require_keys(j,
                       {"format", "input", "label_col", "clusters", "anchors", "layers", "k0", "outer_epochs", "inner_epochs", "learning_rate",
                        "optimizer", "mode", "ns", "seed", "scale", "assign"},
                       "config");
  RunConfig c;
  c.format = j["format"].get<std::string>();
  c.input = j["input"].get<std::string>();
  c.label_col = detail::nullable<int>(j["label_col"]);
  c.clusters = j["clusters"].get<int>();
  c.anchors = j["anchors"].get<Index>();
  c.layers = j["layers"].get<std::vector<Index>>();
  c.k0 = j["k0"].get<Index>();
  c.outer_epochs = j["outer_epochs"].get<int>();
  c.inner_epochs = j["inner_epochs"].get<int>();
  c.learning_rate = j["learning_rate"].get<double>();
  const auto opt = j["optimizer"].get<std::string>();
  if (opt != "gd" && opt != "adam") throw ReportError("config: unknown optimizer '" + opt + "'");
  c.optimizer = opt == "gd" ? Optimizer::gd : Optimizer::adam;
  c.mode = parse_loop_mode(j["mode"].get<std::string>());
  c.n_s = detail::nullable<Index>(j["ns"]);
  c.seed = j["seed"].get<std::uint64_t>();
  c.scale = j["scale"].get<bool>();
  c.assign = parse_assign_route(j["assign"].get<std::string>());
  return c;
}

/// Strict re-load of a report produced by dump_report.
inline ClusterReport parse_report(const std::string& text) {
  ClusterReport r;
  try {
    const Json j = Json::parse(text);
    detail::require_keys(j,
                         {"schema_version", "code_version", "config", "dataset", "acc", "nmi", "runtime_seconds", "loss_traces", "diagnostics",
                          "k_path", "warnings"},
                         "report");
    r.schema_version = j["schema_version"].get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw ReportError("report: schema version " + std::to_string(r.schema_version) + " is not supported (expected " +
                        std::to_string(kReportSchemaVersion) + ")");
    }
    r.code_version = j["code_version"].get<std::string>();
    r.config = config_from_json(j["config"]);
    const Json& ds = j["dataset"];
    detail::require_keys(ds, {"name", "n", "d", "classes"}, "dataset");
    r.dataset = {ds["name"].get<std::string>(), ds["n"].get<Index>(), ds["d"].get<Index>(), ds["classes"].get<int>()};
    r.acc = detail::nullable<double>(j["acc"]);
    r.nmi = detail::nullable<double>(j["nmi"]);
    r.runtime_seconds = j["runtime_seconds"].get<double>();
    r.loss_traces = j["loss_traces"].get<std::vector<std::vector<double>>>();
    for (const auto& d : j["diagnostics"]) {
      detail::require_keys(d, {"iteration", "k", "uniformity_gap", "mean_uniformity_gap", "component_count", "reconstruction_gap"}, "diagnostics");
      CollapseDiagnostics c;
      c.iteration = d["iteration"].get<int>();
      c.k = d["k"].get<Index>();
      c.uniformity_gap = d["uniformity_gap"].get<double>();
      c.mean_uniformity_gap = d["mean_uniformity_gap"].get<double>();
      c.component_count = d["component_count"].get<Index>();
      c.reconstruction_gap = d["reconstruction_gap"].get<double>();
      r.diagnostics.push_back(c);
    }
    r.k_path = j["k_path"].get<std::vector<Index>>();
    r.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const ReportError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReportError(std::string("report: ") + e.what());
  }
  return r;
}

}  // namespace anchorgae
