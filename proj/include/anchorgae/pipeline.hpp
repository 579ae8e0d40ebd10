#pragma once

// End-to-end clustering: run the self-supervised loop, then read labels off
// the final graph (bipartite spectral route) or the final embedding (k-means).

#include "anchorgae/clustering.hpp"
#include "anchorgae/metrics.hpp"
#include "anchorgae/self_supervised.hpp"

#include <string>
#include <vector>

namespace anchorgae {

enum class AssignRoute { spectral, kmeans };

inline const char* to_string(AssignRoute r) { return r == AssignRoute::spectral ? "spectral" : "kmeans"; }

inline AssignRoute parse_assign_route(const std::string& s) {
  if (s == "spectral") return AssignRoute::spectral;
  if (s == "kmeans") return AssignRoute::kmeans;
  throw std::invalid_argument("unknown assignment route '" + s + "' (expected spectral or kmeans)");
}

struct PipelineResult {
  AnchorGaeResult run;
  ClusterAssignment assignment;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

inline ClusterAssignment assign_labels(const AnchorGraph& g, const DenseMatrix& z, int c, AssignRoute route, std::uint64_t seed,
                                       std::vector<std::string>* warnings = nullptr) {
  if (route == AssignRoute::spectral) {
    SpectralResult s = spectral_via_svd(g, c, seed);
    if (warnings) warnings->insert(warnings->end(), s.warnings.begin(), s.warnings.end());
    return std::move(s.assignment);
  }
  SeededRng rng(seed);
  return kmeans(z, c, rng).assignment;
}

inline PipelineResult cluster(const DenseMatrix& x, const AnchorGaeConfig& cfg, AssignRoute route = AssignRoute::spectral,
                              const std::function<void(const IterationSnapshot&)>& observer = {}) {
  Stopwatch clock;
  PipelineResult out;
  out.run = run_anchorgae(x, cfg, observer);
  // label extraction draws from its own stream so it does not shift with E
  out.assignment = assign_labels(out.run.graph, out.run.z, cfg.clusters, route, SeededRng(cfg.seed).fork(3).next_u64(), &out.warnings);
  out.seconds = clock.seconds();
  return out;
}

}  // namespace anchorgae
