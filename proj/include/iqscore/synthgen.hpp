#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqscore/core.hpp"
#include "iqscore/dataio.hpp"

namespace iqscore {

/// Parameters of a clustered world on the unit hypersphere.
///
/// Each sample is normalize(center + perturbation) with the perturbation drawn
/// from N(0, sigma^2 / d * I), so sigma is the expected perturbation norm.
/// `noise_dispersion_gain` models a proxy trained on noisy labels: a scenario
/// entry with flip ratio rho is generated with sigma * (1 + gain * rho).
struct ClusterWorldConfig {
  std::size_t num_identities = 1000;
  std::size_t per_identity = 10;
  std::size_t dim = 128;
  double sigma = 0.3;
  std::uint64_t seed = 0;
  double noise_dispersion_gain = 1.0;

  void validate() const;
};

struct ScenarioEntry {
  std::string name;
  ClusterWorldConfig world;
  double flip_ratio = 0.0;
};

struct ScenarioSeries {
  std::vector<ScenarioEntry> entries;

  void validate() const;
};

LabeledEmbeddingSet generate_cluster_world(const ClusterWorldConfig& cfg);

// Identity centers of the world `cfg` generates, as stored 32-bit rows.
EmbeddingSet cluster_world_centers(const ClusterWorldConfig& cfg);

// First seed in [start, start + max_tries) whose centers satisfy `accept`.
std::optional<std::uint64_t> search_seed(
    ClusterWorldConfig cfg, const std::function<bool(const EmbeddingSet&)>& accept,
    std::uint64_t start, std::uint64_t max_tries);

ScenarioSeries build_scaling_series(const ClusterWorldConfig& base,
                                    std::span<const std::size_t> identity_counts);
ScenarioSeries build_noise_series(const ClusterWorldConfig& base,
                                  std::span<const double> ratios);

struct ScenarioRunConfig {
  IqReportConfig compute;  // k, weights, agreement mode, bins, RankMe
  SamplingConfig sampling;
};

struct PlanePoint {
  std::string name;
  double flip_ratio;
  std::size_t num_identities;
  double r_norm;
  double mean_consis;
  double iq;
};

struct ScenarioResult {
  std::vector<IqReport> reports;
  std::vector<PlanePoint> plane;
};

ScenarioResult run_scenario(const ScenarioSeries& series, const ScenarioRunConfig& cfg);

// Scenario file: either explicit "entries" or a generator ("kind": "noise" |
// "scaling") with a "base" world. See schemas/scenario.schema.json.
ScenarioSeries parse_scenario_json(const nlohmann::json& doc);

nlohmann::json scenario_result_json(const ScenarioResult& result);
std::string plane_csv(std::span<const PlanePoint> plane);

}  // namespace iqscore
