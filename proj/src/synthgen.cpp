#include "iqscore/synthgen.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "iqscore/pipeline.hpp"
#include "iqscore/rng.hpp"

namespace iqscore {
namespace {

constexpr std::uint64_t kNoiseStreamTag = 0x6E6F697365ULL;  // "noise"

std::vector<double> draw_unit_vector(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<std::vector<double>> draw_centers(Rng& rng, const ClusterWorldConfig& cfg) {
  std::vector<std::vector<double>> centers;
  centers.reserve(cfg.num_identities);
  for (std::size_t c = 0; c < cfg.num_identities; ++c) centers.push_back(draw_unit_vector(rng, cfg.dim));
  return centers;
}

template <typename T>
T json_get(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("field '") + key + "': " + e.what());
  }
}

ClusterWorldConfig parse_world(const nlohmann::json& obj) {
  if (!obj.is_object()) fail(ErrorCode::kSchema, "world must be an object");
  ClusterWorldConfig w;
  w.num_identities = json_get<std::size_t>(obj, "num_identities", w.num_identities);
  w.per_identity = json_get<std::size_t>(obj, "per_identity", w.per_identity);
  w.dim = json_get<std::size_t>(obj, "dim", w.dim);
  w.sigma = json_get<double>(obj, "sigma", w.sigma);
  w.seed = json_get<std::uint64_t>(obj, "seed", w.seed);
  w.noise_dispersion_gain = json_get<double>(obj, "noise_dispersion_gain", w.noise_dispersion_gain);
  return w;
}

std::string ratio_name(std::size_t index, double ratio) {
  std::ostringstream name;
  name << "noise_" << std::setw(2) << std::setfill('0') << index << "_rho" << std::fixed
       << std::setprecision(3) << ratio;
  return name.str();
}

}  // namespace

void ClusterWorldConfig::validate() const {
  if (num_identities == 0 || per_identity == 0 || dim == 0) {
    fail(ErrorCode::kInvalidArgument, "world sizes must be positive");
  }
  if (!(sigma >= 0.0 && sigma < 10.0)) fail(ErrorCode::kInvalidArgument, "sigma must lie in [0, 10)");
  if (!(noise_dispersion_gain >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "noise dispersion gain must be >= 0");
  }
}

void ScenarioSeries::validate() const {
  if (entries.empty()) fail(ErrorCode::kInvalidArgument, "scenario series is empty");
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate scenario entry name '" + e.name + "'");
    }
    e.world.validate();
    if (!(e.flip_ratio >= 0.0 && e.flip_ratio <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "flip ratio of '" + e.name + "' outside [0, 1]");
    }
  }
}

LabeledEmbeddingSet generate_cluster_world(const ClusterWorldConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto centers = draw_centers(rng, cfg);
  const std::size_t d = cfg.dim;
  const double scale = cfg.sigma / std::sqrt(static_cast<double>(d));

  std::vector<float> data;
  data.reserve(cfg.num_identities * cfg.per_identity * d);
  std::vector<Label> labels;
  labels.reserve(cfg.num_identities * cfg.per_identity);
  std::vector<double> v(d);
  for (std::size_t c = 0; c < cfg.num_identities; ++c) {
    for (std::size_t s = 0; s < cfg.per_identity; ++s) {
      double norm2 = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        v[t] = centers[c][t] + scale * rng.gaussian();
        norm2 += v[t] * v[t];
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t t = 0; t < d; ++t) data.push_back(static_cast<float>(v[t] * inv));
      labels.push_back(static_cast<Label>(c));
    }
  }
  const std::size_t n = labels.size();
  return LabeledEmbeddingSet(EmbeddingSet(n, d, std::move(data), true), std::move(labels));
}

EmbeddingSet cluster_world_centers(const ClusterWorldConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<float> data;
  for (const auto& c : draw_centers(rng, cfg)) {
    for (double x : c) data.push_back(static_cast<float>(x));
  }
  return EmbeddingSet(cfg.num_identities, cfg.dim, std::move(data), true);
}

std::optional<std::uint64_t> search_seed(ClusterWorldConfig cfg,
                                         const std::function<bool(const EmbeddingSet&)>& accept,
                                         std::uint64_t start, std::uint64_t max_tries) {
  for (std::uint64_t seed = start; seed - start < max_tries; ++seed) {
    cfg.seed = seed;
    if (accept(cluster_world_centers(cfg))) return seed;
  }
  return std::nullopt;
}

ScenarioSeries build_scaling_series(const ClusterWorldConfig& base,
                                    std::span<const std::size_t> identity_counts) {
  for (std::size_t i = 1; i < identity_counts.size(); ++i) {
    if (identity_counts[i] <= identity_counts[i - 1]) {
      fail(ErrorCode::kInvalidArgument, "identity counts must be strictly increasing");
    }
  }
  ScenarioSeries series;
  for (std::size_t count : identity_counts) {
    ScenarioEntry e{"scale_M" + std::to_string(count), base, 0.0};
    e.world.num_identities = count;
    e.world.seed = derive_seed(base.seed, count);
    series.entries.push_back(std::move(e));
  }
  series.validate();
  return series;
}

ScenarioSeries build_noise_series(const ClusterWorldConfig& base, std::span<const double> ratios) {
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "noise ratios must lie in [0, 1]");
    }
    if (i > 0 && ratios[i] < ratios[i - 1]) {
      fail(ErrorCode::kInvalidArgument, "noise ratios must be nondecreasing");
    }
  }
  ScenarioSeries series;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    series.entries.push_back({ratio_name(i, ratios[i]), base, ratios[i]});
  }
  series.validate();
  return series;
}

ScenarioResult run_scenario(const ScenarioSeries& series, const ScenarioRunConfig& cfg) {
  ScenarioResult result;
  if (series.entries.empty()) return result;
  series.validate();

  IqReportConfig compute = cfg.compute;
  compute.sampled = true;
  compute.target_identities = cfg.sampling.target_identities;
  compute.per_identity = cfg.sampling.per_identity;
  compute.sampling_seed = cfg.sampling.seed;
  compute.min_identity_size = cfg.sampling.min_identity_size;
  compute.dedup_threshold =
      cfg.sampling.dedup ? std::optional<double>(cfg.sampling.dedup_threshold) : std::nullopt;

  for (const auto& entry : series.entries) {
    try {
      ClusterWorldConfig world = entry.world;
      world.sigma = entry.world.sigma * (1.0 + entry.world.noise_dispersion_gain * entry.flip_ratio);
      if (world.sigma >= 10.0) world.sigma = std::nextafter(10.0, 0.0);
      const LabeledEmbeddingSet clean = generate_cluster_world(world);
      const NoiseResult noisy =
          inject_uniform_flip_noise(clean, {entry.flip_ratio, derive_seed(world.seed, kNoiseStreamTag)});
      IqReport report = compute_report(noisy.set, compute).report;
      result.plane.push_back({entry.name, entry.flip_ratio, entry.world.num_identities,
                              report.spectrum.r_norm, report.consis.mean_consis, report.iq});
      result.reports.push_back(std::move(report));
    } catch (const Error& e) {
      throw Error(e.code(), "scenario entry '" + entry.name + "': " + e.what());
    }
  }
  return result;
}

ScenarioSeries parse_scenario_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kSchema, "scenario must be a JSON object");
  if (doc.contains("schema") && doc.at("schema") != "iqscore.scenario") {
    fail(ErrorCode::kSchema, "unexpected schema tag");
  }
  if (doc.contains("version") && doc.at("version") != 1) fail(ErrorCode::kSchema, "unsupported version");

  const std::string kind = json_get<std::string>(doc, "kind", "explicit");
  ScenarioSeries series;
  try {
    if (kind == "noise") {
      const auto base = parse_world(doc.value("base", nlohmann::json::object()));
      const auto ratios = json_get<std::vector<double>>(doc, "ratios", {});
      series = build_noise_series(base, ratios);
    } else if (kind == "scaling") {
      const auto base = parse_world(doc.value("base", nlohmann::json::object()));
      const auto counts = json_get<std::vector<std::size_t>>(doc, "identity_counts", {});
      series = build_scaling_series(base, counts);
    } else if (kind == "explicit") {
      if (!doc.contains("entries") || !doc.at("entries").is_array()) {
        fail(ErrorCode::kSchema, "explicit scenario needs an 'entries' array");
      }
      for (const auto& e : doc.at("entries")) {
        if (!e.is_object() || !e.contains("name") || !e.contains("world")) {
          fail(ErrorCode::kSchema, "each entry needs 'name' and 'world'");
        }
        series.entries.push_back({json_get<std::string>(e, "name", ""), parse_world(e.at("world")),
                                  json_get<double>(e, "flip_ratio", 0.0)});
      }
      series.validate();
    } else {
      fail(ErrorCode::kSchema, "unknown scenario kind '" + kind + "'");
    }
  } catch (const Error& e) {
    // Everything wrong with a scenario file is a schema problem for callers.
    throw Error(ErrorCode::kSchema, e.what());
  }
  return series;
}

nlohmann::json scenario_result_json(const ScenarioResult& result) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& p = result.plane[i];
    entries.push_back({{"name", p.name},
                       {"flip_ratio", p.flip_ratio},
                       {"num_identities", p.num_identities},
                       {"report", report_to_json(result.reports[i])}});
  }
  return {{"schema", "iqscore.scenario_result"}, {"version", 1}, {"entries", entries}};
}

std::string plane_csv(std::span<const PlanePoint> plane) {
  std::ostringstream out;
  out << "name,flip_ratio,num_identities,r_norm,mean_consis,iq\n" << std::setprecision(17);
  for (const auto& p : plane) {
    out << p.name << ',' << p.flip_ratio << ',' << p.num_identities << ',' << p.r_norm << ','
        << p.mean_consis << ',' << p.iq << '\n';
  }
  return out.str();
}

}  // namespace iqscore
