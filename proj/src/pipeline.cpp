#include "iqscore/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "iqscore/iqfuse.hpp"
#include "iqscore/neighbors.hpp"
#include "iqscore/spectral.hpp"

namespace iqscore {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void validate_config(const IqReportConfig& cfg) {
  if (cfg.k == 0) fail(ErrorCode::kInvalidArgument, "k must be positive");
  if (cfg.histogram_bins == 0) fail(ErrorCode::kInvalidArgument, "bins must be positive");
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0) || std::abs(cfg.alpha + cfg.beta - 1.0) > 1e-12) {
    fail(ErrorCode::kWeightError, "alpha and beta must be non-negative and sum to 1");
  }
  if (!(cfg.rankme_epsilon >= 0.0)) fail(ErrorCode::kInvalidArgument, "RankMe epsilon must be >= 0");
}

std::ofstream open_sidecar(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  return out;
}

}  // namespace

ComputeResult compute_report(const LabeledEmbeddingSet& input, const IqReportConfig& cfg) {
  validate_config(cfg);
  const auto start = Clock::now();
  ComputeResult result;
  IqReport& report = result.report;
  report.config = cfg;
  report.rows_in = input.rows();
  report.dim = input.dim();

  auto t = Clock::now();
  const LabeledEmbeddingSet normalized = input.with_embeddings(l2_normalize_rows(input.embeddings()));
  std::optional<LabeledEmbeddingSet> subset;
  if (cfg.sampled) {
    SamplingConfig sampling;
    sampling.target_identities = cfg.target_identities;
    sampling.per_identity = cfg.per_identity;
    sampling.seed = cfg.sampling_seed;
    sampling.dedup = cfg.dedup_threshold.has_value();
    sampling.dedup_threshold = cfg.dedup_threshold.value_or(1.0);
    sampling.min_identity_size = cfg.min_identity_size;
    SampleResult sampled = stratified_sample(normalized, sampling);
    subset.emplace(std::move(sampled.set));
    result.manifest = std::move(sampled.manifest);
    result.manifest->source_hash = content_hash(input);
  } else if (cfg.dedup_threshold) {
    subset.emplace(dedup_within_identity(normalized, *cfg.dedup_threshold).set);
  } else {
    subset.emplace(normalized);
  }
  report.timings.sample_ms = elapsed_ms(t);
  report.rows_analyzed = subset->rows();
  report.identities_analyzed = subset->identity_count();
  report.input_fingerprint = content_hash(*subset);

  t = Clock::now();
  const NeighborTable table = exact_topk_cosine(subset->embeddings(), cfg.k);
  report.timings.knn_ms = elapsed_ms(t);

  t = Clock::now();
  report.consis = consistency_summary(
      table, subset->labels(), cfg.ceiling_normalized ? AgreementMode::kCeiling : AgreementMode::kRaw,
      cfg.histogram_bins);
  report.timings.consis_ms = elapsed_ms(t);

  t = Clock::now();
  report.spectrum = spectrum_summary(subset->embeddings());
  report.timings.spectrum_ms = elapsed_ms(t);

  t = Clock::now();
  report.rankme_score =
      rankme_score(subset->embeddings(), {cfg.rankme_epsilon, cfg.rankme_centered});
  report.timings.rankme_ms = elapsed_ms(t);

  report.iq = iq_score(report.consis.mean_consis, report.spectrum.r_norm, cfg.alpha, cfg.beta);
  report.plane_point = {report.spectrum.r_norm, report.consis.mean_consis};
  report.timings.total_ms = elapsed_ms(start);
  return result;
}

nlohmann::json timings_to_json(const StageTimings& timings) {
  return {{"sample_ms", timings.sample_ms},   {"knn_ms", timings.knn_ms},
          {"consis_ms", timings.consis_ms},   {"spectrum_ms", timings.spectrum_ms},
          {"rankme_ms", timings.rankme_ms},   {"total_ms", timings.total_ms}};
}

nlohmann::json report_to_json(const IqReport& report, bool include_timings) {
  const auto& c = report.config;
  const auto& s = report.spectrum;
  const CevResult cev = cumulative_explained_variance(s.eigenvalues);

  nlohmann::json cev_counts = nlohmann::json::object();
  for (std::size_t t = 0; t < kCevThresholds.size(); ++t) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", kCevThresholds[t]);
    cev_counts[key] = cev.components_to[t];
  }

  nlohmann::json doc = {
      {"schema", "iqscore.report"},
      {"version", kReportSchemaVersion},
      {"formats", {{"embedding_file", kEmbeddingFormatVersion}, {"label_file", kLabelFormatVersion}}},
      {"config",
       {{"k", c.k},
        {"alpha", c.alpha},
        {"beta", c.beta},
        {"sampled", c.sampled},
        {"target_identities", c.target_identities},
        {"per_identity", c.per_identity},
        {"sampling_seed", c.sampling_seed},
        {"dedup", c.dedup_threshold.has_value()},
        {"dedup_threshold", c.dedup_threshold.value_or(1.0)},
        {"min_identity_size", c.min_identity_size},
        {"agreement_mode", c.ceiling_normalized ? "ceiling" : "raw"},
        {"histogram_bins", c.histogram_bins},
        {"rankme", {{"epsilon", c.rankme_epsilon}, {"centered", c.rankme_centered}}}}},
      {"input",
       {{"rows_in", report.rows_in},
        {"rows_analyzed", report.rows_analyzed},
        {"dim", report.dim},
        {"identities_analyzed", report.identities_analyzed},
        {"fingerprint_sha256", report.input_fingerprint}}},
      {"consis",
       {{"mean", report.consis.mean_consis},
        {"k_used", report.consis.k_used},
        {"ceiling_normalized", report.consis.ceiling_normalized},
        {"histogram",
         {{"edges", report.consis.histogram.edges}, {"counts", report.consis.histogram.counts}}}}},
      {"spectrum",
       {{"r_ent", s.r_ent},
        {"r_norm", s.r_norm},
        {"r_norm_clamped", s.r_norm_clamped},
        {"q_cap", s.q_cap},
        {"gram_path", s.gram_path},
        {"zero_eigenvalues", s.zero_eigenvalues},
        {"eigenvalues", s.eigenvalues},
        {"components_to_cev", cev_counts}}},
      {"rankme", report.rankme_score},
      {"iq", report.iq},
      {"plane_point", {{"r_norm", report.plane_point.first}, {"consis", report.plane_point.second}}},
  };
  if (include_timings) doc["timings"] = timings_to_json(report.timings);
  return doc;
}

void write_report_sidecars(const IqReport& report, const std::string& prefix) {
  {
    auto out = open_sidecar(prefix + "agreement.csv");
    write_series_csv(report.consis.agreement, out);
  }
  {
    auto out = open_sidecar(prefix + "histogram.csv");
    const auto& h = report.consis.histogram;
    out << "bin,lower,upper,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << b << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    }
  }
  {
    auto out = open_sidecar(prefix + "spectrum.csv");
    write_series_csv(report.spectrum.eigenvalues, out);
  }
  {
    auto out = open_sidecar(prefix + "log_spectrum.csv");
    write_series_csv(log_spectrum(report.spectrum.eigenvalues), out);
  }
  {
    auto out = open_sidecar(prefix + "cev.csv");
    write_series_csv(report.spectrum.cev, out);
  }
}

}  // namespace iqscore
