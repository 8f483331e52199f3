#include "iqscore/iqscore.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "iqscore/dataio.hpp"
#include "iqscore/iqfuse.hpp"
#include "iqscore/parallel.hpp"
#include "iqscore/pipeline.hpp"
#include "iqscore/synthgen.hpp"

struct iq_dataset {
  iqscore::LabeledEmbeddingSet set;
};

struct iq_report {
  iqscore::ComputeResult result;
};

struct iq_series {
  iqscore::SettingsSeries series;
};

namespace {

thread_local std::string g_last_error;

iq_status record(iq_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
iq_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return IQ_OK;
  } catch (const iqscore::Error& e) {
    return record(static_cast<iq_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(IQ_ERR_SCHEMA, e.what());
  } catch (const std::bad_alloc&) {
    return record(IQ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(IQ_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (p == nullptr) iqscore::fail(iqscore::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

iqscore::IqReportConfig to_cpp(const iq_compute_config& c) {
  iqscore::IqReportConfig cfg;
  cfg.k = c.k;
  cfg.alpha = c.alpha;
  cfg.beta = c.beta;
  cfg.sampled = c.sample != 0;
  cfg.target_identities = c.target_identities;
  cfg.per_identity = c.per_identity;
  cfg.sampling_seed = c.seed;
  cfg.dedup_threshold = c.dedup != 0 ? std::optional<double>(c.dedup_threshold) : std::nullopt;
  cfg.min_identity_size = c.min_identity_size;
  cfg.ceiling_normalized = c.ceiling_normalized != 0;
  cfg.histogram_bins = c.histogram_bins;
  cfg.rankme_epsilon = c.rankme_epsilon;
  cfg.rankme_centered = c.rankme_centered != 0;
  return cfg;
}

iqscore::SamplingConfig to_cpp(const iq_sampling_config& c) {
  iqscore::SamplingConfig cfg;
  cfg.target_identities = c.target_identities;
  cfg.per_identity = c.per_identity;
  cfg.seed = c.seed;
  cfg.dedup = c.dedup != 0;
  cfg.dedup_threshold = c.dedup_threshold;
  cfg.min_identity_size = c.min_identity_size;
  return cfg;
}

iqscore::FileFormat to_cpp(iq_format f) {
  return f == IQ_FORMAT_CSV ? iqscore::FileFormat::kCsv : iqscore::FileFormat::kBinary;
}

}  // namespace

extern "C" {

void iq_compute_config_init(iq_compute_config* cfg) {
  if (cfg == nullptr) return;
  const iqscore::IqReportConfig d;
  *cfg = iq_compute_config{d.k,
                           d.alpha,
                           d.beta,
                           1,
                           d.target_identities,
                           d.per_identity,
                           d.sampling_seed,
                           1,
                           *d.dedup_threshold,
                           d.min_identity_size,
                           0,
                           d.histogram_bins,
                           d.rankme_epsilon,
                           0};
}

void iq_sampling_config_init(iq_sampling_config* cfg) {
  if (cfg == nullptr) return;
  const iqscore::SamplingConfig d;
  *cfg = iq_sampling_config{d.target_identities, d.per_identity, d.seed,
                            1, d.dedup_threshold, d.min_identity_size};
}

const char* iq_last_error(void) { return g_last_error.c_str(); }

const char* iq_status_name(iq_status status) {
  if (status == IQ_OK) return "Ok";
  if (status == IQ_ERR_INTERNAL) return "InternalError";
  return iqscore::error_name(static_cast<iqscore::ErrorCode>(status)).data();
}

int iq_status_exit_code(iq_status status) {
  if (status == IQ_OK) return 0;
  if (status == IQ_ERR_INTERNAL) return 3;
  return iqscore::exit_code_for(static_cast<iqscore::ErrorCode>(status));
}

void iq_string_free(char* s) { std::free(s); }

const char* iq_version(void) { return "1.0.0"; }

void iq_set_threads(size_t threads) { iqscore::set_worker_count(threads); }

iq_status iq_dataset_read(const char* path, const char* label_path, iq_format format,
                          iq_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new iq_dataset{iqscore::read_embedding_file(path, label_path ? label_path : "",
                                                       to_cpp(format))};
  });
}

iq_status iq_dataset_write(const iq_dataset* ds, const char* path, const char* label_path,
                           iq_format format) {
  return guarded([&] {
    require(ds, "dataset");
    require(path, "path");
    iqscore::write_embedding_file(ds->set, path, label_path ? label_path : "", to_cpp(format));
  });
}

iq_status iq_dataset_from_arrays(size_t n, size_t d, const float* data, const int64_t* labels,
                                 iq_dataset** out) {
  return guarded([&] {
    require(data, "data");
    require(labels, "labels");
    require(out, "out");
    iqscore::EmbeddingSet emb(n, d, std::vector<float>(data, data + n * d));
    const bool unit = emb.rows_are_unit();
    if (unit) emb = iqscore::EmbeddingSet(n, d, std::vector<float>(data, data + n * d), true);
    *out = new iq_dataset{iqscore::LabeledEmbeddingSet(std::move(emb),
                                                       std::vector<iqscore::Label>(labels, labels + n))};
  });
}

void iq_dataset_free(iq_dataset* ds) { delete ds; }
size_t iq_dataset_rows(const iq_dataset* ds) { return ds ? ds->set.rows() : 0; }
size_t iq_dataset_dim(const iq_dataset* ds) { return ds ? ds->set.dim() : 0; }
size_t iq_dataset_identities(const iq_dataset* ds) { return ds ? ds->set.identity_count() : 0; }
const float* iq_dataset_data(const iq_dataset* ds) {
  return ds ? ds->set.embeddings().data().data() : nullptr;
}
const int64_t* iq_dataset_labels(const iq_dataset* ds) {
  return ds ? ds->set.labels().data() : nullptr;
}

iq_status iq_dataset_hash(const iq_dataset* ds, char** hex_out) {
  return guarded([&] {
    require(ds, "dataset");
    require(hex_out, "hex_out");
    *hex_out = dup_string(iqscore::content_hash(ds->set));
  });
}

iq_status iq_dataset_sample(const iq_dataset* ds, const iq_sampling_config* cfg, iq_dataset** out,
                            char** manifest_json_out) {
  return guarded([&] {
    require(ds, "dataset");
    require(cfg, "config");
    require(out, "out");
    const auto normalized =
        ds->set.with_embeddings(iqscore::l2_normalize_rows(ds->set.embeddings()));
    auto result = iqscore::stratified_sample(normalized, to_cpp(*cfg));
    // Manifest hash refers to the set as supplied, not its normalized copy.
    result.manifest.source_hash = iqscore::content_hash(ds->set);
    std::string manifest = iqscore::manifest_to_json(result.manifest).dump(2) + "\n";
    *out = new iq_dataset{std::move(result.set)};
    if (manifest_json_out != nullptr) *manifest_json_out = dup_string(manifest);
  });
}

iq_status iq_dataset_inject_noise(const iq_dataset* ds, double flip_ratio, uint64_t seed,
                                  iq_dataset** out, char** flip_log_json_out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    const iqscore::NoiseConfig cfg{flip_ratio, seed};
    auto result = iqscore::inject_uniform_flip_noise(ds->set, cfg);
    std::string log =
        iqscore::flip_log_to_json(cfg, iqscore::content_hash(ds->set), ds->set.rows(), result.flips)
            .dump(2) +
        "\n";
    *out = new iq_dataset{std::move(result.set)};
    if (flip_log_json_out != nullptr) *flip_log_json_out = dup_string(log);
  });
}

iq_status iq_dataset_generate(size_t num_identities, size_t per_identity, size_t dim, double sigma,
                              uint64_t seed, iq_dataset** out) {
  return guarded([&] {
    require(out, "out");
    iqscore::ClusterWorldConfig cfg;
    cfg.num_identities = num_identities;
    cfg.per_identity = per_identity;
    cfg.dim = dim;
    cfg.sigma = sigma;
    cfg.seed = seed;
    *out = new iq_dataset{iqscore::generate_cluster_world(cfg)};
  });
}

iq_status iq_compute(const iq_dataset* ds, const iq_compute_config* cfg, iq_report** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(cfg, "config");
    require(out, "out");
    *out = new iq_report{iqscore::compute_report(ds->set, to_cpp(*cfg))};
  });
}

void iq_report_free(iq_report* report) { delete report; }
double iq_report_iq(const iq_report* r) { return r ? r->result.report.iq : 0.0; }
double iq_report_consis(const iq_report* r) { return r ? r->result.report.consis.mean_consis : 0.0; }
double iq_report_er_norm(const iq_report* r) { return r ? r->result.report.spectrum.r_norm : 0.0; }
double iq_report_rankme(const iq_report* r) { return r ? r->result.report.rankme_score : 0.0; }
size_t iq_report_k_used(const iq_report* r) { return r ? r->result.report.consis.k_used : 0; }
size_t iq_report_rows_analyzed(const iq_report* r) { return r ? r->result.report.rows_analyzed : 0; }

iq_status iq_report_json(const iq_report* report, char** json_out) {
  return guarded([&] {
    require(report, "report");
    require(json_out, "json_out");
    *json_out = dup_string(iqscore::report_to_json(report->result.report).dump(2) + "\n");
  });
}

iq_status iq_report_timings_json(const iq_report* report, char** json_out) {
  return guarded([&] {
    require(report, "report");
    require(json_out, "json_out");
    *json_out = dup_string(iqscore::timings_to_json(report->result.report.timings).dump(2) + "\n");
  });
}

iq_status iq_report_manifest_json(const iq_report* report, char** json_out) {
  return guarded([&] {
    require(report, "report");
    require(json_out, "json_out");
    const auto& m = report->result.manifest;
    *json_out = dup_string(m ? iqscore::manifest_to_json(*m).dump(2) + "\n" : "null\n");
  });
}

iq_status iq_report_write_sidecars(const iq_report* report, const char* prefix) {
  return guarded([&] {
    require(report, "report");
    require(prefix, "prefix");
    iqscore::write_report_sidecars(report->result.report, prefix);
  });
}

iq_status iq_score(double mean_consis, double er_norm, double alpha, double beta, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = iqscore::iq_score(mean_consis, er_norm, alpha, beta);
  });
}

iq_status iq_series_read_csv(const char* path, iq_series** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new iq_series{iqscore::read_settings_csv(path)};
  });
}

iq_status iq_series_parse_csv(const char* text, iq_series** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new iq_series{iqscore::parse_settings_csv(text)};
  });
}

void iq_series_free(iq_series* series) { delete series; }
size_t iq_series_size(const iq_series* series) { return series ? series->series.size() : 0; }

iq_status iq_compare(const iq_series* series, double alpha, double beta, char** csv_out,
                     char** json_out) {
  return guarded([&] {
    require(series, "series");
    const auto report = iqscore::rank_agreement_report(series->series, alpha, beta);
    std::string csv = iqscore::agreement_report_csv(report);
    std::string json = iqscore::agreement_report_json(report).dump(2) + "\n";
    if (csv_out != nullptr) *csv_out = dup_string(csv);
    if (json_out != nullptr) *json_out = dup_string(json);
  });
}

iq_status iq_sweep_beta(const iq_series* series, const double* grid, size_t grid_len,
                        char** csv_out) {
  return guarded([&] {
    require(series, "series");
    require(csv_out, "csv_out");
    const std::vector<double> values =
        grid != nullptr ? std::vector<double>(grid, grid + grid_len) : iqscore::default_beta_grid();
    *csv_out = dup_string(iqscore::sweep_csv(iqscore::beta_sweep(series->series, values)));
  });
}

iq_status iq_synth_run(const char* scenario_json, const iq_compute_config* cfg,
                       char** reports_json_out, char** plane_csv_out) {
  return guarded([&] {
    require(scenario_json, "scenario_json");
    require(cfg, "config");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(scenario_json);
    } catch (const nlohmann::json::parse_error& e) {
      iqscore::fail(iqscore::ErrorCode::kSchema, std::string("scenario is not valid JSON: ") + e.what());
    }
    const iqscore::ScenarioSeries series = iqscore::parse_scenario_json(doc);

    iqscore::ScenarioRunConfig run;
    run.compute = to_cpp(*cfg);
    run.sampling.target_identities = cfg->target_identities;
    run.sampling.per_identity = cfg->per_identity;
    run.sampling.seed = cfg->seed;
    run.sampling.dedup = cfg->dedup != 0;
    run.sampling.dedup_threshold = cfg->dedup_threshold;
    run.sampling.min_identity_size = cfg->min_identity_size;
    const auto result = iqscore::run_scenario(series, run);

    std::string reports = iqscore::scenario_result_json(result).dump(2) + "\n";
    std::string plane = iqscore::plane_csv(result.plane);
    if (reports_json_out != nullptr) *reports_json_out = dup_string(reports);
    if (plane_csv_out != nullptr) *plane_csv_out = dup_string(plane);
  });
}

}  // extern "C"
