// iqscore command-line front end. Talks to the library exclusively through
// the C interface in iqscore.h.
//
// Exit codes: 0 success, 2 input/format error, 3 computation/validation error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iqscore/iqscore.h"

namespace {

struct CliFailure {
  int exit_code;
  std::string kind;
  std::string message;
};

std::string json_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out;
}

void check(iq_status status) {
  if (status != IQ_OK) {
    throw CliFailure{iq_status_exit_code(status), iq_status_name(status), iq_last_error()};
  }
}

[[noreturn]] void input_error(const std::string& message) {
  throw CliFailure{2, "UsageError", message};
}

struct StringDeleter {
  void operator()(char* s) const { iq_string_free(s); }
};
using CString = std::unique_ptr<char, StringDeleter>;

struct DatasetDeleter {
  void operator()(iq_dataset* d) const { iq_dataset_free(d); }
};
using Dataset = std::unique_ptr<iq_dataset, DatasetDeleter>;

struct ReportDeleter {
  void operator()(iq_report* r) const { iq_report_free(r); }
};
using Report = std::unique_ptr<iq_report, ReportDeleter>;

struct SeriesDeleter {
  void operator()(iq_series* s) const { iq_series_free(s); }
};
using Series = std::unique_ptr<iq_series, SeriesDeleter>;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) input_error("cannot open " + path + " for writing");
  out << text;
  if (!out) input_error("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{2, "IoError", "cannot open " + path};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

iq_format parse_format(const std::string& name) {
  return name == "csv" ? IQ_FORMAT_CSV : IQ_FORMAT_BINARY;
}

struct InputOptions {
  std::string embeddings;
  std::string labels;
  std::string format = "binary";

  void attach(CLI::App* cmd) {
    cmd->add_option("--embeddings,-e", embeddings, "Embedding file (IQEM binary or CSV)")->required();
    cmd->add_option("--labels,-l", labels, "Label file (IQLB binary; unused for CSV)");
    cmd->add_option("--format", format, "Input format")
        ->check(CLI::IsMember({"binary", "csv"}))
        ->capture_default_str();
  }

  Dataset load() const {
    const iq_format fmt = parse_format(format);
    if (fmt == IQ_FORMAT_BINARY && labels.empty()) input_error("binary input needs --labels");
    iq_dataset* raw = nullptr;
    check(iq_dataset_read(embeddings.c_str(), labels.empty() ? nullptr : labels.c_str(), fmt, &raw));
    return Dataset(raw);
  }
};

struct OutputOptions {
  std::string embeddings;
  std::string labels;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out-embeddings", embeddings, "Output embedding file (IQEM)")->required();
    cmd->add_option("--out-labels", labels, "Output label file (IQLB)")->required();
  }

  void save(const iq_dataset* ds) const {
    check(iq_dataset_write(ds, embeddings.c_str(), labels.c_str(), IQ_FORMAT_BINARY));
  }
};

// Flags shared by compute and synth.
struct MetricOptions {
  iq_compute_config cfg{};
  bool no_dedup = false;
  bool ceiling = false;

  MetricOptions() { iq_compute_config_init(&cfg); }

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", cfg.k, "Neighborhood size")->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "Weight of neighbor consistency")->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "Weight of normalized effective rank")->capture_default_str();
    cmd->add_option("--identities,-M", cfg.target_identities, "Identities to sample")
        ->capture_default_str();
    cmd->add_option("--per-identity,-m", cfg.per_identity, "Rows per sampled identity")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--dedup", cfg.dedup_threshold, "Within-identity dedup cosine threshold")
        ->capture_default_str();
    cmd->add_flag("--no-dedup", no_dedup, "Disable within-identity dedup");
    cmd->add_option("--min-identity-size", cfg.min_identity_size,
                    "Identities smaller than this are not sampled")
        ->capture_default_str();
    cmd->add_flag("--ceiling", ceiling, "Agreement denominator min(k, n_y - 1) instead of k");
    cmd->add_option("--bins", cfg.histogram_bins, "Agreement histogram bins")->capture_default_str();
    cmd->add_option("--rankme-epsilon", cfg.rankme_epsilon, "RankMe smoothing epsilon")
        ->capture_default_str();
  }

  iq_compute_config finalize() {
    cfg.dedup = no_dedup ? 0 : 1;
    cfg.ceiling_normalized = ceiling ? 1 : 0;
    return cfg;
  }
};

void apply_threads(std::optional<std::size_t> flag) {
  if (flag) {
    iq_set_threads(*flag);
    return;
  }
  if (const char* env = std::getenv("IQSCORE_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long value = std::strtoull(env, &end, 10);
    if (*end != '\0') input_error("IQSCORE_THREADS must be a non-negative integer");
    iq_set_threads(static_cast<std::size_t>(value));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic quality scoring for labeled embedding datasets"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "Worker threads (0 = all cores; env IQSCORE_THREADS)");
  app.set_version_flag("--version", std::string(iq_version()));

  // compute
  auto* compute = app.add_subcommand("compute", "Compute the IQ report of a labeled embedding set");
  InputOptions compute_in;
  MetricOptions compute_metrics;
  bool no_sample = false;
  bool rankme_centered = false;
  std::string report_out = "-", sidecars, manifest_out, timings_out;
  compute_in.attach(compute);
  compute_metrics.attach(compute);
  compute->add_flag("--no-sample", no_sample, "Analyze the whole file instead of a sample");
  compute->add_flag("--rankme-centered", rankme_centered, "Center rows before RankMe");
  compute->add_option("--out,-o", report_out, "Report JSON path ('-' = stdout)");
  compute->add_option("--sidecars", sidecars, "Prefix for plot-ready CSV sidecars");
  compute->add_option("--manifest", manifest_out, "Write the sampling manifest JSON here");
  compute->add_option("--timings", timings_out, "Write per-stage timings JSON here");

  // synth
  auto* synth = app.add_subcommand("synth", "Run a synthetic scenario series");
  std::string scenario_path, synth_reports = "-", synth_plane;
  MetricOptions synth_metrics;
  synth->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  synth_metrics.attach(synth);
  synth->add_option("--out,-o", synth_reports, "Reports JSON path ('-' = stdout)");
  synth->add_option("--plane", synth_plane, "Write the (r_norm, consis) plane CSV here");

  // sweep-beta
  auto* sweep = app.add_subcommand("sweep-beta", "Correlation of IQ with accuracy over a beta grid");
  std::string sweep_series, sweep_out = "-";
  double grid_step = 0.05;
  sweep->add_option("series", sweep_series, "Settings CSV: name,accuracy,consis,er_norm[,rankme]")
      ->required();
  sweep->add_option("--step", grid_step, "Grid step over [0, 1]")->capture_default_str();
  sweep->add_option("--out,-o", sweep_out, "Sweep CSV path ('-' = stdout)");

  // compare
  auto* compare = app.add_subcommand("compare", "Rank-agreement table of intrinsic metrics");
  std::string compare_series, compare_csv = "-", compare_json;
  double compare_alpha = 0.2, compare_beta = 0.8;
  compare->add_option("series", compare_series, "Settings CSV")->required();
  compare->add_option("--alpha", compare_alpha)->capture_default_str();
  compare->add_option("--beta", compare_beta)->capture_default_str();
  compare->add_option("--csv", compare_csv, "Table CSV path ('-' = stdout)");
  compare->add_option("--json", compare_json, "Table JSON path");

  // inject-noise
  auto* noise = app.add_subcommand("inject-noise", "Uniform closed-set label flips");
  InputOptions noise_in;
  OutputOptions noise_out;
  double flip_ratio = 0.0;
  std::uint64_t noise_seed = 0;
  std::string flip_log;
  noise_in.attach(noise);
  noise_out.attach(noise);
  noise->add_option("--ratio", flip_ratio, "Flip probability per row")->required();
  noise->add_option("--seed", noise_seed)->capture_default_str();
  noise->add_option("--log", flip_log, "Flip log JSON path");

  // sample
  auto* sample = app.add_subcommand("sample", "Identity-stratified sampling with dedup");
  InputOptions sample_in;
  OutputOptions sample_out;
  iq_sampling_config sampling{};
  iq_sampling_config_init(&sampling);
  bool sample_no_dedup = false;
  std::string sample_manifest;
  sample_in.attach(sample);
  sample_out.attach(sample);
  sample->add_option("--identities,-M", sampling.target_identities)->capture_default_str();
  sample->add_option("--per-identity,-m", sampling.per_identity)->capture_default_str();
  sample->add_option("--seed", sampling.seed)->capture_default_str();
  sample->add_option("--dedup", sampling.dedup_threshold)->capture_default_str();
  sample->add_flag("--no-dedup", sample_no_dedup);
  sample->add_option("--min-identity-size", sampling.min_identity_size)->capture_default_str();
  sample->add_option("--manifest", sample_manifest, "Manifest JSON path");

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic clustered embedding set");
  std::size_t gen_identities = 1000, gen_per_identity = 10, gen_dim = 128;
  double gen_sigma = 0.3;
  std::uint64_t gen_seed = 0;
  std::string gen_embeddings, gen_labels, gen_format = "binary";
  generate->add_option("--identities,-M", gen_identities)->capture_default_str();
  generate->add_option("--per-identity,-m", gen_per_identity)->capture_default_str();
  generate->add_option("--dim,-d", gen_dim)->capture_default_str();
  generate->add_option("--sigma", gen_sigma, "Expected perturbation norm")->capture_default_str();
  generate->add_option("--seed", gen_seed)->capture_default_str();
  generate->add_option("--out-embeddings", gen_embeddings, "Output embedding file")->required();
  generate->add_option("--out-labels", gen_labels, "Output label file (binary format)");
  generate->add_option("--format", gen_format)
      ->check(CLI::IsMember({"binary", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "{\"error\":\"UsageError\",\"exit_code\":2,\"message\":\"" << json_escape(e.what())
              << "\"}\n";
    return 2;
  }

  try {
    apply_threads(threads);

    if (compute->parsed()) {
      const Dataset ds = compute_in.load();
      iq_compute_config cfg = compute_metrics.finalize();
      cfg.sample = no_sample ? 0 : 1;
      cfg.rankme_centered = rankme_centered ? 1 : 0;
      iq_report* raw = nullptr;
      check(iq_compute(ds.get(), &cfg, &raw));
      const Report report(raw);
      char* json = nullptr;
      check(iq_report_json(report.get(), &json));
      write_text(report_out, CString(json).get());
      if (!sidecars.empty()) check(iq_report_write_sidecars(report.get(), sidecars.c_str()));
      if (!manifest_out.empty()) {
        char* manifest = nullptr;
        check(iq_report_manifest_json(report.get(), &manifest));
        write_text(manifest_out, CString(manifest).get());
      }
      if (!timings_out.empty()) {
        char* timings = nullptr;
        check(iq_report_timings_json(report.get(), &timings));
        write_text(timings_out, CString(timings).get());
      }
    } else if (synth->parsed()) {
      const std::string scenario = read_text(scenario_path);
      const iq_compute_config cfg = synth_metrics.finalize();
      char* reports = nullptr;
      char* plane = nullptr;
      check(iq_synth_run(scenario.c_str(), &cfg, &reports, &plane));
      const CString reports_owned(reports), plane_owned(plane);
      write_text(synth_reports, reports);
      if (!synth_plane.empty()) write_text(synth_plane, plane);
    } else if (sweep->parsed()) {
      if (!(grid_step > 0.0 && grid_step <= 1.0)) input_error("--step must lie in (0, 1]");
      iq_series* raw = nullptr;
      check(iq_series_read_csv(sweep_series.c_str(), &raw));
      const Series series(raw);
      std::vector<double> grid;
      const auto steps = static_cast<long>(std::floor(1.0 / grid_step + 1e-9));
      for (long i = 0; i <= steps; ++i) grid.push_back(static_cast<double>(i) * grid_step);
      if (grid.back() < 1.0 - 1e-9) grid.push_back(1.0);
      char* csv = nullptr;
      check(iq_sweep_beta(series.get(), grid.data(), grid.size(), &csv));
      write_text(sweep_out, CString(csv).get());
    } else if (compare->parsed()) {
      iq_series* raw = nullptr;
      check(iq_series_read_csv(compare_series.c_str(), &raw));
      const Series series(raw);
      char* csv = nullptr;
      char* json = nullptr;
      check(iq_compare(series.get(), compare_alpha, compare_beta, &csv, &json));
      const CString csv_owned(csv), json_owned(json);
      write_text(compare_csv, csv);
      if (!compare_json.empty()) write_text(compare_json, json);
    } else if (noise->parsed()) {
      const Dataset ds = noise_in.load();
      iq_dataset* raw = nullptr;
      char* log = nullptr;
      check(iq_dataset_inject_noise(ds.get(), flip_ratio, noise_seed, &raw, &log));
      const Dataset out(raw);
      const CString log_owned(log);
      noise_out.save(out.get());
      if (!flip_log.empty()) write_text(flip_log, log);
    } else if (sample->parsed()) {
      const Dataset ds = sample_in.load();
      sampling.dedup = sample_no_dedup ? 0 : 1;
      iq_dataset* raw = nullptr;
      char* manifest = nullptr;
      check(iq_dataset_sample(ds.get(), &sampling, &raw, &manifest));
      const Dataset out(raw);
      const CString manifest_owned(manifest);
      sample_out.save(out.get());
      if (!sample_manifest.empty()) write_text(sample_manifest, manifest);
    } else if (generate->parsed()) {
      const iq_format fmt = parse_format(gen_format);
      if (fmt == IQ_FORMAT_BINARY && gen_labels.empty()) input_error("binary output needs --out-labels");
      iq_dataset* raw = nullptr;
      check(iq_dataset_generate(gen_identities, gen_per_identity, gen_dim, gen_sigma, gen_seed, &raw));
      const Dataset out(raw);
      check(iq_dataset_write(out.get(), gen_embeddings.c_str(), gen_labels.empty() ? nullptr : gen_labels.c_str(),
                             fmt));
    }
  } catch (const CliFailure& f) {
    std::cerr << "{\"error\":\"" << json_escape(f.kind) << "\",\"exit_code\":" << f.exit_code
              << ",\"message\":\"" << json_escape(f.message) << "\"}\n";
    return f.exit_code;
  }
  return 0;
}
