#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "iqscore/core.hpp"
#include "iqscore/dataio.hpp"

namespace iqscore {

inline constexpr int kReportSchemaVersion = 1;

struct ComputeResult {
  IqReport report;
  std::optional<SampleManifest> manifest;
};

// normalize -> (stratified sample | whole-set dedup) -> k-NN -> Consis ->
// spectrum -> RankMe -> IQ.
ComputeResult compute_report(const LabeledEmbeddingSet& input, const IqReportConfig& cfg);

// Primary report JSON. Timings are only included on request so the default
// output is byte-stable across runs.
nlohmann::json report_to_json(const IqReport& report, bool include_timings = false);
nlohmann::json timings_to_json(const StageTimings& timings);

// Writes <prefix>agreement.csv, <prefix>histogram.csv, <prefix>spectrum.csv,
// <prefix>log_spectrum.csv and <prefix>cev.csv.
void write_report_sidecars(const IqReport& report, const std::string& prefix);

}  // namespace iqscore
