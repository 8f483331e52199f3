#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace iqscore {

inline constexpr double kDefaultAlpha = 0.2;
inline constexpr double kDefaultBeta = 0.8;

// alpha * mean_consis + beta * er_norm on the weight simplex.
double iq_score(double mean_consis, double er_norm, double alpha = kDefaultAlpha,
                double beta = kDefaultBeta);

double pearson(std::span<const double> x, std::span<const double> y);

// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

double spearman(std::span<const double> x, std::span<const double> y);

// Tau-b: (C - D) / sqrt((C + D + Tx)(C + D + Ty)), Tx/Ty = pairs tied only in x/y.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// One row per dataset setting: downstream accuracy and the intrinsic signals.
struct SettingsSeries {
  std::vector<std::string> names;
  std::vector<double> accuracy;
  std::vector<double> consis;
  std::vector<double> er_norm;
  std::optional<std::vector<double>> rankme;

  std::size_t size() const noexcept { return names.size(); }
  void validate() const;
};

// Columns: name,accuracy,consis,er_norm[,rankme]; header row required.
SettingsSeries read_settings_csv(const std::filesystem::path& path);
SettingsSeries parse_settings_csv(const std::string& text);

struct SweepRow {
  double beta;
  double spearman;
  double pearson;
};

std::vector<double> default_beta_grid();

std::vector<SweepRow> beta_sweep(const SettingsSeries& series, std::span<const double> grid);

struct AgreementRow {
  std::string metric;
  double spearman;
  double pearson;
  double kendall;
};

struct AgreementReport {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  std::vector<AgreementRow> rows;  // ER-only, Consis-only, IQ, [RankMe]
};

AgreementReport rank_agreement_report(const SettingsSeries& series,
                                      double alpha = kDefaultAlpha,
                                      double beta = kDefaultBeta);

std::string agreement_report_csv(const AgreementReport& report);
nlohmann::json agreement_report_json(const AgreementReport& report);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace iqscore
