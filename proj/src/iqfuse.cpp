#include "iqscore/iqfuse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "iqscore/error.hpp"

namespace iqscore {
namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::kLengthMismatch, "correlation inputs differ in length");
  }
  if (x.size() < 2) fail(ErrorCode::kInvalidArgument, "correlation needs at least 2 points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      fail(ErrorCode::kInvalidArgument, "correlation inputs must be finite");
    }
  }
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kSchema, "line " + std::to_string(line) + ": '" + cell + "' is not a number");
  }
}

std::vector<double> fuse(const SettingsSeries& s, double alpha, double beta) {
  std::vector<double> iq(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) iq[i] = iq_score(s.consis[i], s.er_norm[i], alpha, beta);
  return iq;
}

AgreementRow agreement_row(std::string name, std::span<const double> metric,
                           std::span<const double> accuracy) {
  return {std::move(name), spearman(metric, accuracy), pearson(metric, accuracy),
          kendall_tau_b(metric, accuracy)};
}

}  // namespace

double iq_score(double mean_consis, double er_norm, double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-12) {
    fail(ErrorCode::kWeightError, "weights must be non-negative and sum to 1");
  }
  if (!(mean_consis >= 0.0 && mean_consis <= 1.0) || !(er_norm >= 0.0 && er_norm <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "IQ components must lie in [0, 1]");
  }
  return alpha * mean_consis + beta * er_norm;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::kZeroVariance, "an input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean 1-based rank.
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  // Plain O(n^2) pair count; settings series are small.
  double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int sx = sign(x[i] - x[j]);
      const int sy = sign(y[i] - y[j]);
      if (sx == 0 && sy == 0) continue;
      if (sx == 0) {
        ties_x += 1.0;
      } else if (sy == 0) {
        ties_y += 1.0;
      } else if (sx == sy) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + ties_x) *
                                 (concordant + discordant + ties_y));
  if (concordant + discordant + ties_x == 0.0 || concordant + discordant + ties_y == 0.0) {
    fail(ErrorCode::kZeroVariance, "an input is constant");
  }
  return (concordant - discordant) / denom;
}

void SettingsSeries::validate() const {
  const std::size_t n = names.size();
  if (n < 2) fail(ErrorCode::kSchema, "settings series needs at least 2 rows");
  if (accuracy.size() != n || consis.size() != n || er_norm.size() != n ||
      (rankme && rankme->size() != n)) {
    fail(ErrorCode::kSchema, "settings series columns differ in length");
  }
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) fail(ErrorCode::kSchema, "duplicate setting name '" + name + "'");
  }
  for (double a : accuracy) {
    if (!std::isfinite(a)) fail(ErrorCode::kSchema, "accuracy values must be finite");
  }
}

SettingsSeries parse_settings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
  }
  const std::vector<std::string> required = {"name", "accuracy", "consis", "er_norm"};
  if (header.size() < 4 || !std::equal(required.begin(), required.end(), header.begin()) ||
      header.size() > 5 || (header.size() == 5 && header[4] != "rankme")) {
    fail(ErrorCode::kSchema, "header must be name,accuracy,consis,er_norm[,rankme]");
  }
  const bool has_rankme = header.size() == 5;

  SettingsSeries s;
  if (has_rankme) s.rankme.emplace();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorCode::kSchema, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " columns");
    }
    s.names.push_back(cells[0]);
    s.accuracy.push_back(parse_number(cells[1], line_no));
    s.consis.push_back(parse_number(cells[2], line_no));
    s.er_norm.push_back(parse_number(cells[3], line_no));
    if (has_rankme) s.rankme->push_back(parse_number(cells[4], line_no));
  }
  s.validate();
  return s;
}

SettingsSeries read_settings_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open settings file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_settings_csv(buffer.str());
}

std::vector<double> default_beta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
  return grid;
}

std::vector<SweepRow> beta_sweep(const SettingsSeries& series, std::span<const double> grid) {
  series.validate();
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double beta : grid) {
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorCode::kInvalidArgument, "beta outside [0, 1]");
    const std::vector<double> iq = fuse(series, 1.0 - beta, beta);
    rows.push_back({beta, spearman(iq, series.accuracy), pearson(iq, series.accuracy)});
  }
  return rows;
}

AgreementReport rank_agreement_report(const SettingsSeries& series, double alpha, double beta) {
  series.validate();
  AgreementReport report{alpha, beta, {}};
  report.rows.push_back(agreement_row("ER-only", series.er_norm, series.accuracy));
  report.rows.push_back(agreement_row("Consis-only", series.consis, series.accuracy));
  report.rows.push_back(agreement_row("IQ", fuse(series, alpha, beta), series.accuracy));
  if (series.rankme) report.rows.push_back(agreement_row("RankMe", *series.rankme, series.accuracy));
  return report;
}

std::string agreement_report_csv(const AgreementReport& report) {
  std::ostringstream out;
  out << "metric,spearman,pearson,kendall\n" << std::setprecision(17);
  for (const auto& row : report.rows) {
    out << row.metric << ',' << row.spearman << ',' << row.pearson << ',' << row.kendall << '\n';
  }
  return out.str();
}

nlohmann::json agreement_report_json(const AgreementReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"metric", row.metric},
                    {"spearman", row.spearman},
                    {"pearson", row.pearson},
                    {"kendall_tau_b", row.kendall}});
  }
  return {{"schema", "iqscore.compare"},
          {"version", 1},
          {"alpha", report.alpha},
          {"beta", report.beta},
          {"rows", rows}};
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "beta,spearman,pearson\n" << std::setprecision(17);
  for (const auto& row : rows) out << row.beta << ',' << row.spearman << ',' << row.pearson << '\n';
  return out.str();
}

}  // namespace iqscore
