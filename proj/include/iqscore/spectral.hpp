#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "iqscore/core.hpp"

namespace iqscore {

struct CenteredMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;  // n x d row-major, E - 1 mu^T
  std::vector<double> mean;  // d
};

struct CovarianceMatrix {
  std::size_t d = 0;
  std::vector<double> data;  // d x d row-major, symmetric
};

CenteredMatrix center_rows(const EmbeddingSet& set);

// (1/n) X^T X.
CovarianceMatrix covariance(const CenteredMatrix& centered);

// (1/n) X X^T: same nonzero spectrum as covariance(), cheaper when n < d.
CovarianceMatrix gram_covariance(const CenteredMatrix& centered);

struct EigenOptions {
  bool validate = false;  // residual check ||Cv - lambda v|| <= 1e-6 (1 + |lambda|)
};

// All eigenvalues, descending, entries below 1e-12 * max clipped to 0.
std::vector<double> sym_eigenvalues(const CovarianceMatrix& c, EigenOptions options = {});

inline constexpr double kEigenClipRelative = 1e-12;

double effective_rank(std::span<const double> eigenvalues);
std::vector<double> spectral_weights(std::span<const double> eigenvalues);

// ln(r_ent) / ln(min(n, d)), clamped to [0, 1]. `clamped` is set when the
// clamp changed the value.
double normalized_effective_rank(double r_ent, std::size_t n, std::size_t d,
                                 bool* clamped = nullptr);

struct RankMeOptions {
  double epsilon = 1e-7;
  bool centered = false;
};

double rankme_score(const EmbeddingSet& set, RankMeOptions options = {});

inline constexpr std::array<double, 3> kCevThresholds = {0.90, 0.95, 0.99};

struct CevResult {
  std::vector<double> cev;
  std::array<std::size_t, 3> components_to{};  // for kCevThresholds
};

CevResult cumulative_explained_variance(std::span<const double> eigenvalues);

std::vector<double> log_spectrum(std::span<const double> eigenvalues, double floor = 1e-15);

// Centering, covariance (or Gram when n < d), eigenvalues, r_ent, r_norm, CEV.
SpectrumSummary spectrum_summary(const EmbeddingSet& set, EigenOptions options = {});

// index,value
void write_series_csv(std::span<const double> values, std::ostream& out);

}  // namespace iqscore
