#include "iqscore/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <string>

#include "gram_kernel.hpp"

namespace iqscore {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double spectrum_total(std::span<const double> eigenvalues) {
  double total = 0.0;
  for (double v : eigenvalues) {
    if (v < 0.0 || !std::isfinite(v)) {
      fail(ErrorCode::kInvalidArgument, "spectrum entries must be finite and non-negative");
    }
    total += v;
  }
  if (!(total > 0.0)) fail(ErrorCode::kAllZeroSpectrum, "spectrum has no positive mass");
  return total;
}

// Shannon entropy (natural log) of the normalized weights, 0 ln 0 = 0.
double entropy_of(std::span<const double> weights) {
  double h = 0.0;
  for (double p : weights) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

detail::DenseRows dense_of(const CenteredMatrix& c) {
  return detail::DenseRows{c.n, c.d, c.data};
}

CovarianceMatrix scaled(std::vector<double> gram, std::size_t dim, std::size_t n) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : gram) v *= inv_n;
  CovarianceMatrix out{dim, std::move(gram)};
  // Averaging with the transpose; the kernel already yields exact symmetry.
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a + 1; b < dim; ++b) {
      const double avg = 0.5 * (out.data[a * dim + b] + out.data[b * dim + a]);
      out.data[a * dim + b] = avg;
      out.data[b * dim + a] = avg;
    }
  }
  return out;
}

}  // namespace

CenteredMatrix center_rows(const EmbeddingSet& set) {
  const std::size_t n = set.rows();
  const std::size_t d = set.dim();
  CenteredMatrix c{n, d, std::vector<double>(n * d), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = set.row(i);
    for (std::size_t t = 0; t < d; ++t) c.mean[t] += static_cast<double>(r[t]);
  }
  for (double& m : c.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = set.row(i);
    for (std::size_t t = 0; t < d; ++t) c.data[i * d + t] = static_cast<double>(r[t]) - c.mean[t];
  }
  return c;
}

CovarianceMatrix covariance(const CenteredMatrix& centered) {
  if (centered.n == 0) fail(ErrorCode::kInvalidArgument, "covariance of an empty matrix");
  const detail::DenseRows columns = detail::transpose(dense_of(centered));
  return scaled(detail::symmetric_gram(columns), centered.d, centered.n);
}

CovarianceMatrix gram_covariance(const CenteredMatrix& centered) {
  if (centered.n == 0) fail(ErrorCode::kInvalidArgument, "Gram of an empty matrix");
  return scaled(detail::symmetric_gram(dense_of(centered)), centered.n, centered.n);
}

std::vector<double> sym_eigenvalues(const CovarianceMatrix& c, EigenOptions options) {
  const auto dim = static_cast<Eigen::Index>(c.d);
  for (double v : c.data) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "matrix has non-finite entries");
  }
  const Eigen::Map<const RowMatrix> m(c.data.data(), dim, dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, options.validate ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::kConvergenceFailure, "symmetric eigensolver did not converge");
  }

  if (options.validate) {
    const Eigen::MatrixXd residual =
        m * solver.eigenvectors() - solver.eigenvectors() * solver.eigenvalues().asDiagonal();
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double lambda = solver.eigenvalues()(j);
      if (residual.col(j).norm() > 1e-6 * (1.0 + std::abs(lambda))) {
        fail(ErrorCode::kConvergenceFailure,
             "eigenpair residual check failed at index " + std::to_string(j));
      }
    }
  }

  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + dim);
  std::sort(values.begin(), values.end(), std::greater<>());
  const double cutoff = values.empty() ? 0.0 : kEigenClipRelative * std::max(values.front(), 0.0);
  for (double& v : values) {
    if (v < cutoff) v = 0.0;
  }
  return values;
}

std::vector<double> spectral_weights(std::span<const double> eigenvalues) {
  const double total = spectrum_total(eigenvalues);
  std::vector<double> p(eigenvalues.size());
  for (std::size_t l = 0; l < p.size(); ++l) p[l] = eigenvalues[l] / total;
  return p;
}

double effective_rank(std::span<const double> eigenvalues) {
  const std::vector<double> p = spectral_weights(eigenvalues);
  return std::exp(entropy_of(p));
}

double normalized_effective_rank(double r_ent, std::size_t n, std::size_t d, bool* clamped) {
  if (n == 0 || d == 0) fail(ErrorCode::kInvalidArgument, "n and d must be positive");
  if (!(r_ent > 0.0) || !std::isfinite(r_ent)) {
    fail(ErrorCode::kInvalidArgument, "effective rank must be positive and finite");
  }
  const std::size_t q = std::min(n, d);
  if (q < 2) fail(ErrorCode::kDegenerateCap, "min(n, d) < 2 makes ln Q zero");
  const double raw = std::log(r_ent) / std::log(static_cast<double>(q));
  const double value = std::clamp(raw, 0.0, 1.0);
  if (clamped != nullptr) *clamped = value != raw;
  return value;
}

double rankme_score(const EmbeddingSet& set, RankMeOptions options) {
  if (set.rows() < 2) fail(ErrorCode::kInvalidArgument, "RankMe needs at least 2 rows");
  detail::DenseRows rows = detail::to_dense(set.data(), set.rows(), set.dim());
  if (options.centered) rows.data = center_rows(set).data;

  // Squared singular values are the eigenvalues of the smaller Gram matrix.
  const bool wide = rows.rows < rows.cols;
  const detail::DenseRows& operand = wide ? rows : detail::transpose(rows);
  const std::size_t dim = operand.rows;
  CovarianceMatrix gram{dim, detail::symmetric_gram(operand)};
  const std::vector<double> eig = sym_eigenvalues(gram);

  std::vector<double> sigma(eig.size());
  double total = 0.0;
  for (std::size_t k = 0; k < eig.size(); ++k) {
    sigma[k] = std::sqrt(std::max(eig[k], 0.0));
    total += sigma[k];
  }
  if (!(total > 0.0)) fail(ErrorCode::kAllZeroSpectrum, "embedding matrix is all zero");
  double h = 0.0;
  for (double s : sigma) {
    const double p = s / total + options.epsilon;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::exp(h);
}

CevResult cumulative_explained_variance(std::span<const double> eigenvalues) {
  const double total = spectrum_total(eigenvalues);
  CevResult out;
  out.cev.resize(eigenvalues.size());
  double running = 0.0;
  for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
    running += eigenvalues[j];
    out.cev[j] = std::min(1.0, running / total);
  }
  out.cev.back() = 1.0;
  for (std::size_t t = 0; t < kCevThresholds.size(); ++t) {
    const double threshold = kCevThresholds[t] - 1e-12;
    std::size_t count = out.cev.size();
    for (std::size_t j = 0; j < out.cev.size(); ++j) {
      if (out.cev[j] >= threshold) {
        count = j + 1;
        break;
      }
    }
    out.components_to[t] = count;
  }
  return out;
}

std::vector<double> log_spectrum(std::span<const double> eigenvalues, double floor) {
  std::vector<double> out(eigenvalues.size());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = std::log(std::max(eigenvalues[l], floor));
  return out;
}

SpectrumSummary spectrum_summary(const EmbeddingSet& set, EigenOptions options) {
  SpectrumSummary s;
  const std::size_t n = set.rows();
  const std::size_t d = set.dim();
  const CenteredMatrix centered = center_rows(set);

  s.gram_path = n < d;
  std::vector<double> eig =
      sym_eigenvalues(s.gram_path ? gram_covariance(centered) : covariance(centered), options);
  // The Gram route returns n values; the covariance spectrum has d, the rest zero.
  eig.resize(d, 0.0);
  s.zero_eigenvalues = static_cast<std::size_t>(std::count(eig.begin(), eig.end(), 0.0));
  s.eigenvalues = std::move(eig);

  s.weights_p = spectral_weights(s.eigenvalues);
  s.r_ent = std::exp(entropy_of(s.weights_p));
  s.q_cap = std::min(n, d);
  s.r_norm = normalized_effective_rank(s.r_ent, n, d, &s.r_norm_clamped);
  s.cev = cumulative_explained_variance(s.eigenvalues).cev;
  return s;
}

void write_series_csv(std::span<const double> values, std::ostream& out) {
  out << "index,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << values[i] << '\n';
}

}  // namespace iqscore
