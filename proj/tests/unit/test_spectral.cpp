#include <cstring>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "iqscore/parallel.hpp"
#include "iqscore/spectral.hpp"

using namespace iqscore;

namespace {

CovarianceMatrix mat(std::size_t d, std::vector<double> v) { return CovarianceMatrix{d, std::move(v)}; }

CenteredMatrix centered(std::size_t n, std::size_t d, std::vector<double> v) {
  return CenteredMatrix{n, d, std::move(v), std::vector<double>(d, 0.0)};
}

// Plain double loops, no blocking.
std::vector<double> naive_covariance(const EmbeddingSet& s) {
  const std::size_t n = s.rows(), d = s.dim();
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) mu[t] += s.row(i)[t];
  }
  for (auto& m : mu) m /= static_cast<double>(n);
  std::vector<double> c(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        c[a * d + b] += (s.row(i)[a] - mu[a]) * (s.row(i)[b] - mu[b]);
      }
    }
  }
  for (auto& x : c) x /= static_cast<double>(n);
  return c;
}

// Covariance in extended precision for the characteristic-polynomial oracle.
std::vector<long double> covariance_ld(const EmbeddingSet& s) {
  const std::size_t n = s.rows(), d = s.dim();
  std::vector<long double> mu(d, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) mu[t] += s.row(i)[t];
  }
  for (auto& m : mu) m /= static_cast<long double>(n);
  std::vector<long double> c(d * d, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        c[a * d + b] += (s.row(i)[a] - mu[a]) * (s.row(i)[b] - mu[b]);
      }
    }
  }
  for (auto& x : c) x /= static_cast<long double>(n);
  return c;
}

// Roots of the characteristic polynomial of a symmetric matrix with d <= 3,
// in closed form and long double (repeated roots cost half the digits); descending.
std::vector<double> charpoly_roots(const std::vector<long double>& m, std::size_t d) {
  using L = long double;
  if (d == 1) return {static_cast<double>(m[0])};
  if (d == 2) {
    const L tr = m[0] + m[3];
    const L det = m[0] * m[3] - m[1] * m[2];
    const L disc = std::sqrt(std::max(0.0L, tr * tr / 4.0L - det));
    return {static_cast<double>(tr / 2.0L + disc), static_cast<double>(tr / 2.0L - disc)};
  }
  // Trigonometric solution of det(lambda I - A) = 0 for real symmetric A.
  const L a = m[0], b = m[4], c = m[8], d1 = m[1], e = m[5], f = m[2];
  const L p1 = d1 * d1 + f * f + e * e;
  const L q = (a + b + c) / 3.0L;
  const L p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0L * p1;
  if (p2 <= 0.0L) return {static_cast<double>(q), static_cast<double>(q), static_cast<double>(q)};
  const L p = std::sqrt(p2 / 6.0L);
  const L b00 = (a - q) / p, b11 = (b - q) / p, b22 = (c - q) / p;
  const L b01 = d1 / p, b02 = f / p, b12 = e / p;
  const L detb = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                 b02 * (b01 * b12 - b11 * b02);
  const L r = std::clamp(detb / 2.0L, -1.0L, 1.0L);
  const L phi = std::acos(r) / 3.0L;
  const L l1 = q + 2.0L * p * std::cos(phi);
  const L l3 = q + 2.0L * p * std::cos(phi + 2.0L * std::numbers::pi_v<L> / 3.0L);
  const L l2 = 3.0L * q - l1 - l3;
  std::vector<double> out = {static_cast<double>(l1), static_cast<double>(l2), static_cast<double>(l3)};
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::vector<double> spectrum_of(const EmbeddingSet& s) {
  return sym_eigenvalues(covariance(center_rows(s)));
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("centering examples") {
    auto c = center_rows(EmbeddingSet(2, 2, {1, 0, -1, 0}));
    CHECK(c.mean == std::vector<double>{0, 0});
    CHECK(c.data == std::vector<double>{1, 0, -1, 0});
    c = center_rows(EmbeddingSet(2, 2, {1, 1, 1, 1}));
    CHECK(c.data == std::vector<double>{0, 0, 0, 0});
    c = center_rows(EmbeddingSet(2, 2, {2, 0, 0, 2}));
    CHECK(c.mean == std::vector<double>{1, 1});
    CHECK(c.data == std::vector<double>{1, -1, -1, 1});
  }

  TEST_CASE("centered columns have zero mean") {
    const auto c = center_rows(testutil::random_set(333, 20, 2, false));
    for (std::size_t t = 0; t < 20; ++t) {
      double m = 0.0;
      for (std::size_t i = 0; i < 333; ++i) m += c.data[i * 20 + t];
      CHECK(std::abs(m / 333.0) < 1e-6);
    }
  }

  TEST_CASE("covariance examples") {
    CHECK(covariance(centered(2, 2, {1, -1, -1, 1})).data == std::vector<double>{1, -1, -1, 1});
    CHECK(covariance(centered(3, 2, std::vector<double>(6, 0.0))).data == std::vector<double>(4, 0.0));
    CHECK(covariance(centered(4, 2, {1, 0, -1, 0, 0, 1, 0, -1})).data ==
          std::vector<double>{0.5, 0, 0, 0.5});
  }

  TEST_CASE("covariance matches naive loops and is symmetric") {
    const auto s = testutil::random_set(150, 37, 6, false);
    const auto c = covariance(center_rows(s));
    const auto ref = naive_covariance(s);
    for (std::size_t a = 0; a < 37; ++a) {
      CHECK(c.data[a * 37 + a] >= -1e-9);
      for (std::size_t b = 0; b < 37; ++b) {
        CHECK(std::abs(c.data[a * 37 + b] - ref[a * 37 + b]) <= 1e-12);
        CHECK(c.data[a * 37 + b] == c.data[b * 37 + a]);
      }
    }
  }

  TEST_CASE("covariance is bit-identical across worker counts") {
    const auto s = testutil::random_set(300, 200, 9);
    set_worker_count(1);
    const auto a = covariance(center_rows(s));
    set_worker_count(5);
    const auto b = covariance(center_rows(s));
    set_worker_count(0);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
  }

  TEST_CASE("eigenvalue examples") {
    CHECK(sym_eigenvalues(mat(2, {0.5, 0, 0, 0.5})) == std::vector<double>{0.5, 0.5});
    const auto e = sym_eigenvalues(mat(2, {1, -1, -1, 1}), {true});
    CHECK(e[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(e[1] == 0.0);
    CHECK(sym_eigenvalues(mat(5, std::vector<double>(25, 0.0))) == std::vector<double>(5, 0.0));
    CHECK_ERROR_CODE(sym_eigenvalues(mat(1, {NAN})), ErrorCode::kInvalidArgument);
  }

  TEST_CASE("eigenvalues below the relative floor are exact zeros") {
    const auto e = sym_eigenvalues(mat(3, {1, 0, 0, 0, 1e-13, 0, 0, 0, -1e-14}));
    CHECK(e == std::vector<double>{1, 0, 0});
  }

  TEST_CASE("small-case characteristic polynomial oracle") {
    std::mt19937_64 g(4);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t d = 1 + trial % 3;
      const std::size_t n = 2 + trial % 5;
      const auto s = testutil::random_set(n, d, 100 + trial, false);
      const auto c = covariance(center_rows(s));
      const auto ours = sym_eigenvalues(c, {true});
      const auto oracle = charpoly_roots(covariance_ld(s), d);
      const double cutoff = 1e-12 * std::max(oracle[0], 0.0);
      for (std::size_t l = 0; l < d; ++l) {
        const double expect = oracle[l] < cutoff ? 0.0 : oracle[l];
        CHECK(std::abs(ours[l] - expect) <= 1e-8);
      }
    }
  }

  TEST_CASE("effective rank examples") {
    CHECK(effective_rank(std::vector<double>{0.5, 0.5}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(effective_rank(std::vector<double>{0.5, 0.5}) - 2.0) <= 1e-9);
    CHECK(effective_rank(std::vector<double>{1, 0, 0}) == 1.0);
    const double h = -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1));
    CHECK(h == doctest::Approx(0.80182).epsilon(1e-5));
    CHECK(std::abs(effective_rank(std::vector<double>{0.7, 0.2, 0.1}) - 2.2297) <= 1e-3);
    CHECK_ERROR_CODE(effective_rank(std::vector<double>{0, 0}), ErrorCode::kAllZeroSpectrum);
    CHECK_ERROR_CODE(effective_rank(std::vector<double>{1, -0.5}), ErrorCode::kInvalidArgument);
  }

  TEST_CASE("normalized effective rank examples") {
    CHECK(normalized_effective_rank(1.0, 10, 4) == 0.0);
    CHECK(normalized_effective_rank(4.0, 10, 4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(normalized_effective_rank(7.0, 7, 100) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(normalized_effective_rank(2.2297, 4, 3) - 0.7299) <= 1e-4);
    bool clamped = false;
    CHECK(normalized_effective_rank(5.0, 10, 4, &clamped) == 1.0);
    CHECK(clamped);
    CHECK(normalized_effective_rank(0.5, 10, 4, &clamped) == 0.0);
    CHECK(clamped);
    CHECK_ERROR_CODE(normalized_effective_rank(1.0, 1, 50), ErrorCode::kDegenerateCap);
    CHECK_ERROR_CODE(normalized_effective_rank(1.0, 50, 1), ErrorCode::kDegenerateCap);
  }

  TEST_CASE("rankme examples") {
    // Rows of a scaled 4x4 orthogonal matrix: equal singular values.
    const auto q = testutil::random_orthogonal(4, 3);
    std::vector<float> v(q.begin(), q.end());
    const EmbeddingSet orth(4, 4, v);
    CHECK(std::abs(rankme_score(orth) - 4.0) <= 1e-6);

    std::vector<float> same(6 * 1024);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t t = 0; t < 1024; ++t) same[i * 1024 + t] = static_cast<float>((t % 7) + 1);
    }
    const double r1 = rankme_score(EmbeddingSet(6, 1024, same));
    CHECK(r1 >= 1.0);
    CHECK(r1 <= 1.01);
    CHECK(rankme_score(EmbeddingSet(6, 1024, same), {0.0, false}) == doctest::Approx(1.0).epsilon(1e-12));

    const auto s = testutil::random_set(80, 12, 5);
    CHECK(std::abs(rankme_score(testutil::scale(s, 10.0f)) - rankme_score(s)) <= 1e-9);
    CHECK_ERROR_CODE(rankme_score(EmbeddingSet(2, 2, {0, 0, 0, 0})), ErrorCode::kAllZeroSpectrum);
  }

  TEST_CASE("rankme matches singular values from the tall and wide sides") {
    const auto s = testutil::random_set(30, 12, 8, false);
    std::vector<float> t(12 * 30);
    for (std::size_t i = 0; i < 30; ++i) {
      for (std::size_t j = 0; j < 12; ++j) t[j * 30 + i] = s.row(i)[j];
    }
    CHECK(rankme_score(s) == doctest::Approx(rankme_score(EmbeddingSet(12, 30, t))).epsilon(1e-10));
  }

  TEST_CASE("cumulative explained variance examples") {
    auto r = cumulative_explained_variance(std::vector<double>{2, 0});
    CHECK(r.cev == std::vector<double>{1, 1});
    CHECK(r.components_to[1] == 1);
    r = cumulative_explained_variance(std::vector<double>{0.5, 0.5});
    CHECK(r.cev == std::vector<double>{0.5, 1});
    CHECK(r.components_to[1] == 2);
    r = cumulative_explained_variance(std::vector<double>{0.7, 0.2, 0.1});
    CHECK(r.cev[0] == doctest::Approx(0.7));
    CHECK(r.cev[1] == doctest::Approx(0.9));
    CHECK(r.cev[2] == 1.0);
    CHECK(r.components_to[0] == 2);
    CHECK(r.components_to[2] == 3);
    CHECK_ERROR_CODE(cumulative_explained_variance(std::vector<double>{0, 0}), ErrorCode::kAllZeroSpectrum);
  }

  TEST_CASE("log spectrum examples") {
    const auto a = log_spectrum(std::vector<double>{std::numbers::e, 1});
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a[1] == 0.0);
    CHECK(log_spectrum(std::vector<double>{0})[0] == std::log(1e-15));
    const auto s = spectrum_of(testutil::random_set(50, 10, 1));
    const auto l = log_spectrum(s);
    CHECK(std::is_sorted(l.rbegin(), l.rend()));
  }

  TEST_CASE("rotation invariance") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto s = testutil::random_set(200, 24, 40 + seed, false);
      const auto r = testutil::rotate(s, testutil::random_orthogonal(24, seed));
      const auto a = spectrum_summary(s);
      const auto b = spectrum_summary(r);
      for (std::size_t l = 0; l < 24; ++l) {
        CHECK(std::abs(a.eigenvalues[l] - b.eigenvalues[l]) <= 1e-6 * a.eigenvalues[0]);
      }
      CHECK(std::abs(a.r_ent - b.r_ent) <= 1e-6 * a.r_ent);
      CHECK(std::abs(a.r_norm - b.r_norm) <= 1e-6);
    }
  }

  TEST_CASE("scale behavior") {
    const auto s = testutil::random_set(120, 16, 77);
    const auto big = testutil::scale(s, 4.0f);  // power of two: exact in float
    const auto a = spectrum_summary(s);
    const auto b = spectrum_summary(big);
    for (std::size_t l = 0; l < 16; ++l) {
      CHECK(b.eigenvalues[l] == doctest::Approx(16.0 * a.eigenvalues[l]).epsilon(1e-12));
      CHECK(std::abs(a.weights_p[l] - b.weights_p[l]) <= 1e-9);
    }
    CHECK(std::abs(a.r_ent - b.r_ent) <= 1e-9);
    CHECK(std::abs(a.r_norm - b.r_norm) <= 1e-9);
    CHECK(std::abs(rankme_score(s) - rankme_score(big)) <= 1e-9);

    const auto odd = testutil::scale(s, 3.7f);
    CHECK(std::abs(spectrum_summary(odd).r_ent - a.r_ent) <= 1e-6);
  }

  TEST_CASE("trace conservation and bounds") {
    const auto s = testutil::random_set(90, 30, 12, false);
    const auto c = covariance(center_rows(s));
    double trace = 0.0;
    for (std::size_t a = 0; a < 30; ++a) trace += c.data[a * 30 + a];
    const auto e = sym_eigenvalues(c);
    double sum = 0.0;
    for (double v : e) sum += v;
    CHECK(std::abs(sum - trace) <= 1e-6 * trace);

    const auto summary = spectrum_summary(s);
    const auto positive = static_cast<double>(std::count_if(e.begin(), e.end(), [](double v) { return v > 0; }));
    CHECK(summary.r_ent >= 1.0);
    CHECK(summary.r_ent <= positive + 1e-9);
    CHECK(positive <= static_cast<double>(summary.q_cap));
    CHECK(summary.r_norm >= 0.0);
    CHECK(summary.r_norm <= 1.0);
  }

  TEST_CASE("Gram path matches the covariance path when n < d") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto s = testutil::random_set(20 + seed * 7, 96, seed + 1);
      const auto summary = spectrum_summary(s);
      CHECK(summary.gram_path);
      const auto direct = sym_eigenvalues(covariance(center_rows(s)));
      REQUIRE(summary.eigenvalues.size() == direct.size());
      const double direct_rent = effective_rank(direct);
      CHECK(std::abs(summary.r_ent - direct_rent) <= 1e-8);
      for (std::size_t l = 0; l < direct.size(); ++l) {
        CHECK(std::abs(summary.eigenvalues[l] - direct[l]) <= 1e-8 * direct[0]);
      }
      // At most n - 1 nonzero eigenvalues after centering.
      CHECK(summary.zero_eigenvalues >= 96 - (s.rows() - 1));
    }
  }

  TEST_CASE("spectrum summary fields") {
    const auto s = testutil::random_set(400, 16, 2);
    const auto summary = spectrum_summary(s, {true});
    CHECK_FALSE(summary.gram_path);
    CHECK(summary.q_cap == 16);
    CHECK(summary.eigenvalues.size() == 16);
    CHECK(std::is_sorted(summary.eigenvalues.rbegin(), summary.eigenvalues.rend()));
    CHECK(summary.cev.back() == 1.0);
    CHECK(summary.r_norm == doctest::Approx(std::log(summary.r_ent) / std::log(16.0)).epsilon(1e-15));
  }

  TEST_CASE("series csv export") {
    std::ostringstream out;
    write_series_csv(std::vector<double>{0.5, 0.25}, out);
    CHECK(out.str() == "index,value\n0,0.5\n1,0.25\n");
  }
}
