#pragma once

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "iqscore/core.hpp"
#include "iqscore/error.hpp"

namespace testutil {

// Evaluates expr and checks that it throws iqscore::Error carrying the code.
#define CHECK_ERROR_CODE(expr, expected_code)                      \
  do {                                                             \
    bool thrown_ = false;                                          \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const iqscore::Error& e_) {                           \
      thrown_ = true;                                              \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());      \
    }                                                              \
    CHECK_MESSAGE(thrown_, "expected an iqscore::Error");          \
  } while (0)

inline iqscore::EmbeddingSet make_set(std::size_t n, std::size_t d, std::vector<float> v,
                                      bool unit = false) {
  return iqscore::EmbeddingSet(n, d, std::move(v), unit);
}

// Gaussian rows, optionally normalized. Uses std::mt19937_64 directly so the
// fixtures do not depend on the library RNG.
inline iqscore::EmbeddingSet random_set(std::size_t n, std::size_t d, std::uint64_t seed,
                                        bool normalize = true) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  std::vector<float> v(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    std::vector<double> row(d);
    for (auto& x : row) {
      x = g(gen);
      norm2 += x * x;
    }
    const double inv = normalize ? 1.0 / std::sqrt(norm2) : 1.0;
    for (std::size_t t = 0; t < d; ++t) v[i * d + t] = static_cast<float>(row[t] * inv);
  }
  iqscore::EmbeddingSet raw(n, d, std::move(v));
  return normalize ? iqscore::l2_normalize_rows(raw) : raw;
}

inline std::vector<iqscore::Label> cyclic_labels(std::size_t n, std::size_t identities) {
  std::vector<iqscore::Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<iqscore::Label>(i % identities);
  return labels;
}

// Random orthogonal d x d (row-major) by Gram-Schmidt on Gaussian columns.
inline std::vector<double> random_orthogonal(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> q;
  while (q.size() < d) {
    std::vector<double> v(d);
    for (auto& x : v) x = g(gen);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : q) {
        double proj = 0.0;
        for (std::size_t t = 0; t < d; ++t) proj += u[t] * v[t];
        for (std::size_t t = 0; t < d; ++t) v[t] -= proj * u[t];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    q.push_back(std::move(v));
  }
  std::vector<double> out(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = q[j][i];
  }
  return out;
}

// Rows of set multiplied by R (row-major d x d), stored as float.
inline iqscore::EmbeddingSet rotate(const iqscore::EmbeddingSet& set, const std::vector<double>& r) {
  const std::size_t n = set.rows(), d = set.dim();
  std::vector<float> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = set.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) acc += static_cast<double>(row[t]) * r[t * d + j];
      out[i * d + j] = static_cast<float>(acc);
    }
  }
  return iqscore::EmbeddingSet(n, d, std::move(out));
}

inline iqscore::EmbeddingSet scale(const iqscore::EmbeddingSet& set, float s) {
  std::vector<float> out(set.data().begin(), set.data().end());
  for (auto& x : out) x *= s;
  return iqscore::EmbeddingSet(set.rows(), set.dim(), std::move(out));
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("iqscore_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  std::vector<unsigned char> out;
  if (f == nullptr) return out;
  unsigned char buf[65536];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) out.insert(out.end(), buf, buf + got);
  std::fclose(f);
  return out;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::FILE* f = std::fopen(p.c_str(), "wb");
  REQUIRE(f != nullptr);
  std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
}

}  // namespace testutil
