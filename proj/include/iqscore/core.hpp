#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqscore/error.hpp"

namespace iqscore {

using Label = std::int64_t;

/// Dense n x d embedding matrix, row-major, 32-bit storage.
///
/// Immutable after construction. The constructor validates shape, finiteness
/// and, when `unit_normalized` is requested, that every row has norm within
/// 1e-4 of one.
class EmbeddingSet {
 public:
  static constexpr double kUnitNormTolerance = 1e-4;

  EmbeddingSet(std::size_t n, std::size_t d, std::vector<float> data,
               bool unit_normalized = false);

  std::size_t rows() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  bool unit_normalized() const noexcept { return unit_normalized_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * d_, d_};
  }

  // True when every row norm lies within kUnitNormTolerance of 1.
  bool rows_are_unit() const noexcept;

  // Rows selected by `indices`, in that order. Flag is inherited.
  EmbeddingSet select(std::span<const std::size_t> indices) const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<float> data_;
  bool unit_normalized_;
};

/// Embeddings plus one non-negative identity label per row.
class LabeledEmbeddingSet {
 public:
  LabeledEmbeddingSet(EmbeddingSet embeddings, std::vector<Label> labels,
                      std::vector<std::uint64_t> source_ids = {});

  const EmbeddingSet& embeddings() const noexcept { return embeddings_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::size_t rows() const noexcept { return embeddings_.rows(); }
  std::size_t dim() const noexcept { return embeddings_.dim(); }

  // Label -> rows carrying it, rows ascending. Exactly the inverse of labels().
  const std::map<Label, std::vector<std::size_t>>& identity_index() const noexcept {
    return identity_index_;
  }
  std::size_t identity_count() const noexcept { return identity_index_.size(); }

  // Row provenance (index in the originating file). Defaults to 0..n-1.
  std::span<const std::uint64_t> source_ids() const noexcept { return source_ids_; }

  // Original string label per dense id, when ingested from a CSV with string
  // labels. Empty otherwise.
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  void set_label_names(std::vector<std::string> names) { label_names_ = std::move(names); }

  LabeledEmbeddingSet select(std::span<const std::size_t> indices) const;
  LabeledEmbeddingSet with_labels(std::vector<Label> labels) const;
  LabeledEmbeddingSet with_embeddings(EmbeddingSet embeddings) const;

 private:
  EmbeddingSet embeddings_;
  std::vector<Label> labels_;
  std::vector<std::uint64_t> source_ids_;
  std::map<Label, std::vector<std::size_t>> identity_index_;
  std::vector<std::string> label_names_;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 values, edges[0] = 0, edges[bins] = 1
  std::vector<std::size_t> counts;
};

struct SpectrumSummary {
  std::vector<double> eigenvalues;  // descending, clipped at 1e-12 * max
  std::vector<double> weights_p;
  double r_ent = 0.0;
  double r_norm = 0.0;
  bool r_norm_clamped = false;
  std::size_t q_cap = 0;
  std::vector<double> cev;
  std::size_t zero_eigenvalues = 0;
  bool gram_path = false;
};

struct ConsisSummary {
  std::vector<double> agreement;
  double mean_consis = 0.0;
  std::size_t k_used = 0;
  bool ceiling_normalized = false;
  Histogram histogram;
};

struct StageTimings {
  double sample_ms = 0.0;
  double knn_ms = 0.0;
  double consis_ms = 0.0;
  double spectrum_ms = 0.0;
  double rankme_ms = 0.0;
  double total_ms = 0.0;
};

struct IqReportConfig {
  std::size_t k = 10;
  double alpha = 0.2;
  double beta = 0.8;
  bool sampled = true;
  std::size_t target_identities = 1000;
  std::size_t per_identity = 10;
  std::uint64_t sampling_seed = 0;
  std::optional<double> dedup_threshold = 0.9999;
  std::size_t min_identity_size = 2;
  bool ceiling_normalized = false;
  std::size_t histogram_bins = 20;
  double rankme_epsilon = 1e-7;
  bool rankme_centered = false;
};

struct IqReport {
  IqReportConfig config;
  std::size_t rows_in = 0;
  std::size_t rows_analyzed = 0;
  std::size_t dim = 0;
  std::size_t identities_analyzed = 0;
  ConsisSummary consis;
  SpectrumSummary spectrum;
  double rankme_score = 0.0;
  double iq = 0.0;
  std::pair<double, double> plane_point;  // (r_norm, mean_consis)
  std::string input_fingerprint;           // sha256 hex of the analyzed subset
  StageTimings timings;
};

/// Unit-normalizes every row (64-bit norm, 32-bit result). Throws
/// ErrorCode::kZeroNormRow when a row norm is <= 1e-12.
EmbeddingSet l2_normalize_rows(const EmbeddingSet& set);

// Double-precision dot product accumulated in index order.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace iqscore
