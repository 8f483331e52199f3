#include "iqscore/core.hpp"

#include <cmath>
#include <string>

namespace iqscore {

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    acc += static_cast<double>(a[t]) * static_cast<double>(b[t]);
  }
  return acc;
}

EmbeddingSet::EmbeddingSet(std::size_t n, std::size_t d, std::vector<float> data,
                           bool unit_normalized)
    : n_(n), d_(d), data_(std::move(data)), unit_normalized_(unit_normalized) {
  if (n_ == 0 || d_ == 0) {
    fail(ErrorCode::kInvalidArgument, "embedding set needs n >= 1 and d >= 1");
  }
  if (data_.size() != n_ * d_) {
    fail(ErrorCode::kLengthMismatch, "embedding data has " + std::to_string(data_.size()) +
                                         " values, expected n*d = " + std::to_string(n_ * d_));
  }
  for (std::size_t idx = 0; idx < data_.size(); ++idx) {
    if (!std::isfinite(data_[idx])) {
      fail(ErrorCode::kNonFiniteValue, "non-finite value at row " + std::to_string(idx / d_) +
                                           ", col " + std::to_string(idx % d_));
    }
  }
  if (unit_normalized_ && !rows_are_unit()) {
    fail(ErrorCode::kNotNormalized, "rows flagged unit-normalized but a norm deviates by > 1e-4");
  }
}

bool EmbeddingSet::rows_are_unit() const noexcept {
  for (std::size_t i = 0; i < n_; ++i) {
    const auto r = row(i);
    const double norm = std::sqrt(dot(r, r));
    if (std::abs(norm - 1.0) > kUnitNormTolerance) return false;
  }
  return true;
}

EmbeddingSet EmbeddingSet::select(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * d_);
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return EmbeddingSet(indices.size(), d_, std::move(out), unit_normalized_);
}

LabeledEmbeddingSet::LabeledEmbeddingSet(EmbeddingSet embeddings, std::vector<Label> labels,
                                         std::vector<std::uint64_t> source_ids)
    : embeddings_(std::move(embeddings)),
      labels_(std::move(labels)),
      source_ids_(std::move(source_ids)) {
  const std::size_t n = embeddings_.rows();
  if (labels_.size() != n) {
    fail(ErrorCode::kLabelCountMismatch, "got " + std::to_string(labels_.size()) +
                                             " labels for " + std::to_string(n) + " rows");
  }
  if (source_ids_.empty()) {
    source_ids_.resize(n);
    for (std::size_t i = 0; i < n; ++i) source_ids_[i] = i;
  } else if (source_ids_.size() != n) {
    fail(ErrorCode::kLengthMismatch, "source id count does not match row count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels_[i] < 0) {
      fail(ErrorCode::kInvalidArgument, "negative label at row " + std::to_string(i));
    }
    identity_index_[labels_[i]].push_back(i);
  }
}

LabeledEmbeddingSet LabeledEmbeddingSet::select(std::span<const std::size_t> indices) const {
  std::vector<Label> labels;
  std::vector<std::uint64_t> sources;
  labels.reserve(indices.size());
  sources.reserve(indices.size());
  for (std::size_t i : indices) {
    labels.push_back(labels_[i]);
    sources.push_back(source_ids_[i]);
  }
  LabeledEmbeddingSet out(embeddings_.select(indices), std::move(labels), std::move(sources));
  out.label_names_ = label_names_;
  return out;
}

LabeledEmbeddingSet LabeledEmbeddingSet::with_labels(std::vector<Label> labels) const {
  LabeledEmbeddingSet out(embeddings_, std::move(labels), source_ids_);
  out.label_names_ = label_names_;
  return out;
}

LabeledEmbeddingSet LabeledEmbeddingSet::with_embeddings(EmbeddingSet embeddings) const {
  LabeledEmbeddingSet out(std::move(embeddings), labels_, source_ids_);
  out.label_names_ = label_names_;
  return out;
}

EmbeddingSet l2_normalize_rows(const EmbeddingSet& set) {
  const std::size_t n = set.rows();
  const std::size_t d = set.dim();
  std::vector<float> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = set.row(i);
    const double norm = std::sqrt(dot(r, r));
    if (norm <= 1e-12) {
      fail(ErrorCode::kZeroNormRow, "row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t t = 0; t < d; ++t) {
      out[i * d + t] = static_cast<float>(static_cast<double>(r[t]) / norm);
    }
  }
  return EmbeddingSet(n, d, std::move(out), true);
}

}  // namespace iqscore
