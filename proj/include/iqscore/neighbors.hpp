#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "iqscore/core.hpp"

namespace iqscore {

/// Exact k-NN result. Row i lists its k most cosine-similar rows (self
/// excluded), by descending similarity with ties broken by ascending index.
struct NeighborTable {
  std::size_t n = 0;
  std::size_t k = 0;  // after clamping to n - 1
  bool k_clamped = false;
  std::vector<std::size_t> indices;  // n * k
  std::vector<double> similarities;  // n * k

  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
  std::span<const double> sims(std::size_t i) const {
    return {similarities.data() + i * k, k};
  }
};

// Blocked, parallel retrieval. Output is bit-identical for any worker count.
NeighborTable exact_topk_cosine(const EmbeddingSet& set, std::size_t k);

// Straightforward double loop with the same accumulation order. Oracle only.
NeighborTable naive_topk_cosine(const EmbeddingSet& set, std::size_t k);

enum class AgreementMode { kRaw, kCeiling };

std::vector<double> per_sample_agreement(const NeighborTable& table,
                                         std::span<const Label> labels,
                                         AgreementMode mode = AgreementMode::kRaw);

double mean_consistency(std::span<const double> agreement);

Histogram agreement_histogram(std::span<const double> agreement, std::size_t bins);

ConsisSummary consistency_summary(const NeighborTable& table, std::span<const Label> labels,
                                  AgreementMode mode, std::size_t bins);

// row,rank,neighbor,similarity
void write_neighbor_csv(const NeighborTable& table, std::ostream& out);

}  // namespace iqscore
