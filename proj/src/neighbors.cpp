#include "iqscore/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <string>

#include "gram_kernel.hpp"
#include "iqscore/parallel.hpp"

namespace iqscore {
namespace {

constexpr std::size_t kQueryBlock = 64;
constexpr std::size_t kCandidateBlock = 512;

struct Candidate {
  double sim;
  std::size_t idx;
};

// Higher similarity first, then lower index.
inline bool better(const Candidate& a, const Candidate& b) noexcept {
  return a.sim > b.sim || (a.sim == b.sim && a.idx < b.idx);
}

// Fixed-capacity list kept sorted best-first.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void offer(double sim, std::size_t idx) {
    const Candidate c{sim, idx};
    if (items_.size() == k_ && !better(c, items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), c, better);
    items_.insert(pos, c);
    if (items_.size() > k_) items_.pop_back();
  }

  void clear() { items_.clear(); }
  const std::vector<Candidate>& items() const { return items_; }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
};

std::size_t check_and_clamp(const EmbeddingSet& set, std::size_t k, bool& clamped) {
  if (set.rows() < 2) fail(ErrorCode::kEmptyPool, "k-NN needs at least 2 rows");
  if (!set.unit_normalized()) {
    fail(ErrorCode::kNotNormalized, "k-NN requires unit-normalized embeddings");
  }
  if (k == 0) fail(ErrorCode::kInvalidArgument, "k must be positive");
  clamped = k > set.rows() - 1;
  return clamped ? set.rows() - 1 : k;
}

void store_row(NeighborTable& table, std::size_t i, const TopK& top) {
  const auto& items = top.items();
  for (std::size_t r = 0; r < table.k; ++r) {
    table.indices[i * table.k + r] = items[r].idx;
    table.similarities[i * table.k + r] = items[r].sim;
  }
}

}  // namespace

NeighborTable exact_topk_cosine(const EmbeddingSet& set, std::size_t k) {
  NeighborTable table;
  table.n = set.rows();
  table.k = check_and_clamp(set, k, table.k_clamped);
  table.indices.resize(table.n * table.k);
  table.similarities.resize(table.n * table.k);

  const std::size_t n = table.n;
  const detail::DenseRows rows = detail::to_dense(set.data(), n, set.dim());
  const detail::PackedPanels packed(rows);
  const std::size_t query_blocks = (n + kQueryBlock - 1) / kQueryBlock;

  parallel_for(query_blocks, [&](std::size_t qb) {
    const std::size_t q0 = qb * kQueryBlock;
    const std::size_t q1 = std::min(n, q0 + kQueryBlock);
    std::vector<double> tile(kQueryBlock * kCandidateBlock);
    std::vector<TopK> tops(q1 - q0, TopK(table.k));

    // Candidate blocks in ascending index order.
    for (std::size_t c0 = 0; c0 < n; c0 += kCandidateBlock) {
      const std::size_t c1 = std::min(n, c0 + kCandidateBlock);
      detail::gram_tile(rows, q0, q1, packed, c0, c1, tile.data(), kCandidateBlock);
      for (std::size_t i = q0; i < q1; ++i) {
        const double* sims = tile.data() + (i - q0) * kCandidateBlock;
        TopK& top = tops[i - q0];
        for (std::size_t j = c0; j < c1; ++j) {
          if (j != i) top.offer(sims[j - c0], j);
        }
      }
    }
    for (std::size_t i = q0; i < q1; ++i) store_row(table, i, tops[i - q0]);
  });
  return table;
}

NeighborTable naive_topk_cosine(const EmbeddingSet& set, std::size_t k) {
  NeighborTable table;
  table.n = set.rows();
  table.k = check_and_clamp(set, k, table.k_clamped);
  table.indices.resize(table.n * table.k);
  table.similarities.resize(table.n * table.k);

  std::vector<Candidate> all;
  for (std::size_t i = 0; i < table.n; ++i) {
    all.clear();
    for (std::size_t j = 0; j < table.n; ++j) {
      if (j != i) all.push_back({dot(set.row(i), set.row(j)), j});
    }
    std::sort(all.begin(), all.end(), better);
    for (std::size_t r = 0; r < table.k; ++r) {
      table.indices[i * table.k + r] = all[r].idx;
      table.similarities[i * table.k + r] = all[r].sim;
    }
  }
  return table;
}

std::vector<double> per_sample_agreement(const NeighborTable& table,
                                         std::span<const Label> labels, AgreementMode mode) {
  if (labels.size() != table.n) {
    fail(ErrorCode::kLengthMismatch, "label count " + std::to_string(labels.size()) +
                                         " does not match neighbor table rows " +
                                         std::to_string(table.n));
  }
  std::map<Label, std::size_t> label_counts;
  if (mode == AgreementMode::kCeiling) {
    for (Label y : labels) ++label_counts[y];
  }

  std::vector<double> agreement(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    std::size_t same = 0;
    for (std::size_t j : table.neighbors(i)) same += labels[j] == labels[i] ? 1 : 0;

    std::size_t denom = table.k;
    if (mode == AgreementMode::kCeiling) {
      denom = std::min(table.k, label_counts[labels[i]] - 1);
    }
    agreement[i] = denom == 0 ? 1.0 : static_cast<double>(same) / static_cast<double>(denom);
  }
  return agreement;
}

double mean_consistency(std::span<const double> agreement) {
  if (agreement.empty()) fail(ErrorCode::kEmptyVector, "agreement vector is empty");
  // Neumaier summation.
  double sum = 0.0, comp = 0.0;
  for (double c : agreement) {
    const double t = sum + c;
    comp += std::abs(sum) >= std::abs(c) ? (sum - t) + c : (c - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(agreement.size());
}

Histogram agreement_histogram(std::span<const double> agreement, std::size_t bins) {
  if (bins == 0) fail(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  }
  h.counts.assign(bins, 0);
  for (double v : agreement) {
    // Bin b holds [edges[b], edges[b+1]); the last bin also takes 1.0.
    auto b = static_cast<std::size_t>(
        std::clamp(std::floor(v * static_cast<double>(bins)), 0.0, static_cast<double>(bins - 1)));
    while (b + 1 < bins && v >= h.edges[b + 1]) ++b;
    while (b > 0 && v < h.edges[b]) --b;
    ++h.counts[b];
  }
  return h;
}

ConsisSummary consistency_summary(const NeighborTable& table, std::span<const Label> labels,
                                  AgreementMode mode, std::size_t bins) {
  ConsisSummary s;
  s.agreement = per_sample_agreement(table, labels, mode);
  s.mean_consis = mean_consistency(s.agreement);
  s.k_used = table.k;
  s.ceiling_normalized = mode == AgreementMode::kCeiling;
  s.histogram = agreement_histogram(s.agreement, bins);
  return s;
}

void write_neighbor_csv(const NeighborTable& table, std::ostream& out) {
  out << "row,rank,neighbor,similarity\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < table.n; ++i) {
    for (std::size_t r = 0; r < table.k; ++r) {
      out << i << ',' << r << ',' << table.indices[i * table.k + r] << ','
          << table.similarities[i * table.k + r] << '\n';
    }
  }
}

}  // namespace iqscore
