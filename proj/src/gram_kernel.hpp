#pragma once

// Blocked dot-product kernel shared by k-NN retrieval and covariance
// accumulation. Every output entry is accumulated with fused multiply-add
// strictly in depth order in double precision, so results do not depend on
// tile sizes or worker count. For float-valued inputs the products are exact,
// which makes the result equal to a plain sequential double loop.

#include <cstddef>
#include <span>
#include <vector>

namespace iqscore::detail {

inline constexpr std::size_t kPanelWidth = 8;  // NR
inline constexpr std::size_t kMicroRows = 6;   // MR
inline constexpr std::size_t kDepthChunk = 256;

struct DenseRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  const double* row(std::size_t i) const noexcept { return data.data() + i * cols; }
};

// Rows regrouped in panels of kPanelWidth, each panel stored depth-major
// (element [t * kPanelWidth + c]). Missing rows of the last panel are zero.
class PackedPanels {
 public:
  explicit PackedPanels(const DenseRows& m);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t depth() const noexcept { return depth_; }
  const double* panel(std::size_t p) const noexcept {
    return data_.data() + p * kPanelWidth * depth_;
  }

 private:
  std::size_t rows_;
  std::size_t depth_;
  std::vector<double> data_;
};

DenseRows to_dense(std::span<const float> values, std::size_t rows, std::size_t cols);
DenseRows transpose(const DenseRows& m);

// out[(i - i0) * ldo + (j - j0)] = sum_t a(i, t) * b(j, t) for i in [i0, i1),
// j in [j0, j1). j0 must be a multiple of kPanelWidth.
void gram_tile(const DenseRows& a, std::size_t i0, std::size_t i1, const PackedPanels& b,
               std::size_t j0, std::size_t j1, double* out, std::size_t ldo);

// Full symmetric m * m^T, computed tile-parallel over the upper triangle.
std::vector<double> symmetric_gram(const DenseRows& m);

}  // namespace iqscore::detail
