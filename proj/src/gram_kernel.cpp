#include "gram_kernel.hpp"

#include <algorithm>
#include <cmath>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

#include "iqscore/parallel.hpp"

namespace iqscore::detail {

PackedPanels::PackedPanels(const DenseRows& m) : rows_(m.rows), depth_(m.cols) {
  const std::size_t panels = (rows_ + kPanelWidth - 1) / kPanelWidth;
  data_.assign(panels * kPanelWidth * depth_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double* dst = data_.data() + (i / kPanelWidth) * kPanelWidth * depth_ + (i % kPanelWidth);
    const double* src = m.row(i);
    for (std::size_t t = 0; t < depth_; ++t) dst[t * kPanelWidth] = src[t];
  }
}

DenseRows to_dense(std::span<const float> values, std::size_t rows, std::size_t cols) {
  DenseRows out{rows, cols, std::vector<double>(values.begin(), values.end())};
  return out;
}

DenseRows transpose(const DenseRows& m) {
  DenseRows out{m.cols, m.rows, std::vector<double>(m.data.size())};
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t t = 0; t < m.cols; ++t) out.data[t * m.rows + i] = m.data[i * m.cols + t];
  }
  return out;
}

namespace {

// Full kMicroRows x kPanelWidth block over depth [k0, k1).
void micro_full(const double* const* arow, const double* panel, std::size_t k0, std::size_t k1,
                bool first, double* out, std::size_t ldo) {
#if defined(__AVX2__) && defined(__FMA__)
  static_assert(kPanelWidth == 8);
  __m256d c[kMicroRows][2];
#pragma GCC unroll 8
  for (std::size_t r = 0; r < kMicroRows; ++r) {
    c[r][0] = first ? _mm256_setzero_pd() : _mm256_loadu_pd(out + r * ldo);
    c[r][1] = first ? _mm256_setzero_pd() : _mm256_loadu_pd(out + r * ldo + 4);
  }
  for (std::size_t t = k0; t < k1; ++t) {
    const __m256d b0 = _mm256_loadu_pd(panel + t * kPanelWidth);
    const __m256d b1 = _mm256_loadu_pd(panel + t * kPanelWidth + 4);
#pragma GCC unroll 8
    for (std::size_t r = 0; r < kMicroRows; ++r) {
      const __m256d x = _mm256_broadcast_sd(arow[r] + t);
      c[r][0] = _mm256_fmadd_pd(x, b0, c[r][0]);
      c[r][1] = _mm256_fmadd_pd(x, b1, c[r][1]);
    }
  }
#pragma GCC unroll 8
  for (std::size_t r = 0; r < kMicroRows; ++r) {
    _mm256_storeu_pd(out + r * ldo, c[r][0]);
    _mm256_storeu_pd(out + r * ldo + 4, c[r][1]);
  }
#else
  for (std::size_t r = 0; r < kMicroRows; ++r) {
    for (std::size_t col = 0; col < kPanelWidth; ++col) {
      double acc = first ? 0.0 : out[r * ldo + col];
      for (std::size_t t = k0; t < k1; ++t) acc = std::fma(arow[r][t], panel[t * kPanelWidth + col], acc);
      out[r * ldo + col] = acc;
    }
  }
#endif
}

}  // namespace

void gram_tile(const DenseRows& a, std::size_t i0, std::size_t i1, const PackedPanels& b,
               std::size_t j0, std::size_t j1, double* out, std::size_t ldo) {
  const std::size_t depth = a.cols;
  const std::size_t rows = i1 - i0;
  double scratch[kMicroRows * kPanelWidth];
  for (std::size_t k0 = 0; k0 < depth; k0 += kDepthChunk) {
    const std::size_t k1 = std::min(depth, k0 + kDepthChunk);
    const bool first = k0 == 0;
    for (std::size_t p = j0 / kPanelWidth; p * kPanelWidth < j1; ++p) {
      const double* panel = b.panel(p);
      const std::size_t jb = p * kPanelWidth;
      const std::size_t jn = std::min(kPanelWidth, j1 - jb);
      for (std::size_t ib = 0; ib < rows; ib += kMicroRows) {
        const std::size_t in = std::min(kMicroRows, rows - ib);
        const double* arow[kMicroRows];
        for (std::size_t r = 0; r < kMicroRows; ++r) {
          arow[r] = a.row(i0 + ib + std::min(r, in - 1));
        }
        double* dst = out + ib * ldo + (jb - j0);
        if (in == kMicroRows && jn == kPanelWidth) {
          micro_full(arow, panel, k0, k1, first, dst, ldo);
          continue;
        }
        // Ragged edge: go through a full-size scratch block.
        for (std::size_t r = 0; r < kMicroRows; ++r) {
          for (std::size_t c = 0; c < kPanelWidth; ++c) {
            scratch[r * kPanelWidth + c] =
                (!first && r < in && c < jn) ? dst[r * ldo + c] : 0.0;
          }
        }
        micro_full(arow, panel, k0, k1, first, scratch, kPanelWidth);
        for (std::size_t r = 0; r < in; ++r) {
          for (std::size_t c = 0; c < jn; ++c) dst[r * ldo + c] = scratch[r * kPanelWidth + c];
        }
      }
    }
  }
}

std::vector<double> symmetric_gram(const DenseRows& m) {
  constexpr std::size_t kBlock = 128;
  const std::size_t n = m.rows;
  const PackedPanels packed(m);
  std::vector<double> out(n * n, 0.0);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;

  parallel_for(blocks, [&](std::size_t bi) {
    const std::size_t i0 = bi * kBlock;
    const std::size_t i1 = std::min(n, i0 + kBlock);
    // Upper triangle only: columns from i0 to the end.
    gram_tile(m, i0, i1, packed, i0, n, out.data() + i0 * n + i0, n);
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) out[i * n + j] = out[j * n + i];
  }
  return out;
}

}  // namespace iqscore::detail
