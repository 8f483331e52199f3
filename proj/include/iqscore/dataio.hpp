#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqscore/core.hpp"

namespace iqscore {

enum class FileFormat { kBinary, kCsv };

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint32_t kLabelFormatVersion = 1;

// Binary mode reads `path` (IQEM) and `label_path` (IQLB). CSV mode reads a
// single file whose last column is the label; `label_path` is ignored.
LabeledEmbeddingSet read_embedding_file(const std::filesystem::path& path,
                                        const std::filesystem::path& label_path,
                                        FileFormat format);

void write_embedding_file(const LabeledEmbeddingSet& set,
                          const std::filesystem::path& path,
                          const std::filesystem::path& label_path, FileFormat format);

// Canonical binary encodings, shared by the writer and the content hash.
std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set);
std::vector<std::uint8_t> encode_labels(std::span<const Label> labels);

// SHA-256 (hex) of encode_embeddings() followed by encode_labels().
std::string content_hash(const LabeledEmbeddingSet& set);

struct DedupDrop {
  std::size_t dropped;  // row index in the input set
  std::size_t kept;     // already-kept row of the same identity that matched
  double similarity;
};

struct DedupResult {
  LabeledEmbeddingSet set;
  std::vector<DedupDrop> drops;
};

DedupResult dedup_within_identity(const LabeledEmbeddingSet& set, double threshold);

struct SamplingConfig {
  std::size_t target_identities = 1000;
  std::size_t per_identity = 10;
  std::uint64_t seed = 0;
  double dedup_threshold = 0.9999;
  bool dedup = true;
  std::size_t min_identity_size = 2;

  void validate() const;
};

struct ManifestEntry {
  Label identity;
  std::size_t pool_size;                 // rows carrying the identity
  std::vector<std::size_t> chosen_rows;  // ascending, indices into the input set
  std::vector<DedupDrop> dedup_drops;
};

struct SampleManifest {
  SamplingConfig config;
  std::string source_hash;
  std::size_t eligible_identities = 0;
  std::vector<Label> excluded_identities;  // below min_identity_size
  std::vector<ManifestEntry> entries;      // selection order
};

struct SampleResult {
  LabeledEmbeddingSet set;
  SampleManifest manifest;
};

SampleResult stratified_sample(const LabeledEmbeddingSet& set, const SamplingConfig& cfg);

struct NoiseConfig {
  double flip_ratio = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabelFlip {
  std::size_t row;
  Label old_label;
  Label new_label;
};

struct NoiseResult {
  LabeledEmbeddingSet set;
  std::vector<LabelFlip> flips;
};

NoiseResult inject_uniform_flip_noise(const LabeledEmbeddingSet& set, const NoiseConfig& cfg);

nlohmann::json manifest_to_json(const SampleManifest& manifest);
nlohmann::json flip_log_to_json(const NoiseConfig& cfg, const std::string& source_hash,
                                std::size_t rows, const std::vector<LabelFlip>& flips);

}  // namespace iqscore
