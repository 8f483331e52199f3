#include "iqscore/dataio.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "iqscore/rng.hpp"

namespace iqscore {
namespace {

constexpr char kEmbeddingMagic[4] = {'I', 'Q', 'E', 'M'};
constexpr char kLabelMagic[4] = {'I', 'Q', 'L', 'B'};
constexpr std::size_t kEmbeddingHeaderSize = 24;
constexpr std::size_t kLabelHeaderSize = 16;
constexpr std::uint8_t kDtypeFloat32 = 0;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>(bits & 0xFFu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::make_unsigned_t<T>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<U>(static_cast<U>(p[b]) << (8 * b));
  return static_cast<T>(bits);
}

[[noreturn]] void format_error(const std::filesystem::path& path, std::size_t offset,
                               const std::string& reason) {
  fail(ErrorCode::kFormat, path.string() + ": byte " + std::to_string(offset) + ": " + reason);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIo, "read failed for " + path.string());
  return bytes;
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

EmbeddingSet decode_embeddings(const std::filesystem::path& path,
                               const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kEmbeddingHeaderSize) format_error(path, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) format_error(path, 0, "bad magic, expected IQEM");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kEmbeddingFormatVersion) {
    format_error(path, 4, "unsupported version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes.data() + 8);
  const auto d = get_le<std::uint32_t>(bytes.data() + 16);
  if (bytes[20] != kDtypeFloat32) format_error(path, 20, "unsupported dtype code");
  if (bytes[21] != 0 || bytes[22] != 0 || bytes[23] != 0) format_error(path, 21, "nonzero padding");
  if (n == 0 || d == 0) format_error(path, 8, "n and d must be positive");
  if (n > (bytes.size() - kEmbeddingHeaderSize) / 4 / d) {
    format_error(path, bytes.size(), "payload shorter than n*d floats");
  }
  const std::size_t count = static_cast<std::size_t>(n) * d;
  if (bytes.size() != kEmbeddingHeaderSize + 4 * count) {
    format_error(path, kEmbeddingHeaderSize + 4 * count, "trailing bytes after payload");
  }

  std::vector<float> data(count);
  const std::uint8_t* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::size_t idx = 0; idx < count; ++idx) {
    data[idx] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * idx));
    if (!std::isfinite(data[idx])) {
      fail(ErrorCode::kNonFiniteValue, path.string() + ": non-finite value at row " +
                                           std::to_string(idx / d) + ", col " +
                                           std::to_string(idx % d));
    }
  }
  EmbeddingSet set(static_cast<std::size_t>(n), d, std::move(data));
  const bool unit = set.rows_are_unit();
  return unit ? EmbeddingSet(set.rows(), set.dim(), {set.data().begin(), set.data().end()}, true)
              : set;
}

std::vector<Label> decode_labels(const std::filesystem::path& path,
                                 const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kLabelHeaderSize) format_error(path, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kLabelMagic, 4) != 0) format_error(path, 0, "bad magic, expected IQLB");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kLabelFormatVersion) {
    format_error(path, 4, "unsupported version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes.data() + 8);
  if (n > (bytes.size() - kLabelHeaderSize) / 8) format_error(path, bytes.size(), "payload shorter than n labels");
  if (bytes.size() != kLabelHeaderSize + 8 * n) {
    format_error(path, kLabelHeaderSize + 8 * n, "trailing bytes after payload");
  }
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = get_le<std::int64_t>(bytes.data() + kLabelHeaderSize + 8 * i);
    if (labels[i] < 0) format_error(path, kLabelHeaderSize + 8 * i, "negative label");
  }
  return labels;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  out = std::strtod(cell.c_str(), &end);
  return end == cell.c_str() + cell.size();
}

bool parse_label_int(const std::string& cell, Label& out) {
  if (cell.empty()) return false;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && out >= 0;
}

LabeledEmbeddingSet read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());

  std::vector<float> data;
  std::vector<std::string> label_tokens;
  std::size_t d = 0;
  std::size_t line_no = 0;
  bool first_row = true;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (first_row) {
      first_row = false;
      double probe = 0.0;
      if (!parse_double(cells[0], probe)) continue;  // header row
    }
    if (cells.size() < 2) {
      fail(ErrorCode::kFormat, path.string() + ": line " + std::to_string(line_no) +
                                   ": need at least one value column and a label column");
    }
    if (d == 0) d = cells.size() - 1;
    if (cells.size() - 1 != d) {
      fail(ErrorCode::kFormat, path.string() + ": line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(d + 1) + " columns, got " +
                                   std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        fail(ErrorCode::kFormat, path.string() + ": line " + std::to_string(line_no) + ": '" +
                                     cells[c] + "' is not a number");
      }
      if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v))) {
        fail(ErrorCode::kNonFiniteValue, path.string() + ": non-finite value at row " +
                                             std::to_string(label_tokens.size()) + ", col " +
                                             std::to_string(c));
      }
      data.push_back(static_cast<float>(v));
    }
    label_tokens.push_back(cells[d]);
  }
  if (label_tokens.empty()) fail(ErrorCode::kFormat, path.string() + ": no data rows");

  std::vector<Label> labels(label_tokens.size());
  bool all_integer = true;
  for (std::size_t i = 0; i < labels.size() && all_integer; ++i) {
    all_integer = parse_label_int(label_tokens[i], labels[i]);
  }
  std::vector<std::string> names;
  if (!all_integer) {
    std::unordered_map<std::string, Label> ids;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, inserted] = ids.try_emplace(label_tokens[i], static_cast<Label>(names.size()));
      if (inserted) names.push_back(label_tokens[i]);
      labels[i] = it->second;
    }
  }

  EmbeddingSet raw(labels.size(), d, std::move(data));
  const bool unit = raw.rows_are_unit();
  LabeledEmbeddingSet set(unit ? EmbeddingSet(raw.rows(), d, {raw.data().begin(), raw.data().end()}, true)
                               : std::move(raw),
                          std::move(labels));
  set.set_label_names(std::move(names));
  return set;
}

void write_csv(const LabeledEmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  char buf[32];
  for (std::size_t i = 0; i < set.rows(); ++i) {
    for (float v : set.embeddings().row(i)) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
      out << buf << ',';
    }
    out << set.labels()[i] << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "dedup threshold must lie in (0, 1]");
  }
}

// Greedy scan of `rows` in the given order; returns rows kept, appends drops.
std::vector<std::size_t> greedy_dedup(const EmbeddingSet& emb, std::span<const std::size_t> rows,
                                      double threshold, std::vector<DedupDrop>& drops) {
  std::vector<std::size_t> kept;
  for (std::size_t r : rows) {
    bool duplicate = false;
    for (std::size_t k : kept) {
      const double sim = dot(emb.row(r), emb.row(k));
      if (sim >= threshold) {
        drops.push_back({r, k, sim});
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(r);
  }
  return kept;
}

nlohmann::json drops_json(const std::vector<DedupDrop>& drops) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : drops) {
    out.push_back({{"dropped", d.dropped}, {"kept", d.kept}, {"similarity", d.similarity}});
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set) {
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderSize + 4 * set.data().size());
  out.insert(out.end(), kEmbeddingMagic, kEmbeddingMagic + 4);
  put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
  put_le<std::uint64_t>(out, set.rows());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  out.push_back(kDtypeFloat32);
  out.insert(out.end(), 3, 0);
  for (float v : set.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::vector<std::uint8_t> encode_labels(std::span<const Label> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(kLabelHeaderSize + 8 * labels.size());
  out.insert(out.end(), kLabelMagic, kLabelMagic + 4);
  put_le<std::uint32_t>(out, kLabelFormatVersion);
  put_le<std::uint64_t>(out, labels.size());
  for (Label y : labels) put_le<std::int64_t>(out, y);
  return out;
}

std::string content_hash(const LabeledEmbeddingSet& set) {
  const auto emb = encode_embeddings(set.embeddings());
  const auto lab = encode_labels(set.labels());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, emb.data(), emb.size()) == 1 &&
                  EVP_DigestUpdate(ctx, lab.data(), lab.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) fail(ErrorCode::kIo, "sha256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

LabeledEmbeddingSet read_embedding_file(const std::filesystem::path& path,
                                        const std::filesystem::path& label_path,
                                        FileFormat format) {
  if (format == FileFormat::kCsv) return read_csv(path);
  EmbeddingSet emb = decode_embeddings(path, slurp(path));
  if (label_path.empty()) fail(ErrorCode::kIo, "binary input needs a label file");
  std::vector<Label> labels = decode_labels(label_path, slurp(label_path));
  if (labels.size() != emb.rows()) {
    fail(ErrorCode::kLabelCountMismatch, label_path.string() + ": " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(emb.rows()) + " rows");
  }
  return LabeledEmbeddingSet(std::move(emb), std::move(labels));
}

void write_embedding_file(const LabeledEmbeddingSet& set, const std::filesystem::path& path,
                          const std::filesystem::path& label_path, FileFormat format) {
  if (format == FileFormat::kCsv) {
    write_csv(set, path);
    return;
  }
  if (label_path.empty()) fail(ErrorCode::kIo, "binary output needs a label path");
  dump(path, encode_embeddings(set.embeddings()));
  dump(label_path, encode_labels(set.labels()));
}

DedupResult dedup_within_identity(const LabeledEmbeddingSet& set, double threshold) {
  check_threshold(threshold);
  if (!set.embeddings().unit_normalized()) {
    fail(ErrorCode::kNotNormalized, "dedup requires unit-normalized embeddings");
  }
  std::vector<DedupDrop> drops;
  std::vector<bool> keep(set.rows(), false);
  for (const auto& [label, rows] : set.identity_index()) {
    for (std::size_t r : greedy_dedup(set.embeddings(), rows, threshold, drops)) keep[r] = true;
  }
  std::vector<std::size_t> kept_rows;
  for (std::size_t i = 0; i < set.rows(); ++i) {
    if (keep[i]) kept_rows.push_back(i);
  }
  std::sort(drops.begin(), drops.end(),
            [](const DedupDrop& a, const DedupDrop& b) { return a.dropped < b.dropped; });
  return {set.select(kept_rows), std::move(drops)};
}

void SamplingConfig::validate() const {
  if (target_identities == 0) fail(ErrorCode::kInvalidArgument, "target identities M must be >= 1");
  if (per_identity == 0) fail(ErrorCode::kInvalidArgument, "per-identity count m must be >= 1");
  if (min_identity_size == 0) fail(ErrorCode::kInvalidArgument, "min identity size must be >= 1");
  check_threshold(dedup_threshold);
}

SampleResult stratified_sample(const LabeledEmbeddingSet& set, const SamplingConfig& cfg) {
  cfg.validate();
  if (cfg.dedup && !set.embeddings().unit_normalized()) {
    fail(ErrorCode::kNotNormalized, "sampling with dedup requires unit-normalized embeddings");
  }

  SampleManifest manifest;
  manifest.config = cfg;
  manifest.source_hash = content_hash(set);

  std::vector<Label> eligible;
  for (const auto& [label, rows] : set.identity_index()) {
    if (rows.size() >= cfg.min_identity_size) {
      eligible.push_back(label);
    } else {
      manifest.excluded_identities.push_back(label);
    }
  }
  manifest.eligible_identities = eligible.size();
  if (eligible.empty()) {
    fail(ErrorCode::kNoEligibleIdentity, "no identity has at least " +
                                             std::to_string(cfg.min_identity_size) + " rows");
  }

  Rng rng(cfg.seed);
  rng.shuffle(std::span<Label>(eligible));
  const std::size_t take = std::min(cfg.target_identities, eligible.size());

  std::vector<std::size_t> output_rows;
  for (std::size_t s = 0; s < take; ++s) {
    const Label identity = eligible[s];
    const auto& rows = set.identity_index().at(identity);
    ManifestEntry entry{identity, rows.size(), {}, {}};

    std::vector<std::size_t> pool =
        cfg.dedup ? greedy_dedup(set.embeddings(), rows, cfg.dedup_threshold, entry.dedup_drops)
                  : rows;
    const std::size_t draw = std::min(cfg.per_identity, pool.size());
    for (std::size_t i = 0; i < draw; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    entry.chosen_rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(draw));
    std::sort(entry.chosen_rows.begin(), entry.chosen_rows.end());
    output_rows.insert(output_rows.end(), entry.chosen_rows.begin(), entry.chosen_rows.end());
    manifest.entries.push_back(std::move(entry));
  }
  return {set.select(output_rows), std::move(manifest)};
}

void NoiseConfig::validate() const {
  if (!(flip_ratio >= 0.0 && flip_ratio <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "flip ratio must lie in [0, 1]");
  }
}

NoiseResult inject_uniform_flip_noise(const LabeledEmbeddingSet& set, const NoiseConfig& cfg) {
  cfg.validate();
  std::vector<Label> distinct;
  for (const auto& entry : set.identity_index()) distinct.push_back(entry.first);
  if (cfg.flip_ratio > 0.0 && distinct.size() < 2) {
    fail(ErrorCode::kSingleIdentity, "closed-set flips need at least 2 identities");
  }

  Rng rng(cfg.seed);
  std::vector<Label> labels(set.labels().begin(), set.labels().end());
  std::vector<LabelFlip> flips;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(rng.uniform() < cfg.flip_ratio)) continue;
    const Label old_label = labels[i];
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), old_label) - distinct.begin());
    auto j = static_cast<std::size_t>(rng.below(distinct.size() - 1));
    if (j >= pos) ++j;  // skip the original label
    labels[i] = distinct[j];
    flips.push_back({i, old_label, labels[i]});
  }
  return {set.with_labels(std::move(labels)), std::move(flips)};
}

nlohmann::json manifest_to_json(const SampleManifest& manifest) {
  nlohmann::json identities = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    identities.push_back({{"identity", e.identity},
                          {"pool_size", e.pool_size},
                          {"rows", e.chosen_rows},
                          {"dedup_dropped", drops_json(e.dedup_drops)}});
  }
  const auto& c = manifest.config;
  return {{"schema", "iqscore.manifest"},
          {"version", 1},
          {"seed", c.seed},
          {"config",
           {{"target_identities", c.target_identities},
            {"per_identity", c.per_identity},
            {"dedup", c.dedup},
            {"dedup_threshold", c.dedup_threshold},
            {"min_identity_size", c.min_identity_size}}},
          {"source_hash", manifest.source_hash},
          {"eligible_identities", manifest.eligible_identities},
          {"excluded_identities", manifest.excluded_identities},
          {"identities", identities}};
}

nlohmann::json flip_log_to_json(const NoiseConfig& cfg, const std::string& source_hash,
                                std::size_t rows, const std::vector<LabelFlip>& flips) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& f : flips) {
    entries.push_back({{"row", f.row}, {"old_label", f.old_label}, {"new_label", f.new_label}});
  }
  return {{"schema", "iqscore.fliplog"},
          {"version", 1},
          {"seed", cfg.seed},
          {"config", {{"flip_ratio", cfg.flip_ratio}}},
          {"source_hash", source_hash},
          {"rows", rows},
          {"flipped", flips.size()},
          {"flips", entries}};
}

}  // namespace iqscore
