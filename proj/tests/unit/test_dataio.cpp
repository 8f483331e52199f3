#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "iqscore/dataio.hpp"

using namespace iqscore;

namespace {

std::vector<unsigned char> header_bytes(std::uint64_t n, std::uint32_t d) {
  std::vector<unsigned char> b = {'I', 'Q', 'E', 'M', 1, 0, 0, 0};
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(n >> (8 * i)));
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(d >> (8 * i)));
  b.insert(b.end(), {0, 0, 0, 0});
  return b;
}

void append_float(std::vector<unsigned char>& b, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

std::vector<unsigned char> label_bytes(const std::vector<std::int64_t>& labels) {
  std::vector<unsigned char> b = {'I', 'Q', 'L', 'B', 1, 0, 0, 0};
  const std::uint64_t n = labels.size();
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(n >> (8 * i)));
  for (auto y : labels) {
    const auto u = static_cast<std::uint64_t>(y);
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(u >> (8 * i)));
  }
  return b;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

LabeledEmbeddingSet labeled(std::vector<float> v, std::size_t d, std::vector<Label> labels) {
  const std::size_t n = labels.size();
  return LabeledEmbeddingSet(l2_normalize_rows(EmbeddingSet(n, d, std::move(v))), std::move(labels));
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("binary decode of a hand-built file") {
    testutil::TempDir dir;
    auto emb = header_bytes(2, 3);
    for (float f : {1.f, 2.f, 3.f, 4.f, 5.f, 6.f}) append_float(emb, f);
    testutil::write_bytes(dir / "a.iqem", emb);
    testutil::write_bytes(dir / "a.iqlb", label_bytes({5, 9}));
    const auto s = read_embedding_file(dir / "a.iqem", dir / "a.iqlb", FileFormat::kBinary);
    CHECK(s.rows() == 2);
    CHECK(s.dim() == 3);
    CHECK(s.embeddings().row(1)[2] == 6.0f);
    CHECK(s.labels()[0] == 5);
    CHECK(s.labels()[1] == 9);
    CHECK_FALSE(s.embeddings().unit_normalized());
    // The encoder produces exactly these bytes.
    CHECK(encode_embeddings(s.embeddings()) == std::vector<std::uint8_t>(emb.begin(), emb.end()));
  }

  TEST_CASE("binary format violations") {
    testutil::TempDir dir;
    testutil::write_bytes(dir / "l.iqlb", label_bytes({0, 1}));
    auto good = header_bytes(2, 2);
    for (float f : {1.f, 0.f, 0.f, 1.f}) append_float(good, f);

    auto expect_format = [&](std::vector<unsigned char> bytes) {
      testutil::write_bytes(dir / "e.iqem", bytes);
      CHECK_ERROR_CODE(read_embedding_file(dir / "e.iqem", dir / "l.iqlb", FileFormat::kBinary),
                       ErrorCode::kFormat);
    };
    SUBCASE("truncated payload") { expect_format({good.begin(), good.end() - 4}); }
    SUBCASE("truncated header") { expect_format({good.begin(), good.begin() + 10}); }
    SUBCASE("trailing bytes") {
      auto b = good;
      b.push_back(0);
      expect_format(b);
    }
    SUBCASE("bad magic") {
      auto b = good;
      b[0] = 'X';
      expect_format(b);
    }
    SUBCASE("bad version") {
      auto b = good;
      b[4] = 2;
      expect_format(b);
    }
    SUBCASE("bad dtype") {
      auto b = good;
      b[20] = 1;
      expect_format(b);
    }
    SUBCASE("nonzero padding") {
      auto b = good;
      b[22] = 7;
      expect_format(b);
    }
    SUBCASE("dimension mismatch against payload") {
      auto b = good;
      b[16] = 3;
      expect_format(b);
    }
    SUBCASE("non-finite value") {
      auto b = header_bytes(2, 2);
      for (float f : {1.f, 0.f, NAN, 1.f}) append_float(b, f);
      testutil::write_bytes(dir / "e.iqem", b);
      CHECK_ERROR_CODE(read_embedding_file(dir / "e.iqem", dir / "l.iqlb", FileFormat::kBinary),
                       ErrorCode::kNonFiniteValue);
    }
    SUBCASE("label count mismatch") {
      testutil::write_bytes(dir / "e.iqem", good);
      testutil::write_bytes(dir / "l3.iqlb", label_bytes({0, 1, 2}));
      CHECK_ERROR_CODE(read_embedding_file(dir / "e.iqem", dir / "l3.iqlb", FileFormat::kBinary),
                       ErrorCode::kLabelCountMismatch);
    }
    SUBCASE("missing file names the path") {
      testutil::write_bytes(dir / "e.iqem", good);
      try {
        read_embedding_file(dir / "e.iqem", dir / "missing.iqlb", FileFormat::kBinary);
        FAIL("expected an error");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kIo);
        CHECK(std::string(e.what()).find("missing.iqlb") != std::string::npos);
      }
    }
  }

  TEST_CASE("csv ingestion") {
    testutil::TempDir dir;
    SUBCASE("string labels map in first-appearance order") {
      write_text(dir / "a.csv", "1.0,0.0,A\n0.0,1.0,B\n");
      const auto s = read_embedding_file(dir / "a.csv", {}, FileFormat::kCsv);
      CHECK(s.rows() == 2);
      CHECK(s.dim() == 2);
      CHECK(s.labels()[0] == 0);
      CHECK(s.labels()[1] == 1);
      CHECK(s.label_names() == std::vector<std::string>{"A", "B"});
      CHECK(s.embeddings().unit_normalized());
    }
    SUBCASE("header row and integer labels") {
      write_text(dir / "b.csv", "x,y,label\n3,4,7\n1,1,7\n0,2,2\n");
      const auto s = read_embedding_file(dir / "b.csv", {}, FileFormat::kCsv);
      CHECK(s.rows() == 3);
      CHECK(std::vector<Label>(s.labels().begin(), s.labels().end()) == std::vector<Label>{7, 7, 2});
      CHECK(s.label_names().empty());
    }
    SUBCASE("ragged row") {
      write_text(dir / "c.csv", "1,2,A\n1,A\n");
      CHECK_ERROR_CODE(read_embedding_file(dir / "c.csv", {}, FileFormat::kCsv), ErrorCode::kFormat);
    }
    SUBCASE("non-numeric value") {
      write_text(dir / "d.csv", "1,2,A\n1,zz,A\n");
      CHECK_ERROR_CODE(read_embedding_file(dir / "d.csv", {}, FileFormat::kCsv), ErrorCode::kFormat);
    }
    SUBCASE("infinite value") {
      write_text(dir / "e.csv", "1,inf,A\n");
      CHECK_ERROR_CODE(read_embedding_file(dir / "e.csv", {}, FileFormat::kCsv), ErrorCode::kNonFiniteValue);
    }
  }

  TEST_CASE("binary round trip keeps bits and labels verbatim") {
    testutil::TempDir dir;
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<float> u(-1e3f, 1e3f);
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{1, 1}, {2, 4096}, {3, 5}, {40, 33}};
    for (const auto& [n, d] : shapes) {
      std::vector<float> v(n * d);
      for (auto& x : v) x = u(gen);
      v[0] = -0.0f;
      if (v.size() > 1) v[1] = std::numeric_limits<float>::denorm_min();
      std::vector<Label> labels(n);
      const Label pool[] = {0, 7, 9};
      for (std::size_t i = 0; i < n; ++i) labels[i] = pool[i % 3];
      const LabeledEmbeddingSet s(EmbeddingSet(n, d, v), labels);
      write_embedding_file(s, dir / "r.iqem", dir / "r.iqlb", FileFormat::kBinary);
      const auto back = read_embedding_file(dir / "r.iqem", dir / "r.iqlb", FileFormat::kBinary);
      REQUIRE(back.rows() == n);
      CHECK(std::memcmp(back.embeddings().data().data(), v.data(), v.size() * 4) == 0);
      CHECK(std::equal(labels.begin(), labels.end(), back.labels().begin()));
      CHECK(content_hash(back) == content_hash(s));
    }
  }

  TEST_CASE("csv round trip is exact for float values") {
    testutil::TempDir dir;
    const auto emb = testutil::random_set(20, 6, 4, false);
    const LabeledEmbeddingSet s(emb, testutil::cyclic_labels(20, 3));
    write_embedding_file(s, dir / "r.csv", {}, FileFormat::kCsv);
    const auto back = read_embedding_file(dir / "r.csv", {}, FileFormat::kCsv);
    CHECK(std::equal(emb.data().begin(), emb.data().end(), back.embeddings().data().begin()));
    CHECK(std::equal(s.labels().begin(), s.labels().end(), back.labels().begin()));
  }

  TEST_CASE("content hash is sha256 of the encoded files") {
    const LabeledEmbeddingSet a(EmbeddingSet(1, 1, {1.0f}), {0});
    const LabeledEmbeddingSet b(EmbeddingSet(1, 1, {1.0f}), {1});
    CHECK(content_hash(a).size() == 64);
    CHECK(content_hash(a) != content_hash(b));
    // Digest of the concatenated file bytes, computed with an external sha256 tool.
    CHECK(content_hash(a) == "97afbd8ebfb7a701143d29cd687e941d649221a9e088bdd27a5a7535f6676d2c");
  }

  TEST_CASE("dedup examples") {
    SUBCASE("identical rows: second dropped") {
      const auto s = labeled({1, 0, 1, 0}, 2, {0, 0});
      const auto r = dedup_within_identity(s, 0.9999);
      CHECK(r.set.rows() == 1);
      REQUIRE(r.drops.size() == 1);
      CHECK(r.drops[0].dropped == 1);
      CHECK(r.drops[0].kept == 0);
    }
    SUBCASE("orthogonal rows: both kept") {
      const auto r = dedup_within_identity(labeled({1, 0, 0, 1}, 2, {0, 0}), 0.9999);
      CHECK(r.set.rows() == 2);
      CHECK(r.drops.empty());
    }
    SUBCASE("greedy scan keeps r1 and r3") {
      const auto r = dedup_within_identity(labeled({1, 0, 1, 0, 0, 1}, 2, {4, 4, 4}), 0.9999);
      CHECK(std::vector<std::uint64_t>(r.set.source_ids().begin(), r.set.source_ids().end()) ==
            std::vector<std::uint64_t>{0, 2});
      REQUIRE(r.drops.size() == 1);
      CHECK(r.drops[0].dropped == 1);
      CHECK(r.drops[0].kept == 0);
      CHECK(r.drops[0].similarity == 1.0);
    }
    SUBCASE("cross-identity duplicates are never compared") {
      const auto r = dedup_within_identity(labeled({1, 0, 1, 0}, 2, {0, 1}), 0.9999);
      CHECK(r.set.rows() == 2);
    }
    SUBCASE("requires normalized input") {
      const LabeledEmbeddingSet raw(EmbeddingSet(2, 1, {2, 2}), {0, 0});
      CHECK_ERROR_CODE(dedup_within_identity(raw, 0.9999), ErrorCode::kNotNormalized);
    }
  }

  TEST_CASE("dedup keeps first row of each identity and order") {
    auto emb = testutil::random_set(60, 4, 8);
    std::vector<float> v(emb.data().begin(), emb.data().end());
    for (std::size_t t = 0; t < 4; ++t) v[10 * 4 + t] = v[4 * 4 + t];  // row 10 duplicates row 4
    const LabeledEmbeddingSet s(EmbeddingSet(60, 4, v, true), testutil::cyclic_labels(60, 6));
    const auto r = dedup_within_identity(s, 0.9999);
    CHECK(r.set.rows() == 59);
    REQUIRE(r.drops.size() == 1);
    CHECK(r.drops[0].dropped == 10);
    CHECK(r.drops[0].kept == 4);
    const auto ids = r.set.source_ids();
    CHECK(std::is_sorted(ids.begin(), ids.end()));
  }

  TEST_CASE("stratified sampling examples") {
    SUBCASE("M=2, m=1 on two identities of size 3") {
      const auto s = LabeledEmbeddingSet(testutil::random_set(6, 3, 1), {0, 0, 0, 1, 1, 1});
      SamplingConfig cfg;
      cfg.target_identities = 2;
      cfg.per_identity = 1;
      const auto r = stratified_sample(s, cfg);
      CHECK(r.set.rows() == 2);
      CHECK(r.set.identity_count() == 2);
    }
    SUBCASE("M clamps to eligible identities") {
      const auto s = LabeledEmbeddingSet(testutil::random_set(500 * 12, 8, 2),
                                         testutil::cyclic_labels(500 * 12, 500));
      SamplingConfig cfg;
      const auto r = stratified_sample(s, cfg);
      CHECK(r.set.rows() == 5000);
      for (const auto& [label, rows] : r.set.identity_index()) CHECK(rows.size() == 10);
      CHECK(r.manifest.entries.size() == 500);
    }
    SUBCASE("rows grouped by identity in selection order") {
      const auto s = LabeledEmbeddingSet(testutil::random_set(200, 4, 3), testutil::cyclic_labels(200, 20));
      SamplingConfig cfg;
      cfg.target_identities = 5;
      cfg.per_identity = 3;
      cfg.seed = 77;
      const auto r = stratified_sample(s, cfg);
      REQUIRE(r.set.rows() == 15);
      for (std::size_t e = 0; e < 5; ++e) {
        for (std::size_t j = 0; j < 3; ++j) {
          CHECK(r.set.labels()[e * 3 + j] == r.manifest.entries[e].identity);
          CHECK(r.set.source_ids()[e * 3 + j] == r.manifest.entries[e].chosen_rows[j]);
        }
      }
    }
  }

  TEST_CASE("sampling determinism and seed sensitivity") {
    const auto s = LabeledEmbeddingSet(testutil::random_set(1200 * 3, 4, 5),
                                       testutil::cyclic_labels(1200 * 3, 1200));
    SamplingConfig cfg;
    cfg.per_identity = 2;
    const auto a = stratified_sample(s, cfg);
    const auto b = stratified_sample(s, cfg);
    CHECK(manifest_to_json(a.manifest).dump() == manifest_to_json(b.manifest).dump());
    CHECK(content_hash(a.set) == content_hash(b.set));
    cfg.seed = 1;
    const auto c = stratified_sample(s, cfg);
    CHECK(manifest_to_json(a.manifest).dump() != manifest_to_json(c.manifest).dump());
  }

  TEST_CASE("sampling eligibility, dedup before draw, and errors") {
    // Identity 0 has 3 rows of which two are duplicates; identity 1 is a singleton.
    const auto s = labeled({1, 0, 1, 0, 0, 1, 0.6f, 0.8f}, 2, {0, 0, 0, 1});
    SamplingConfig cfg;
    cfg.per_identity = 10;
    const auto r = stratified_sample(s, cfg);
    CHECK(r.manifest.excluded_identities == std::vector<Label>{1});
    CHECK(r.manifest.eligible_identities == 1);
    CHECK(r.set.rows() == 2);
    REQUIRE(r.manifest.entries.size() == 1);
    CHECK(r.manifest.entries[0].pool_size == 3);
    CHECK(r.manifest.entries[0].dedup_drops.size() == 1);

    cfg.min_identity_size = 4;
    CHECK_ERROR_CODE(stratified_sample(s, cfg), ErrorCode::kNoEligibleIdentity);
    cfg.min_identity_size = 2;
    cfg.dedup_threshold = 0.0;
    CHECK_ERROR_CODE(stratified_sample(s, cfg), ErrorCode::kInvalidArgument);
    cfg.dedup_threshold = 0.9999;
    cfg.per_identity = 0;
    CHECK_ERROR_CODE(stratified_sample(s, cfg), ErrorCode::kInvalidArgument);
  }

  TEST_CASE("sample draws are uniform within an identity") {
    // One identity of 5 rows, m=2: each row chosen with probability 2/5.
    const auto s = LabeledEmbeddingSet(testutil::random_set(5, 3, 9), {3, 3, 3, 3, 3});
    std::vector<int> hits(5, 0);
    SamplingConfig cfg;
    cfg.per_identity = 2;
    for (std::uint64_t seed = 0; seed < 5000; ++seed) {
      cfg.seed = seed;
      const auto result = stratified_sample(s, cfg);
      for (auto r : result.manifest.entries[0].chosen_rows) ++hits[r];
    }
    for (int h : hits) CHECK(std::abs(h - 2000) < 150);
  }

  TEST_CASE("noise injection examples") {
    const auto s = LabeledEmbeddingSet(testutil::random_set(300, 4, 6), testutil::cyclic_labels(300, 30));
    SUBCASE("rho 0 leaves labels untouched") {
      const auto r = inject_uniform_flip_noise(s, {0.0, 1});
      CHECK(r.flips.empty());
      CHECK(encode_labels(r.set.labels()) == encode_labels(s.labels()));
    }
    SUBCASE("rho 1 changes every label within the closed set") {
      const auto r = inject_uniform_flip_noise(s, {1.0, 2});
      CHECK(r.flips.size() == 300);
      std::set<Label> before(s.labels().begin(), s.labels().end());
      for (std::size_t i = 0; i < 300; ++i) {
        CHECK(r.set.labels()[i] != s.labels()[i]);
        CHECK(before.count(r.set.labels()[i]) == 1);
      }
      CHECK(std::equal(s.embeddings().data().begin(), s.embeddings().data().end(),
                       r.set.embeddings().data().begin()));
    }
    SUBCASE("flip targets are uniform over the other labels") {
      const auto three = LabeledEmbeddingSet(testutil::random_set(30000, 2, 6), testutil::cyclic_labels(30000, 3));
      const auto r = inject_uniform_flip_noise(three, {1.0, 5});
      std::map<std::pair<Label, Label>, int> pairs;
      for (const auto& f : r.flips) ++pairs[{f.old_label, f.new_label}];
      CHECK(pairs.size() == 6);
      for (const auto& [key, count] : pairs) CHECK(std::abs(count - 5000) < 300);
    }
    SUBCASE("errors") {
      const auto single = LabeledEmbeddingSet(testutil::random_set(4, 2, 1), {0, 0, 0, 0});
      CHECK_ERROR_CODE(inject_uniform_flip_noise(single, {0.1, 0}), ErrorCode::kSingleIdentity);
      CHECK_NOTHROW(inject_uniform_flip_noise(single, {0.0, 0}));
      CHECK_ERROR_CODE(inject_uniform_flip_noise(s, {1.5, 0}), ErrorCode::kInvalidArgument);
    }
  }

  TEST_CASE("flip fraction concentrates at rho 0.2") {
    const auto s = LabeledEmbeddingSet(testutil::random_set(10000, 2, 7), testutil::cyclic_labels(10000, 1000));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = inject_uniform_flip_noise(s, {0.2, seed});
      CHECK(std::abs(static_cast<double>(r.flips.size()) / 10000.0 - 0.2) <= 0.02);
      for (const auto& f : r.flips) CHECK(f.new_label != f.old_label);
    }
  }

  TEST_CASE("manifest and flip log json") {
    const auto s = LabeledEmbeddingSet(testutil::random_set(40, 3, 2), testutil::cyclic_labels(40, 4));
    SamplingConfig cfg;
    cfg.target_identities = 2;
    cfg.per_identity = 3;
    cfg.seed = 5;
    const auto j = manifest_to_json(stratified_sample(s, cfg).manifest);
    CHECK(j.at("schema") == "iqscore.manifest");
    CHECK(j.at("source_hash") == content_hash(s));
    CHECK(j.at("identities").size() == 2);

    const auto r = inject_uniform_flip_noise(s, {0.5, 3});
    const auto f = flip_log_to_json({0.5, 3}, content_hash(s), s.rows(), r.flips);
    CHECK(f.at("schema") == "iqscore.fliplog");
    CHECK(f.at("flips").size() == r.flips.size());
  }
}
