#include <gtest/gtest.h>

#include <fstream>

#include "eobkit/embedding_store.hpp"
#include "eobkit/error.hpp"
#include "support.hpp"

using namespace eobkit;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no eobkit::Error thrown";
  return ErrorKind::UsageError;
}

}  // namespace

TEST(L2Normalize, Examples) {
  auto v = l2_normalize(std::vector<float>{3, 4});
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[1], 0.8f);
  auto u = l2_normalize(std::vector<float>{0, 1, 0});
  EXPECT_EQ(u, (std::vector<float>{0, 1, 0}));
  EXPECT_EQ(kind_of([] { l2_normalize(std::vector<float>{0, 0}); }), ErrorKind::ZeroVector);
  EXPECT_EQ(kind_of([] { l2_normalize(std::vector<float>{NAN, 1}); }), ErrorKind::NonFinite);
}

TEST(TemporalPool, Examples) {
  auto same = temporal_average_pool(Matrix::from_rows({{1, 2, 2}, {1, 2, 2}, {1, 2, 2}}));
  EXPECT_NEAR(same[0], 1.0 / 3, 1e-6);
  EXPECT_NEAR(same[1], 2.0 / 3, 1e-6);
  auto diag = temporal_average_pool(Matrix::from_rows({{1, 0}, {0, 1}}));
  EXPECT_NEAR(diag[0], 0.70710678, 1e-6);
  EXPECT_NEAR(diag[1], 0.70710678, 1e-6);
  auto one = temporal_average_pool(Matrix::from_rows({{3, 4}}));
  EXPECT_NEAR(one[0], 0.6, 1e-6);
  EXPECT_EQ(kind_of([] { temporal_average_pool(Matrix(0, 3)); }), ErrorKind::EmptyFrames);
  EXPECT_EQ(kind_of([] { Matrix::from_rows({{1, 0}, {1, 0, 0}}); }), ErrorKind::DimMismatch);
}

TEST(TemporalPool, PermutationInvariant) {
  Rng rng(4);
  auto frames = support::random_unit_rows(rng, 6, 12);
  Matrix reversed(6, 12);
  for (std::size_t i = 0; i < 6; ++i) {
    auto src = frames.row(5 - i);
    std::copy(src.begin(), src.end(), reversed.row(i).begin());
  }
  auto a = temporal_average_pool(frames);
  auto b = temporal_average_pool(reversed);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(a[d], b[d], 1e-6);
}

TEST(Similarity, Examples) {
  auto s = similarity_scores(Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}}), std::vector<float>{1, 0});
  EXPECT_EQ(s, (std::vector<double>{1, 0, -1}));
  EXPECT_EQ(kind_of([] { similarity_scores(Matrix::from_rows({{1, 0}}), std::vector<float>{1, 0, 0}); }),
            ErrorKind::DimMismatch);
  EXPECT_EQ(kind_of([] { similarity_scores(Matrix::from_rows({{2, 0}}), std::vector<float>{1, 0}); }),
            ErrorKind::NotNormalized);
}

TEST(Similarity, MatchesScalarLoopOracle) {
  Rng rng(11);
  auto rows = support::random_unit_rows(rng, 64, 16);
  auto v = support::random_unit(rng, 16);
  auto scores = similarity_scores(rows, v);
  for (std::size_t i = 0; i < 64; ++i) {
    double dot = 0.0;
    for (std::size_t d = 0; d < 16; ++d) dot += static_cast<double>(rows.data[i * 16 + d]) * v[d];
    EXPECT_NEAR(scores[i], dot, 1e-6);
    EXPECT_LE(std::abs(scores[i]), 1.0 + 1e-6);
  }
}

TEST(Similarity, InvariantUnderRescalingBeforeNormalization) {
  Rng rng(12);
  auto rows = support::random_unit_rows(rng, 8, 10);
  auto v = support::random_unit(rng, 10);
  Matrix scaled(8, 10);
  for (std::size_t i = 0; i < 8; ++i) {
    std::vector<float> r(rows.row(i).begin(), rows.row(i).end());
    for (auto& x : r) x *= 37.5f;
    auto n = l2_normalize(r);
    std::copy(n.begin(), n.end(), scaled.row(i).begin());
  }
  auto a = similarity_scores(rows, v);
  auto b = similarity_scores(scaled, v);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Emb1, RoundTripIsBitExact) {
  support::TempDir dir;
  std::vector<EmbeddingRecord> recs{{"a#cand0", {0.1f, -2.5f, 3.25f, 1e-7f}},
                                    {"a#cand1", {0, 0, 0, 1}},
                                    {"a#vis", {1.5f, 2, -0.0f, 4}}};
  write_embedding_file(recs, dir / "x.emb1");
  EXPECT_EQ(read_embedding_file(dir / "x.emb1"), recs);
  write_embedding_metadata(dir / "x.emb1", "siglip-test");
  EXPECT_EQ(read_embedding_metadata(dir / "x.emb1"), "siglip-test");
}

TEST(Emb1, LayoutIsLittleEndian) {
  std::vector<EmbeddingRecord> recs{{"ab", {1.0f}}};
  auto bytes = encode_embeddings(recs);
  std::vector<std::uint8_t> expected{'E', 'M', 'B', '1', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 'a', 'b', 0x00, 0x00, 0x80, 0x3f};
  EXPECT_EQ(bytes, expected);
}

TEST(Emb1, HeaderErrors) {
  std::vector<EmbeddingRecord> recs(5, EmbeddingRecord{"x", {1, 2}});
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].id = "id" + std::to_string(i);
  auto bytes = encode_embeddings(recs);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_embeddings(bad); }), ErrorKind::BadMagic);
  const std::size_t record_size = 2 + 3 + 2 * 4;
  std::vector<std::uint8_t> four(bytes.begin(), bytes.end() - record_size);
  EXPECT_EQ(kind_of([&] { decode_embeddings(four); }), ErrorKind::TruncatedFile);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_embeddings(extra); }), ErrorKind::DimMismatch);
}

TEST(Emb1, FixtureFilesFollowIdConventions) {
  auto text = EmbeddingTable::load(support::fixture_dir() / "text.emb1");
  auto visual = EmbeddingTable::load(support::fixture_dir() / "visual.emb1");
  EXPECT_EQ(text.dim(), 32u);
  EXPECT_EQ(visual.dim(), 32u);
  EXPECT_EQ(candidate_embedding_id("vid001_0", 127), "vid001_0#cand127");
  EXPECT_EQ(visual_embedding_id("img001"), "img001#vis");
  EXPECT_NE(text.find("vid001_0#cand127"), nullptr);
  EXPECT_NE(visual.find("img001#vis"), nullptr);
  EXPECT_EQ(kind_of([&] { text.at("nope#cand0"); }), ErrorKind::MissingEmbedding);
  EXPECT_EQ(kind_of([] { EmbeddingTable::load("/nonexistent/x.emb1"); }), ErrorKind::MissingArtifact);
}
