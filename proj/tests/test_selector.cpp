#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "eobkit/embedding_store.hpp"
#include "eobkit/error.hpp"
#include "eobkit/selector.hpp"
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

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Plain sums over every member, independent of the library's SSE helper.
double brute_sse(const Matrix& points, const std::vector<std::size_t>& assign, std::size_t k) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> mean(points.cols, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (assign[i] != c) continue;
      ++n;
      for (std::size_t d = 0; d < points.cols; ++d) mean[d] += points.data[i * points.cols + d];
    }
    if (n == 0) continue;
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (assign[i] != c) continue;
      for (std::size_t d = 0; d < points.cols; ++d) {
        double diff = points.data[i * points.cols + d] - mean[d];
        total += diff * diff;
      }
    }
  }
  return total;
}

}  // namespace

TEST(Dedupe, NormalizationRule) {
  std::vector<std::string> c{"A dog.", "a dog", "a cat"};
  EXPECT_EQ(dedupe_candidates(c, "a bird"), (std::vector<std::string>{"A dog.", "a cat"}));
  std::vector<std::string> d{"The Bird.", "a cat"};
  EXPECT_EQ(dedupe_candidates(d, "the bird"), (std::vector<std::string>{"a cat"}));
  std::vector<std::string> all{"x", "X."};
  EXPECT_TRUE(dedupe_candidates(all, "x").empty());
  EXPECT_EQ(kind_of([] { select_random({}, 4, 1); }), ErrorKind::TooFewCandidates);
}

TEST(Random, ExhaustiveDrawAndDeterminism) {
  auto c = support::numbered_strings(4);
  auto sel = select_random(c, 4, 3);
  EXPECT_EQ(sorted(sel.chosen_indices), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_TRUE(sel.scores.empty());
  EXPECT_EQ(select_random(c, 4, 3), sel);
  EXPECT_EQ(kind_of([&] { select_random(c, 5, 3); }), ErrorKind::TooFewCandidates);
}

TEST(Random, DifferentSeedsUsuallyDiffer) {
  auto c = support::numbered_strings(128);
  int differing = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    if (select_random(c, 4, 2 * s).chosen_indices != select_random(c, 4, 2 * s + 1).chosen_indices) ++differing;
  }
  EXPECT_GE(differing, 95);
}

TEST(ClipTopM, HandCosine) {
  auto f = Matrix::from_rows({{1, 0}, {0, 1}, {0.6f, 0.8f}, {-1, 0}});
  auto c = support::numbered_strings(4);
  auto sel = select_clip_topm(c, f, std::vector<float>{1, 0}, 2);
  EXPECT_EQ(sel.chosen_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_NEAR(sel.scores[0], 1.0, 1e-6);
  EXPECT_NEAR(sel.scores[1], 0.6, 1e-6);
  auto all = select_clip_topm(c, f, std::vector<float>{1, 0}, 4);
  EXPECT_EQ(all.chosen_indices, (std::vector<std::size_t>{0, 2, 1, 3}));
}

TEST(ClipTopM, TiesGoToLowerIndex) {
  auto f = Matrix::from_rows({{0, 1}, {1, 0}, {0, 1}, {1, 0}});
  auto sel = select_clip_topm(support::numbered_strings(4), f, std::vector<float>{1, 0}, 1);
  EXPECT_EQ(sel.chosen_indices, (std::vector<std::size_t>{1}));
}

TEST(ClipTopM, MatchesFullSortOracle) {
  Rng rng(2024);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(128), d = 1 + rng.below(64), m = 1 + rng.below(n);
    auto f = support::random_unit_rows(rng, n, d);
    auto v = support::random_unit(rng, d);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(f.data[i * d + k]) * v[k];
      ranked.emplace_back(-dot, i);
    }
    std::sort(ranked.begin(), ranked.end());
    std::set<std::size_t> expected;
    for (std::size_t i = 0; i < m; ++i) expected.insert(ranked[i].second);
    auto sel = select_clip_topm(support::numbered_strings(n), f, v, m);
    if (std::set<std::size_t>(sel.chosen_indices.begin(), sel.chosen_indices.end()) != expected) ++mismatches;
    EXPECT_TRUE(std::is_sorted(sel.scores.rbegin(), sel.scores.rend()));
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(KMeans, SeparatedClusters) {
  auto pts = Matrix::from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
  auto r = kmeans(pts, 2, 1);
  EXPECT_EQ(r.assignments[0], r.assignments[1]);
  EXPECT_EQ(r.assignments[2], r.assignments[3]);
  EXPECT_NE(r.assignments[0], r.assignments[2]);
  EXPECT_TRUE(r.converged);
}

TEST(KMeans, SingleCluster) {
  auto pts = Matrix::from_rows({{1, 2}, {3, 4}, {5, 9}});
  auto r = kmeans(pts, 1, 1);
  EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_NEAR(r.centroids.data[0], 3.0, 1e-6);
  EXPECT_NEAR(r.centroids.data[1], 5.0, 1e-6);
  EXPECT_EQ(kind_of([&] { kmeans(pts, 4, 1); }), ErrorKind::TooFewPoints);
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  auto pts = Matrix::from_rows({{1, 0}, {1, 0}, {1, 0}, {0, 1}});
  auto r = kmeans(pts, 3, 5);
  std::set<std::size_t> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 3u);
}

TEST(KMeans, SseNonIncreasingAndRecomputable) {
  Rng rng(77);
  auto pts = support::random_unit_rows(rng, 256, 16);
  auto r = kmeans(pts, 8, 3);
  ASSERT_FALSE(r.sse_history.empty());
  for (std::size_t i = 1; i < r.sse_history.size(); ++i) {
    EXPECT_LE(r.sse_history[i], r.sse_history[i - 1] * (1 + 1e-12));
  }
  EXPECT_NEAR(r.sse_history.back(), brute_sse(pts, r.assignments, 8), 1e-6 * r.sse_history.back());
  EXPECT_NEAR(clustering_sse(pts, r.assignments, 8), brute_sse(pts, r.assignments, 8), 1e-9 * r.sse_history.back());
  std::vector<std::size_t> random_assign(256);
  for (auto& a : random_assign) a = rng.below(8);
  EXPECT_LE(r.sse_history.back(), brute_sse(pts, random_assign, 8));
}

TEST(ClusterClip, PerClusterArgmax) {
  auto f = Matrix::from_rows({{1, 0, 0}, {0.8f, 0.6f, 0}, {0, 0, 1}, {0, 0.6f, 0.8f}});
  auto sel = select_cluster_clip(support::numbered_strings(4), f, std::vector<float>{0, 1, 0}, 2, 1);
  EXPECT_EQ(sorted(sel.chosen_indices), (std::vector<std::size_t>{1, 3}));
  ASSERT_TRUE(sel.cluster_of.has_value());
}

TEST(ClusterClip, SingleClusterMatchesTopOne) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    auto f = support::random_unit_rows(rng, 30, 8);
    auto v = support::random_unit(rng, 8);
    auto c = support::numbered_strings(30);
    EXPECT_EQ(select_cluster_clip(c, f, v, 1, t).chosen_indices, select_clip_topm(c, f, v, 1).chosen_indices);
  }
}

TEST(ClusterClip, StructuralOracle) {
  Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng.below(8);
    const std::size_t n = m + rng.below(121 - m);
    const std::size_t d = 2 + rng.below(63);
    auto f = support::random_unit_rows(rng, n, d);
    auto v = support::random_unit(rng, d);
    auto sel = select_cluster_clip(support::numbered_strings(n), f, v, m, rng.next());
    ASSERT_TRUE(sel.cluster_of.has_value());
    const auto& cl = *sel.cluster_of;
    ASSERT_EQ(cl.size(), n);
    auto scores = similarity_scores(f, v);
    std::set<std::size_t> clusters_hit;
    for (std::size_t j = 0; j < m; ++j) {
      const auto pick = sel.chosen_indices[j];
      clusters_hit.insert(cl[pick]);
      for (std::size_t i = 0; i < n; ++i) {
        if (cl[i] != cl[pick]) continue;
        EXPECT_TRUE(scores[i] < scores[pick] || (scores[i] == scores[pick] && i >= pick));
      }
    }
    EXPECT_EQ(clusters_hit.size(), m);
    std::set<std::size_t> labels(cl.begin(), cl.end());
    EXPECT_EQ(labels.size(), m);
  }
}

TEST(SelectionJson, RoundTrip) {
  auto f = Matrix::from_rows({{1, 0}, {0, 1}, {0.6f, 0.8f}});
  SelectorConfig cfg;
  cfg.strategy = SelectionStrategy::cluster_clip;
  cfg.m = 2;
  cfg.seed = 3;
  auto sel = select(cfg, support::numbered_strings(3), f, std::vector<float>{1, 0});
  sel.sample_id = "s";
  EXPECT_EQ(selection_from_json(selection_to_json(sel, cfg)), sel);
  EXPECT_EQ(parse_strategy("cluster-clip"), SelectionStrategy::cluster_clip);
  cfg.m = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
