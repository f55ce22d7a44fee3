#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eobkit/embedding_store.hpp"

namespace eobkit {

enum class SelectionStrategy { random, clip_topm, cluster_clip };
enum class CandidateSource { distractor, original_negatives, merged };

std::string_view to_string(SelectionStrategy strategy);
std::string_view to_string(CandidateSource source);
/// Accepts both `cluster_clip` and the CLI spelling `cluster-clip`.
SelectionStrategy parse_strategy(std::string_view text);
CandidateSource parse_candidate_source(std::string_view text);

struct CandidateSet {
  std::string sample_id;
  std::vector<std::string> candidates;
  CandidateSource source = CandidateSource::distractor;
};

struct SelectorConfig {
  SelectionStrategy strategy = SelectionStrategy::cluster_clip;
  std::size_t m = 4;
  std::uint64_t seed = 0;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;
  bool include_original_negatives = false;

  void validate() const;
};

struct Selection {
  std::string sample_id;
  std::vector<std::string> chosen;
  std::vector<std::size_t> chosen_indices;
  /// Cosine similarity of each pick to the visual embedding. Empty for
  /// random selection, which never looks at embeddings.
  std::vector<double> scores;
  /// Cluster of every candidate (cluster_clip only).
  std::optional<std::vector<std::size_t>> cluster_of;

  bool operator==(const Selection&) const = default;
};

/// Indices of the candidates that survive deduplication: the first of each
/// normalization-equal group, minus anything equal to the answer.
std::vector<std::size_t> dedupe_candidate_indices(std::span<const std::string> candidates, std::string_view answer);
std::vector<std::string> dedupe_candidates(std::span<const std::string> candidates, std::string_view answer);

Selection select_random(std::span<const std::string> candidates, std::size_t m, std::uint64_t seed);

/// Top-m by cosine similarity; ties go to the lower candidate index.
Selection select_clip_topm(std::span<const std::string> candidates, const Matrix& text_features,
                           std::span<const float> visual_feature, std::size_t m);

struct KMeansOptions {
  int max_iters = 100;
  double tol = 1e-4;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;
  /// Within-cluster sum of squared distances after each Lloyd iteration.
  std::vector<double> sse_history;
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm on Euclidean distance with k-means++ seeding. Empty
/// clusters are refilled with the point farthest from its own centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Within-cluster SSE of an arbitrary assignment against its cluster means.
double clustering_sse(const Matrix& points, std::span<const std::size_t> assignments, std::size_t k);

/// K-means into m groups, then the most visually similar candidate per group.
/// chosen[j] comes from cluster j.
Selection select_cluster_clip(std::span<const std::string> candidates, const Matrix& text_features,
                              std::span<const float> visual_feature, std::size_t m, std::uint64_t seed,
                              const KMeansOptions& options = {});

/// Dispatches on config.strategy. Embeddings are ignored for random selection.
Selection select(const SelectorConfig& config, std::span<const std::string> candidates, const Matrix& text_features,
                 std::span<const float> visual_feature);

std::string selection_to_json(const Selection& selection, const SelectorConfig& config);
Selection selection_from_json(std::string_view line);

}  // namespace eobkit
