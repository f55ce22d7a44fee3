#include "eobkit/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

std::string_view to_string(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::random: return "random";
    case SelectionStrategy::clip_topm: return "clip_topm";
    case SelectionStrategy::cluster_clip: return "cluster_clip";
  }
  return "random";
}

std::string_view to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::distractor: return "distractor";
    case CandidateSource::original_negatives: return "original_negatives";
    case CandidateSource::merged: return "merged";
  }
  return "distractor";
}

SelectionStrategy parse_strategy(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "random") return SelectionStrategy::random;
  if (s == "clip_topm" || s == "clip") return SelectionStrategy::clip_topm;
  if (s == "cluster_clip") return SelectionStrategy::cluster_clip;
  fail(ErrorKind::UsageError, "unknown selection strategy '" + std::string(text) + "'");
}

CandidateSource parse_candidate_source(std::string_view text) {
  if (text == "distractor") return CandidateSource::distractor;
  if (text == "original_negatives") return CandidateSource::original_negatives;
  if (text == "merged") return CandidateSource::merged;
  fail(ErrorKind::ParseError, "unknown candidate source '" + std::string(text) + "'");
}

void SelectorConfig::validate() const {
  if (m < 1) fail(ErrorKind::ConfigError, "selector m must be >= 1");
  if (kmeans_max_iters < 1) fail(ErrorKind::ConfigError, "kmeans_max_iters must be >= 1");
  if (!(kmeans_tol > 0.0)) fail(ErrorKind::ConfigError, "kmeans_tol must be > 0");
}

std::vector<std::size_t> dedupe_candidate_indices(std::span<const std::string> candidates, std::string_view answer) {
  const auto answer_key = normalize_option(answer);
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto key = normalize_option(candidates[i]);
    if (key.empty() || key == answer_key) continue;
    if (seen.insert(key).second) kept.push_back(i);
  }
  return kept;
}

std::vector<std::string> dedupe_candidates(std::span<const std::string> candidates, std::string_view answer) {
  std::vector<std::string> out;
  for (auto i : dedupe_candidate_indices(candidates, answer)) out.push_back(candidates[i]);
  return out;
}

namespace {

void require_enough(std::size_t have, std::size_t m) {
  if (m == 0) fail(ErrorKind::ConfigError, "m must be >= 1");
  if (have < m) {
    fail(ErrorKind::TooFewCandidates, "need " + std::to_string(m) + " candidates, have " + std::to_string(have));
  }
}

void require_aligned(std::span<const std::string> candidates, const Matrix& features) {
  if (features.rows != candidates.size()) {
    fail(ErrorKind::DimMismatch, std::to_string(candidates.size()) + " candidates but " +
                                     std::to_string(features.rows) + " feature rows");
  }
}

// Higher score first, lower index on ties.
bool ranks_before(const std::vector<double>& scores, std::size_t a, std::size_t b) {
  if (scores[a] != scores[b]) return scores[a] > scores[b];
  return a < b;
}

double squared_distance(std::span<const float> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    double diff = static_cast<double>(a[d]) - b[d];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

Selection select_random(std::span<const std::string> candidates, std::size_t m, std::uint64_t seed) {
  require_enough(candidates.size(), m);
  std::vector<std::size_t> pool(candidates.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  Selection sel;
  // Partial Fisher-Yates: the first m slots become the draw order.
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    sel.chosen_indices.push_back(pool[i]);
    sel.chosen.push_back(candidates[pool[i]]);
  }
  return sel;
}

Selection select_clip_topm(std::span<const std::string> candidates, const Matrix& text_features,
                           std::span<const float> visual_feature, std::size_t m) {
  require_enough(candidates.size(), m);
  require_aligned(candidates, text_features);
  auto scores = similarity_scores(text_features, visual_feature);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) { return ranks_before(scores, a, b); });
  Selection sel;
  for (std::size_t i = 0; i < m; ++i) {
    sel.chosen_indices.push_back(order[i]);
    sel.chosen.push_back(candidates[order[i]]);
    sel.scores.push_back(scores[order[i]]);
  }
  return sel;
}

double clustering_sse(const Matrix& points, std::span<const std::size_t> assignments, std::size_t k) {
  if (assignments.size() != points.rows) fail(ErrorKind::DimMismatch, "assignment count differs from point count");
  std::vector<double> sums(k * points.cols, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto c = assignments[i];
    if (c >= k) fail(ErrorKind::DimMismatch, "cluster id out of range");
    ++counts[c];
    auto row = points.row(i);
    for (std::size_t d = 0; d < points.cols; ++d) sums[c * points.cols + d] += row[d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t d = 0; d < points.cols; ++d) sums[c * points.cols + d] /= static_cast<double>(counts[c]);
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    sse += squared_distance(points.row(i), std::span<const double>(sums).subspan(assignments[i] * points.cols, points.cols));
  }
  return sse;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = points.rows;
  const std::size_t dim = points.cols;
  if (k < 1) fail(ErrorKind::ConfigError, "k must be >= 1");
  if (n < k) fail(ErrorKind::TooFewPoints, "k-means with k=" + std::to_string(k) + " needs at least k points, have " + std::to_string(n));
  if (dim == 0) fail(ErrorKind::DimMismatch, "points have dimension 0");
  for (float x : points.data) {
    if (!std::isfinite(x)) fail(ErrorKind::NonFinite, "k-means input contains NaN or Inf");
  }

  std::vector<double> centroids(k * dim);
  auto centroid = [&](std::size_t c) { return std::span<double>(centroids).subspan(c * dim, dim); };
  auto set_centroid_to_point = [&](std::size_t c, std::size_t i) {
    auto row = points.row(i);
    auto dst = centroid(c);
    for (std::size_t d = 0; d < dim; ++d) dst[d] = row[d];
  };

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<bool> is_center(n, false);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  set_centroid_to_point(0, first);
  is_center[first] = true;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroid(c - 1)));
      total += nearest[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform01() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        acc += nearest[i];
        pick = i;
        if (r < acc) break;
      }
    }
    if (pick == n || is_center[pick]) {
      // Fewer distinct points than k: duplicates are allowed to split.
      pick = 0;
      while (is_center[pick]) ++pick;
    }
    set_centroid_to_point(c, pick);
    is_center[pick] = true;
  }

  KMeansResult result;
  result.assignments.assign(n, 0);
  std::vector<std::size_t> previous;
  std::vector<std::size_t> counts(k);
  std::vector<double> sums(k * dim);
  std::vector<double> point_cost(n);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    // Assignment; ties go to the lower cluster index.
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        double dist = squared_distance(points.row(i), centroid(c));
        if (dist < best) {
          best = dist;
          best_c = c;
        }
      }
      result.assignments[i] = best_c;
      point_cost[i] = best;
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (auto c : result.assignments) ++counts[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t donor = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[result.assignments[i]] < 2) continue;
        if (donor == n || point_cost[i] > point_cost[donor]) donor = i;
      }
      --counts[result.assignments[donor]];
      result.assignments[donor] = c;
      counts[c] = 1;
      point_cost[donor] = 0.0;
      set_centroid_to_point(c, donor);
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = points.row(i);
      auto c = result.assignments[i];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto dst = centroid(c);
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double updated = sums[c * dim + d] / static_cast<double>(counts[c]);
        moved += (updated - dst[d]) * (updated - dst[d]);
        dst[d] = updated;
      }
      shift = std::max(shift, std::sqrt(moved));
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += squared_distance(points.row(i), centroid(result.assignments[i]));
    result.sse_history.push_back(sse);
    result.iterations = iter + 1;

    if (result.assignments == previous || shift < options.tol) {
      result.converged = true;
      break;
    }
    previous = result.assignments;
  }

  result.centroids = Matrix(k, dim);
  for (std::size_t i = 0; i < centroids.size(); ++i) result.centroids.data[i] = static_cast<float>(centroids[i]);
  return result;
}

Selection select_cluster_clip(std::span<const std::string> candidates, const Matrix& text_features,
                              std::span<const float> visual_feature, std::size_t m, std::uint64_t seed,
                              const KMeansOptions& options) {
  require_enough(candidates.size(), m);
  require_aligned(candidates, text_features);
  auto scores = similarity_scores(text_features, visual_feature);
  auto clusters = kmeans(text_features, m, seed, options);

  std::vector<std::size_t> best(m, candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto c = clusters.assignments[i];
    if (best[c] == candidates.size() || ranks_before(scores, i, best[c])) best[c] = i;
  }
  Selection sel;
  for (std::size_t c = 0; c < m; ++c) {
    sel.chosen_indices.push_back(best[c]);
    sel.chosen.push_back(candidates[best[c]]);
    sel.scores.push_back(scores[best[c]]);
  }
  sel.cluster_of = std::move(clusters.assignments);
  return sel;
}

Selection select(const SelectorConfig& config, std::span<const std::string> candidates, const Matrix& text_features,
                 std::span<const float> visual_feature) {
  config.validate();
  switch (config.strategy) {
    case SelectionStrategy::random: return select_random(candidates, config.m, config.seed);
    case SelectionStrategy::clip_topm: return select_clip_topm(candidates, text_features, visual_feature, config.m);
    case SelectionStrategy::cluster_clip:
      return select_cluster_clip(candidates, text_features, visual_feature, config.m, config.seed,
                                 {config.kmeans_max_iters, config.kmeans_tol});
  }
  fail(ErrorKind::ConfigError, "unknown strategy");
}

std::string selection_to_json(const Selection& selection, const SelectorConfig& config) {
  nlohmann::ordered_json j;
  j["sample_id"] = selection.sample_id;
  j["strategy"] = to_string(config.strategy);
  j["m"] = config.m;
  j["seed"] = config.seed;
  j["chosen"] = selection.chosen;
  j["chosen_indices"] = selection.chosen_indices;
  j["scores"] = selection.scores;
  if (selection.cluster_of) {
    j["cluster_of"] = *selection.cluster_of;
  } else {
    j["cluster_of"] = nullptr;
  }
  return j.dump();
}

Selection selection_from_json(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::ParseError, "malformed selection record");
  Selection sel;
  try {
    sel.sample_id = j.at("sample_id").get<std::string>();
    sel.chosen = j.at("chosen").get<std::vector<std::string>>();
    sel.chosen_indices = j.at("chosen_indices").get<std::vector<std::size_t>>();
    sel.scores = j.at("scores").get<std::vector<double>>();
    if (j.contains("cluster_of") && !j["cluster_of"].is_null()) {
      sel.cluster_of = j["cluster_of"].get<std::vector<std::size_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("selection record: ") + e.what());
  }
  if (sel.chosen.size() != sel.chosen_indices.size()) fail(ErrorKind::ParseError, "chosen/chosen_indices length mismatch");
  return sel;
}

}  // namespace eobkit
