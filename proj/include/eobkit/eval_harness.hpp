#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eobkit/agents.hpp"
#include "eobkit/annotations.hpp"
#include "eobkit/bias_audit.hpp"

namespace eobkit {

inline constexpr std::string_view kOptionLabels = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

struct EvalConfig {
  InputMode mode = InputMode::VQO;
  ModelEndpoint endpoint;
  std::string option_labels{kOptionLabels};
  std::size_t max_concurrency = 8;
  std::size_t frames = 8;
  std::filesystem::path media_root;
};

struct Query {
  std::string text;
  std::vector<std::filesystem::path> attachments;
};

/// Lettered options in the sample's order. VQO prompts lead with the
/// question; VO prompts never include it.
std::string format_options(std::span<const std::string> options, std::string_view labels = kOptionLabels);
std::string query_text(const Sample& sample, InputMode mode, std::string_view labels = kOptionLabels);
Query build_query(const Sample& sample, InputMode mode, const MediaOptions& media,
                  std::string_view labels = kOptionLabels);

/// Maps a free-form reply to an option index: an option letter first, then a
/// unique normalized option string contained in the reply, else kAbstain.
int extract_choice(std::string_view model_text, std::span<const std::string> options,
                   std::string_view labels = kOptionLabels);

struct EvalFailure {
  std::string sample_id;
  std::string error_class;
  std::string message;
};

struct EvalResult {
  std::vector<PredictionRecord> records;
  std::vector<EvalFailure> failures;
  std::size_t http_calls = 0;
};

/// One record per sample that got an answer, in sample order. Samples whose
/// request failed after retries are listed in `failures` instead.
EvalResult evaluate(const SampleSet& set, const EvalConfig& config, Transport transport, ResponseCache* cache = nullptr,
                    RequestLog* log = nullptr);

struct CategoryAccuracy {
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

struct AccuracyTable {
  std::map<std::string, CategoryAccuracy> per_category;
  /// Pooled over samples.
  CategoryAccuracy overall;
  /// Unweighted mean of the per-category accuracies.
  double category_mean = 0.0;
};

AccuracyTable accuracy_report(std::span<const PredictionRecord> records, const SampleSet& set);
std::string accuracy_table_json(const AccuracyTable& table);
std::string accuracy_table_text(const AccuracyTable& table, std::string_view title);

}  // namespace eobkit
