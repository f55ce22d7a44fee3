#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eobkit/annotations.hpp"

namespace eobkit {

/// VO: vision + options only. VQO: vision + question + options.
enum class InputMode { VO, VQO };

std::string_view to_string(InputMode mode);
InputMode parse_input_mode(std::string_view text);

inline constexpr int kAbstain = -1;

struct PredictionRecord {
  std::string sample_id;
  std::string model_id;
  InputMode mode = InputMode::VQO;
  /// Index into the sample's options, or kAbstain.
  int chosen_index = kAbstain;
  std::string raw_text;

  bool operator==(const PredictionRecord&) const = default;
};

std::string prediction_to_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(std::string_view line);
void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path,
                       const ArtifactMeta* meta = nullptr);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct EobFlags {
  bool any = false;    // at least one model answered correctly without the question
  bool total = false;  // every model did
};

/// One VO choice per model; abstentions count as wrong.
EobFlags flag_sample(std::span<const int> chosen_indices, std::size_t answer_index);

/// 1 - (1 - 1/|O|)^(|models| - (lambda - 1)).
double expected_eob(int options_count, int n_models, int lambda = 1);

struct MonteCarloEstimate {
  std::uint64_t trials = 0;
  double eob_hat = 0.0;
  double total_hat = 0.0;
  double eob_stderr = 0.0;
  double total_stderr = 0.0;
};

/// Independent uniform guessers. Trials are split into a fixed number of
/// shards seeded from (seed, shard), so the estimate does not depend on
/// `threads` (0 picks the hardware concurrency).
MonteCarloEstimate simulate_random_models(int options_count, int n_models, std::uint64_t trials, std::uint64_t seed,
                                          unsigned threads = 0);

struct AuditOptions {
  int lambda = 1;
  std::uint64_t mc_trials = 100000;
  std::uint64_t mc_seed = 0;
};

struct BiasReport {
  std::string source_name;
  std::size_t n_samples = 0;
  double eob_ratio = 0.0;
  double total_eob_ratio = 0.0;
  std::map<std::string, double> per_model_vo_accuracy;
  /// Closed-form random-guess expectation, weighted over option-count strata.
  double expected_eob = 0.0;
  int lambda = 1;
  double expected_total_eob_mc = 0.0;
  double expected_total_eob_mc_stderr = 0.0;
  std::uint64_t mc_trials = 0;
  std::vector<std::string> model_set;
  std::map<std::size_t, std::size_t> options_count_histogram;
  std::vector<std::string> eob_sample_ids;
  std::vector<std::string> total_eob_sample_ids;
};

/// Folds VO predictions into corpus-level ratios. VQO records and models
/// outside model_set are ignored; every (sample, model) pair must be present.
BiasReport eob_ratios(std::span<const PredictionRecord> records, const SampleSet& samples,
                      const std::vector<std::string>& model_set, const AuditOptions& options = {});

std::string bias_report_json(const BiasReport& report, const ArtifactMeta* meta = nullptr);
/// Aligned text table with the EOB and Total EOB rows.
std::string bias_report_table(const BiasReport& report);

}  // namespace eobkit
