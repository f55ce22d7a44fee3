#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eobkit/agents.hpp"
#include "eobkit/annotations.hpp"
#include "eobkit/bias_audit.hpp"
#include "eobkit/eval_harness.hpp"
#include "eobkit/selector.hpp"

namespace eobkit {

struct PipelinePaths {
  std::filesystem::path work_dir = "work";
  std::filesystem::path input;
  SampleFormat input_format = SampleFormat::canonical;
  std::filesystem::path media_root;
  std::filesystem::path text_embeddings;
  std::filesystem::path visual_embeddings;
  /// Empty means <work_dir>/cache, <work_dir>/groundattack.jsonl, <work_dir>/reports.
  std::filesystem::path cache_dir;
  std::filesystem::path annotations_out;
  std::filesystem::path reports_dir;
};

struct PipelineEndpoints {
  std::optional<ModelEndpoint> captioner;
  std::optional<ModelEndpoint> distractor;
  std::vector<ModelEndpoint> evaluators;
};

struct PipelineConfig {
  PipelinePaths paths;
  PipelineEndpoints endpoints;
  SelectorConfig selector;
  std::size_t n_candidates = 128;
  std::size_t frames = 8;
  std::uint64_t global_seed = 0;
  std::size_t max_concurrency = 8;
  double candidate_floor_fraction = 0.5;
  int lambda = 1;
  std::uint64_t mc_trials = 100000;
  bool skip_invalid = false;

  /// Reads the JSON config; relative paths resolve against the file's directory.
  static PipelineConfig from_json_file(const std::filesystem::path& path);
  static PipelineConfig from_json_text(std::string_view text, const std::filesystem::path& base_dir);

  void validate() const;
  /// Digest over the settings that shape artifact contents (not paths or URLs).
  std::string hash() const;
};

/// Where each stage reads and writes inside the work directory.
struct StageArtifacts {
  std::filesystem::path samples;
  std::filesystem::path captions;
  std::filesystem::path candidates;
  std::filesystem::path selections;
  std::filesystem::path annotations;
  std::filesystem::path permutations;
  std::filesystem::path predictions_dir;
  std::filesystem::path reports_dir;
  std::filesystem::path cache_dir;
  std::filesystem::path request_log;

  static StageArtifacts for_config(const PipelineConfig& config);
  std::filesystem::path predictions(std::string_view set_name) const;
};

/// Produces the transport used for a role ("captioner", "distractor", "evaluator").
using TransportFactory = std::function<Transport(const std::string& role)>;

struct StageSummary {
  std::string stage;
  std::size_t items = 0;
  std::vector<std::filesystem::path> outputs;
  std::size_t http_calls = 0;
};

/// The staged pipeline. Each stage reads its upstream artifacts from disk,
/// fails with MissingArtifact when one is absent, and writes its own.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, TransportFactory transports);

  const PipelineConfig& config() const { return config_; }
  const StageArtifacts& artifacts() const { return artifacts_; }

  StageSummary ingest();
  StageSummary caption();
  StageSummary distract();
  StageSummary select();
  StageSummary rebuild();
  /// set_name is "original" (ingested samples) or "groundattack" (rebuilt annotations).
  StageSummary evaluate(const std::string& set_name, const std::vector<InputMode>& modes);
  BiasReport audit(const std::string& set_name);
  StageSummary report(const std::string& set_name);

  SampleSet load_set(const std::string& set_name) const;

 private:
  ArtifactMeta meta(const std::string& stage) const;
  void require(const std::filesystem::path& path, const std::string& producer) const;
  ResponseCache& cache();
  RequestLog& request_log();

  PipelineConfig config_;
  TransportFactory transports_;
  StageArtifacts artifacts_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<RequestLog> log_;
};

std::string caption_to_json(const Caption& caption);
Caption caption_from_json(std::string_view line);
std::string candidate_set_to_json(const CandidateSet& set);
CandidateSet candidate_set_from_json(std::string_view line);

}  // namespace eobkit
