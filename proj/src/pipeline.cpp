#include "eobkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <unordered_map>

#include "eobkit/embedding_store.hpp"
#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) fail(ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
  }
}

fs::path resolve_path(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

ModelEndpoint endpoint_from_json(const json& j, double default_temperature, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be an object");
  reject_unknown_keys(j, {"base_url", "model_name", "api_key_env", "timeout_s", "max_retries", "temperature",
                          "backoff_base_s"},
                      where);
  ModelEndpoint e;
  e.base_url = j.value("base_url", "");
  e.model_name = j.value("model_name", "");
  e.api_key_env = j.value("api_key_env", "");
  e.timeout_s = j.value("timeout_s", e.timeout_s);
  e.max_retries = j.value("max_retries", e.max_retries);
  e.temperature = j.value("temperature", default_temperature);
  e.backoff_base_s = j.value("backoff_base_s", e.backoff_base_s);
  return e;
}

ordered_json endpoint_identity(const ModelEndpoint& e) {
  return {{"model_name", e.model_name}, {"temperature", e.temperature}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::ConfigError, "config file " + path.string() + " not found");
  auto base = fs::absolute(path).parent_path();
  return from_json_text(read_text_file(path), base);
}

PipelineConfig PipelineConfig::from_json_text(std::string_view text, const fs::path& base_dir) {
  auto j = json::parse(text, nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::ConfigError, "config is not a JSON object");
  reject_unknown_keys(j, {"paths", "endpoints", "selector", "N", "m", "frames", "global_seed", "max_concurrency",
                          "candidate_floor_fraction", "lambda", "mc_trials", "skip_invalid"},
                      "config");
  PipelineConfig c;
  try {
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown_keys(p, {"work_dir", "input", "input_format", "media_root", "text_embeddings",
                              "visual_embeddings", "cache_dir", "annotations_out", "reports_dir"},
                          "paths");
      if (p.contains("work_dir")) c.paths.work_dir = resolve_path(base_dir, p["work_dir"].get<std::string>());
      c.paths.input = resolve_path(base_dir, p.value("input", ""));
      if (p.contains("input_format")) c.paths.input_format = parse_sample_format(p["input_format"].get<std::string>());
      c.paths.media_root = resolve_path(base_dir, p.value("media_root", ""));
      c.paths.text_embeddings = resolve_path(base_dir, p.value("text_embeddings", ""));
      c.paths.visual_embeddings = resolve_path(base_dir, p.value("visual_embeddings", ""));
      c.paths.cache_dir = resolve_path(base_dir, p.value("cache_dir", ""));
      c.paths.annotations_out = resolve_path(base_dir, p.value("annotations_out", ""));
      c.paths.reports_dir = resolve_path(base_dir, p.value("reports_dir", ""));
    } else {
      c.paths.work_dir = base_dir / "work";
    }
    if (j.contains("endpoints")) {
      const auto& e = j["endpoints"];
      reject_unknown_keys(e, {"captioner", "distractor", "evaluators"}, "endpoints");
      if (e.contains("captioner")) c.endpoints.captioner = endpoint_from_json(e["captioner"], 0.0, "endpoints.captioner");
      if (e.contains("distractor")) c.endpoints.distractor = endpoint_from_json(e["distractor"], 0.7, "endpoints.distractor");
      if (e.contains("evaluators")) {
        for (const auto& ev : e["evaluators"]) c.endpoints.evaluators.push_back(endpoint_from_json(ev, 0.0, "endpoints.evaluators"));
      }
    }
    if (j.contains("selector")) {
      const auto& s = j["selector"];
      reject_unknown_keys(s, {"strategy", "m", "seed", "kmeans_max_iters", "kmeans_tol", "include_original_negatives"},
                          "selector");
      if (s.contains("strategy")) c.selector.strategy = parse_strategy(s["strategy"].get<std::string>());
      if (s.contains("m")) c.selector.m = s["m"].get<std::size_t>();
      c.selector.seed = s.value("seed", c.selector.seed);
      c.selector.kmeans_max_iters = s.value("kmeans_max_iters", c.selector.kmeans_max_iters);
      c.selector.kmeans_tol = s.value("kmeans_tol", c.selector.kmeans_tol);
      c.selector.include_original_negatives = s.value("include_original_negatives", false);
    }
    if (j.contains("m")) {
      auto m = j["m"].get<std::size_t>();
      if (j.contains("selector") && j["selector"].contains("m") && c.selector.m != m) {
        fail(ErrorKind::ConfigError, "m and selector.m disagree");
      }
      c.selector.m = m;
    }
    c.n_candidates = j.value("N", c.n_candidates);
    c.frames = j.value("frames", c.frames);
    c.global_seed = j.value("global_seed", c.global_seed);
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.candidate_floor_fraction = j.value("candidate_floor_fraction", c.candidate_floor_fraction);
    c.lambda = j.value("lambda", c.lambda);
    c.mc_trials = j.value("mc_trials", c.mc_trials);
    c.skip_invalid = j.value("skip_invalid", false);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    fail(ErrorKind::ConfigError, e.what());
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  selector.validate();
  if (n_candidates < selector.m) fail(ErrorKind::ConfigError, "N must be >= m");
  if (frames < 1) fail(ErrorKind::ConfigError, "frames must be >= 1");
  if (max_concurrency < 1) fail(ErrorKind::ConfigError, "max_concurrency must be >= 1");
  if (!(candidate_floor_fraction > 0.0 && candidate_floor_fraction <= 1.0)) {
    fail(ErrorKind::ConfigError, "candidate_floor_fraction must lie in (0, 1]");
  }
}

std::string PipelineConfig::hash() const {
  ordered_json j;
  j["selector"] = {{"strategy", to_string(selector.strategy)},
                   {"m", selector.m},
                   {"seed", selector.seed},
                   {"kmeans_max_iters", selector.kmeans_max_iters},
                   {"kmeans_tol", selector.kmeans_tol},
                   {"include_original_negatives", selector.include_original_negatives}};
  j["N"] = n_candidates;
  j["frames"] = frames;
  j["global_seed"] = global_seed;
  j["candidate_floor_fraction"] = candidate_floor_fraction;
  j["lambda"] = lambda;
  j["mc_trials"] = mc_trials;
  j["captioner"] = endpoints.captioner ? endpoint_identity(*endpoints.captioner) : ordered_json();
  j["distractor"] = endpoints.distractor ? endpoint_identity(*endpoints.distractor) : ordered_json();
  j["evaluators"] = ordered_json::array();
  for (const auto& e : endpoints.evaluators) j["evaluators"].push_back(endpoint_identity(e));
  return sha256_hex(j.dump()).substr(0, 16);
}

StageArtifacts StageArtifacts::for_config(const PipelineConfig& config) {
  const auto& w = config.paths.work_dir;
  StageArtifacts a;
  a.samples = w / "samples.jsonl";
  a.captions = w / "captions.jsonl";
  a.candidates = w / "candidates.jsonl";
  a.selections = w / "selections.jsonl";
  a.annotations = config.paths.annotations_out.empty() ? w / "groundattack.jsonl" : config.paths.annotations_out;
  a.permutations = w / "permutations.jsonl";
  a.predictions_dir = w / "predictions";
  a.reports_dir = config.paths.reports_dir.empty() ? w / "reports" : config.paths.reports_dir;
  a.cache_dir = config.paths.cache_dir.empty() ? w / "cache" : config.paths.cache_dir;
  a.request_log = w / "logs" / "requests.jsonl";
  return a;
}

fs::path StageArtifacts::predictions(std::string_view set_name) const {
  return predictions_dir / (std::string(set_name) + ".jsonl");
}

std::string caption_to_json(const Caption& caption) {
  ordered_json j;
  j["sample_id"] = caption.sample_id;
  j["text"] = caption.text;
  j["media_kind"] = to_string(caption.media_kind);
  j["frame_count"] = caption.frame_count;
  return j.dump();
}

Caption caption_from_json(std::string_view line) {
  auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::ParseError, "malformed caption record");
  Caption c;
  try {
    c.sample_id = j.at("sample_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.media_kind = parse_media_kind(j.at("media_kind").get<std::string>());
    c.frame_count = j.value("frame_count", std::size_t{0});
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("caption record: ") + e.what());
  }
  if (trim(c.text).empty()) fail(ErrorKind::ParseError, "caption for '" + c.sample_id + "' is empty");
  return c;
}

std::string candidate_set_to_json(const CandidateSet& set) {
  ordered_json j;
  j["sample_id"] = set.sample_id;
  j["source"] = to_string(set.source);
  j["candidates"] = set.candidates;
  return j.dump();
}

CandidateSet candidate_set_from_json(std::string_view line) {
  auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::ParseError, "malformed candidate record");
  CandidateSet c;
  try {
    c.sample_id = j.at("sample_id").get<std::string>();
    c.source = parse_candidate_source(j.value("source", "distractor"));
    c.candidates = j.at("candidates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("candidate record: ") + e.what());
  }
  return c;
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(const fs::path& path, Parse parse) {
  std::vector<T> out;
  auto text = read_text_file(path);
  for (auto [row, line] : jsonl_lines(text)) {
    if (ArtifactMeta::parse_line(line)) continue;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (" + path.string() + " line " + std::to_string(row) + ")");
    }
  }
  return out;
}

template <typename T, typename Emit>
void write_jsonl(const fs::path& path, const ArtifactMeta& meta, const std::vector<T>& items, Emit emit) {
  std::string out = meta.to_json_line() + "\n";
  for (const auto& item : items) out += emit(item) + "\n";
  write_text_file_atomic(path, out);
}

[[noreturn]] void fail_with_failures(ErrorKind kind, const std::string& stage,
                                     const std::vector<std::pair<std::string, std::string>>& failures) {
  std::string msg = stage + ": " + std::to_string(failures.size()) + " sample(s) failed";
  for (std::size_t i = 0; i < failures.size() && i < 5; ++i) msg += "; " + failures[i].first + ": " + failures[i].second;
  fail(kind, msg);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, TransportFactory transports)
    : config_(std::move(config)), transports_(std::move(transports)), artifacts_(StageArtifacts::for_config(config_)) {
  config_.validate();
}

ArtifactMeta Pipeline::meta(const std::string& stage) const {
  ArtifactMeta m;
  m.stage = stage;
  m.config_hash = config_.hash();
  m.seed = config_.global_seed;
  return m;
}

void Pipeline::require(const fs::path& path, const std::string& producer) const {
  if (path.empty() || !fs::exists(path)) {
    fail(ErrorKind::MissingArtifact, "missing upstream artifact " + path.string() + " (run `" + producer + "` first)");
  }
}

ResponseCache& Pipeline::cache() {
  if (!cache_) cache_ = std::make_unique<ResponseCache>(artifacts_.cache_dir);
  return *cache_;
}

RequestLog& Pipeline::request_log() {
  if (!log_) log_ = std::make_unique<RequestLog>(artifacts_.request_log);
  return *log_;
}

SampleSet Pipeline::load_set(const std::string& set_name) const {
  if (set_name == "original") {
    require(artifacts_.samples, "ingest");
    return load_samples(artifacts_.samples, SampleFormat::canonical);
  }
  if (set_name == "groundattack") {
    require(artifacts_.annotations, "rebuild");
    return load_samples(artifacts_.annotations, SampleFormat::canonical);
  }
  fail(ErrorKind::UsageError, "unknown sample set '" + set_name + "' (expected original or groundattack)");
}

StageSummary Pipeline::ingest() {
  if (config_.paths.input.empty()) fail(ErrorKind::ConfigError, "no input annotation file configured (paths.input / --input)");
  if (!fs::exists(config_.paths.input)) fail(ErrorKind::IOError, "input " + config_.paths.input.string() + " not found");
  LoadOptions opts;
  opts.skip_invalid = config_.skip_invalid;
  auto set = load_samples(config_.paths.input, config_.paths.input_format, opts);
  auto m = meta("ingest");
  write_samples(set, artifacts_.samples, &m);
  return {"ingest", set.samples.size(), {artifacts_.samples}, 0};
}

StageSummary Pipeline::caption() {
  require(artifacts_.samples, "ingest");
  if (!config_.endpoints.captioner) fail(ErrorKind::ConfigError, "endpoints.captioner is not configured");
  auto set = load_samples(artifacts_.samples, SampleFormat::canonical);
  ChatClient client(*config_.endpoints.captioner, transports_("captioner"), &cache(), &request_log());
  const MediaOptions media{config_.paths.media_root, config_.frames};

  std::vector<std::optional<Caption>> out(set.samples.size());
  std::vector<std::pair<std::string, std::string>> failures;
  std::mutex failures_mutex;
  parallel_for(set.samples.size(), config_.max_concurrency, [&](std::size_t i) {
    try {
      out[i] = eobkit::caption(set.samples[i], client, media);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EndpointError && e.kind() != ErrorKind::EmptyResponse && e.kind() != ErrorKind::MediaError) throw;
      std::lock_guard lock(failures_mutex);
      failures.emplace_back(set.samples[i].id, std::string(e.kind_name()) + " " + e.what());
    }
  });
  if (!failures.empty()) fail_with_failures(ErrorKind::EndpointError, "caption", failures);
  std::vector<Caption> captions;
  for (auto& c : out) captions.push_back(std::move(*c));
  write_jsonl(artifacts_.captions, meta("caption"), captions, caption_to_json);
  return {"caption", captions.size(), {artifacts_.captions}, client.http_calls()};
}

StageSummary Pipeline::distract() {
  require(artifacts_.samples, "ingest");
  require(artifacts_.captions, "caption");
  if (!config_.endpoints.distractor) fail(ErrorKind::ConfigError, "endpoints.distractor is not configured");
  auto set = load_samples(artifacts_.samples, SampleFormat::canonical);
  std::unordered_map<std::string, Caption> captions;
  for (auto& c : read_jsonl<Caption>(artifacts_.captions, caption_from_json)) captions.emplace(c.sample_id, std::move(c));

  ChatClient client(*config_.endpoints.distractor, transports_("distractor"), &cache(), &request_log());
  const auto floor = static_cast<std::size_t>(std::ceil(config_.candidate_floor_fraction * static_cast<double>(config_.n_candidates)));
  std::vector<std::optional<CandidateSet>> out(set.samples.size());
  std::vector<std::pair<std::string, std::string>> failures;
  std::mutex failures_mutex;
  parallel_for(set.samples.size(), config_.max_concurrency, [&](std::size_t i) {
    const auto& s = set.samples[i];
    auto cap = captions.find(s.id);
    if (cap == captions.end()) {
      fail(ErrorKind::MissingArtifact, "no caption for sample '" + s.id + "' (rerun `caption`)");
    }
    try {
      CandidateRequest req{s.id, s.question, s.answer(), cap->second.text, config_.n_candidates, floor};
      auto cands = generate_candidates(req, client);
      if (config_.selector.include_original_negatives) {
        auto merged = cands.candidates;
        auto originals = s.negatives();
        merged.insert(merged.end(), originals.begin(), originals.end());
        cands.candidates = dedupe_candidates(merged, s.answer());
        cands.source = CandidateSource::merged;
      }
      out[i] = std::move(cands);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EndpointError && e.kind() != ErrorKind::EmptyResponse &&
          e.kind() != ErrorKind::InsufficientCandidates) {
        throw;
      }
      std::lock_guard lock(failures_mutex);
      failures.emplace_back(s.id, std::string(e.kind_name()) + " " + e.what());
    }
  });
  if (!failures.empty()) fail_with_failures(failures.front().second.rfind("Insufficient", 0) == 0
                                                ? ErrorKind::InsufficientCandidates
                                                : ErrorKind::EndpointError,
                                            "distract", failures);
  std::vector<CandidateSet> sets;
  for (auto& c : out) sets.push_back(std::move(*c));
  write_jsonl(artifacts_.candidates, meta("distract"), sets, candidate_set_to_json);
  return {"distract", sets.size(), {artifacts_.candidates}, client.http_calls()};
}

StageSummary Pipeline::select() {
  require(artifacts_.samples, "ingest");
  require(artifacts_.candidates, "distract");
  auto set = load_samples(artifacts_.samples, SampleFormat::canonical);
  auto cand_sets = read_jsonl<CandidateSet>(artifacts_.candidates, candidate_set_from_json);
  const bool needs_embeddings = config_.selector.strategy != SelectionStrategy::random;
  EmbeddingTable text_table;
  EmbeddingTable visual_table;
  if (needs_embeddings) {
    if (config_.paths.text_embeddings.empty() || config_.paths.visual_embeddings.empty()) {
      fail(ErrorKind::ConfigError, "selector strategy " + std::string(to_string(config_.selector.strategy)) +
                                       " needs paths.text_embeddings and paths.visual_embeddings");
    }
    text_table = EmbeddingTable::load(config_.paths.text_embeddings);
    visual_table = EmbeddingTable::load(config_.paths.visual_embeddings);
  }

  std::vector<Selection> selections(cand_sets.size());
  parallel_for(cand_sets.size(), config_.max_concurrency, [&](std::size_t i) {
    const auto& cs = cand_sets[i];
    const Sample* sample = set.find(cs.sample_id);
    if (!sample) fail(ErrorKind::UnknownSample, "candidates for unknown sample '" + cs.sample_id + "'");
    auto kept = dedupe_candidate_indices(cs.candidates, sample->answer());
    if (kept.size() != cs.candidates.size()) {
      fail(ErrorKind::InvariantViolation, "candidate set for '" + cs.sample_id +
                                              "' contains duplicates or the answer (rerun `distract`)");
    }
    SelectorConfig per_sample = config_.selector;
    per_sample.seed = derive_seed(config_.selector.seed, cs.sample_id);
    Matrix text;
    std::vector<float> visual;
    if (needs_embeddings) {
      text = Matrix(cs.candidates.size(), text_table.dim());
      for (std::size_t c = 0; c < cs.candidates.size(); ++c) {
        const auto& v = text_table.at(candidate_embedding_id(cs.sample_id, c));
        std::copy(v.begin(), v.end(), text.row(c).begin());
      }
      visual = visual_table.at(visual_embedding_id(cs.sample_id));
    }
    auto sel = eobkit::select(per_sample, cs.candidates, text, visual);
    sel.sample_id = cs.sample_id;
    selections[i] = std::move(sel);
  });

  std::string out = meta("select").to_json_line() + "\n";
  for (const auto& sel : selections) out += selection_to_json(sel, config_.selector) + "\n";
  write_text_file_atomic(artifacts_.selections, out);
  return {"select", selections.size(), {artifacts_.selections}, 0};
}

StageSummary Pipeline::rebuild() {
  require(artifacts_.samples, "ingest");
  require(artifacts_.selections, "select");
  auto set = load_samples(artifacts_.samples, SampleFormat::canonical);
  std::unordered_map<std::string, Selection> selections;
  for (auto& s : read_jsonl<Selection>(artifacts_.selections, selection_from_json)) selections.emplace(s.sample_id, std::move(s));

  SampleSet rebuilt;
  rebuilt.source_name = set.source_name + "-groundattack";
  std::string perms = meta("rebuild").to_json_line() + "\n";
  for (const auto& s : set.samples) {
    auto it = selections.find(s.id);
    if (it == selections.end()) fail(ErrorKind::MissingArtifact, "no selection for sample '" + s.id + "' (rerun `select`)");
    auto result = replace_negatives(s, it->second.chosen, config_.global_seed);
    ordered_json p;
    p["sample_id"] = s.id;
    p["shuffle_seed"] = result.shuffle_seed;
    p["permutation"] = result.permutation;
    perms += p.dump() + "\n";
    rebuilt.samples.push_back(std::move(result.sample));
  }
  auto m = meta("rebuild");
  write_samples(rebuilt, artifacts_.annotations, &m);
  write_text_file_atomic(artifacts_.permutations, perms);
  return {"rebuild", rebuilt.samples.size(), {artifacts_.annotations, artifacts_.permutations}, 0};
}

StageSummary Pipeline::evaluate(const std::string& set_name, const std::vector<InputMode>& modes) {
  auto set = load_set(set_name);
  if (config_.endpoints.evaluators.empty()) fail(ErrorKind::ConfigError, "no endpoints.evaluators configured");
  std::vector<PredictionRecord> records;
  std::vector<std::pair<std::string, std::string>> failures;
  std::size_t calls = 0;
  for (const auto& endpoint : config_.endpoints.evaluators) {
    for (auto mode : modes) {
      EvalConfig cfg;
      cfg.mode = mode;
      cfg.endpoint = endpoint;
      cfg.max_concurrency = config_.max_concurrency;
      cfg.frames = config_.frames;
      cfg.media_root = config_.paths.media_root;
      auto result = eobkit::evaluate(set, cfg, transports_("evaluator"), &cache(), &request_log());
      calls += result.http_calls;
      records.insert(records.end(), result.records.begin(), result.records.end());
      for (auto& f : result.failures) {
        failures.emplace_back(f.sample_id, endpoint.model_name + "/" + std::string(to_string(mode)) + " " + f.error_class + " " + f.message);
      }
    }
  }
  auto path = artifacts_.predictions(set_name);
  auto m = meta("evaluate");
  write_predictions(records, path, &m);
  if (!failures.empty()) fail_with_failures(ErrorKind::EndpointError, "evaluate", failures);
  return {"evaluate", records.size(), {path}, calls};
}

BiasReport Pipeline::audit(const std::string& set_name) {
  auto set = load_set(set_name);
  auto path = artifacts_.predictions(set_name);
  require(path, "evaluate --set " + set_name);
  auto records = read_predictions(path);
  std::vector<std::string> models;
  for (const auto& e : config_.endpoints.evaluators) models.push_back(e.model_name);
  if (models.empty()) {
    for (const auto& r : records) {
      if (r.mode == InputMode::VO && std::find(models.begin(), models.end(), r.model_id) == models.end()) models.push_back(r.model_id);
    }
  }
  AuditOptions opts;
  opts.lambda = config_.lambda;
  opts.mc_trials = config_.mc_trials;
  opts.mc_seed = config_.global_seed;
  auto report = eob_ratios(records, set, models, opts);
  report.source_name = set_name;
  auto m = meta("audit");
  write_text_file_atomic(artifacts_.reports_dir / ("bias_" + set_name + ".json"), bias_report_json(report, &m));
  write_text_file_atomic(artifacts_.reports_dir / ("bias_" + set_name + ".txt"), bias_report_table(report));
  return report;
}

StageSummary Pipeline::report(const std::string& set_name) {
  auto set = load_set(set_name);
  auto path = artifacts_.predictions(set_name);
  require(path, "evaluate --set " + set_name);
  auto records = read_predictions(path);
  std::map<std::pair<std::string, std::string>, std::vector<PredictionRecord>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : records) {
    auto key = std::make_pair(r.model_id, std::string(to_string(r.mode)));
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r);
  }
  ordered_json j;
  auto m = meta("report");
  j["meta"] = {{"stage", m.stage}, {"schema_version", m.schema_version}, {"config_hash", m.config_hash}, {"seed", m.seed}};
  j["set"] = set_name;
  j["tables"] = ordered_json::array();
  std::string text;
  for (const auto& key : order) {
    auto table = accuracy_report(groups[key], set);
    auto entry = ordered_json::parse(accuracy_table_json(table));
    entry["model_id"] = key.first;
    entry["mode"] = key.second;
    j["tables"].push_back(std::move(entry));
    text += accuracy_table_text(table, key.first + " (" + key.second + ", " + set_name + ")") + "\n";
  }
  auto json_path = artifacts_.reports_dir / ("accuracy_" + set_name + ".json");
  auto text_path = artifacts_.reports_dir / ("accuracy_" + set_name + ".txt");
  write_text_file_atomic(json_path, j.dump(2) + "\n");
  write_text_file_atomic(text_path, text);
  return {"report", order.size(), {json_path, text_path}, 0};
}

}  // namespace eobkit
