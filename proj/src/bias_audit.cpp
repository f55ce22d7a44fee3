#include "eobkit/bias_audit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

using nlohmann::ordered_json;

std::string_view to_string(InputMode mode) { return mode == InputMode::VO ? "VO" : "VQO"; }

InputMode parse_input_mode(std::string_view text) {
  if (text == "VO" || text == "vo") return InputMode::VO;
  if (text == "VQO" || text == "vqo") return InputMode::VQO;
  fail(ErrorKind::UsageError, "unknown input mode '" + std::string(text) + "'");
}

std::string prediction_to_json(const PredictionRecord& record) {
  ordered_json j;
  j["sample_id"] = record.sample_id;
  j["model_id"] = record.model_id;
  j["mode"] = to_string(record.mode);
  j["chosen_index"] = record.chosen_index;
  j["raw_text"] = record.raw_text;
  return j.dump();
}

PredictionRecord prediction_from_json(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::ParseError, "malformed prediction record");
  PredictionRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.mode = parse_input_mode(j.at("mode").get<std::string>());
    r.chosen_index = j.at("chosen_index").get<int>();
    r.raw_text = j.value("raw_text", "");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("prediction record: ") + e.what());
  }
  return r;
}

void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path,
                       const ArtifactMeta* meta) {
  std::string out;
  if (meta) out += meta->to_json_line() + "\n";
  for (const auto& r : records) out += prediction_to_json(r) + "\n";
  write_text_file_atomic(path, out);
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  auto text = read_text_file(path);
  std::vector<PredictionRecord> out;
  for (auto [row, line] : jsonl_lines(text)) {
    if (ArtifactMeta::parse_line(line)) continue;
    try {
      out.push_back(prediction_from_json(line));
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (" + path.string() + " line " + std::to_string(row) + ")");
    }
  }
  return out;
}

EobFlags flag_sample(std::span<const int> chosen_indices, std::size_t answer_index) {
  if (chosen_indices.empty()) fail(ErrorKind::MissingPredictions, "no VO predictions for sample");
  std::size_t correct = 0;
  for (int c : chosen_indices) {
    if (c >= 0 && static_cast<std::size_t>(c) == answer_index) ++correct;
  }
  return {correct > 0, correct == chosen_indices.size()};
}

double expected_eob(int options_count, int n_models, int lambda) {
  if (options_count < 2) fail(ErrorKind::DomainError, "options_count must be >= 2");
  if (n_models < 1) fail(ErrorKind::DomainError, "n_models must be >= 1");
  if (lambda < 0 || lambda > n_models) fail(ErrorKind::DomainError, "lambda must lie in [0, n_models]");
  const int exponent = n_models - (lambda - 1);
  if (exponent < 1) fail(ErrorKind::DomainError, "exponent |models| - (lambda - 1) must be >= 1");
  return 1.0 - std::pow(1.0 - 1.0 / options_count, exponent);
}

MonteCarloEstimate simulate_random_models(int options_count, int n_models, std::uint64_t trials, std::uint64_t seed,
                                          unsigned threads) {
  if (options_count < 2) fail(ErrorKind::DomainError, "options_count must be >= 2");
  if (n_models < 1) fail(ErrorKind::DomainError, "n_models must be >= 1");
  if (trials < 1) fail(ErrorKind::DomainError, "trials must be >= 1");

  constexpr std::uint64_t kShards = 64;
  const std::uint64_t shards = std::min(kShards, trials);
  std::vector<std::uint64_t> any_counts(shards, 0);
  std::vector<std::uint64_t> all_counts(shards, 0);
  auto run_shard = [&](std::size_t s) {
    std::uint64_t n = trials / shards + (s < trials % shards ? 1 : 0);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    std::uint64_t any = 0;
    std::uint64_t all = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      int correct = 0;
      // Option 0 plays the correct answer; uniform guessing makes the choice irrelevant.
      for (int m = 0; m < n_models; ++m) correct += rng.below(static_cast<std::uint64_t>(options_count)) == 0;
      any += correct > 0;
      all += correct == n_models;
    }
    any_counts[s] = any;
    all_counts[s] = all;
  };
  unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  parallel_for(shards, workers, run_shard);

  std::uint64_t any = 0;
  std::uint64_t all = 0;
  for (std::uint64_t s = 0; s < shards; ++s) {
    any += any_counts[s];
    all += all_counts[s];
  }
  MonteCarloEstimate est;
  est.trials = trials;
  est.eob_hat = static_cast<double>(any) / static_cast<double>(trials);
  est.total_hat = static_cast<double>(all) / static_cast<double>(trials);
  est.eob_stderr = std::sqrt(est.eob_hat * (1.0 - est.eob_hat) / static_cast<double>(trials));
  est.total_stderr = std::sqrt(est.total_hat * (1.0 - est.total_hat) / static_cast<double>(trials));
  return est;
}

BiasReport eob_ratios(std::span<const PredictionRecord> records, const SampleSet& samples,
                      const std::vector<std::string>& model_set, const AuditOptions& options) {
  if (model_set.empty()) fail(ErrorKind::MissingPredictions, "empty model set");
  if (samples.samples.empty()) fail(ErrorKind::EmptySetError, "no samples to audit");

  std::unordered_map<std::string, std::size_t> model_slot;
  for (std::size_t i = 0; i < model_set.size(); ++i) {
    if (!model_slot.emplace(model_set[i], i).second) fail(ErrorKind::ConfigError, "duplicate model '" + model_set[i] + "'");
  }
  std::unordered_map<std::string, std::size_t> sample_slot;
  for (std::size_t i = 0; i < samples.samples.size(); ++i) sample_slot.emplace(samples.samples[i].id, i);

  constexpr int kMissing = -2;
  std::vector<std::vector<int>> choice(samples.samples.size(), std::vector<int>(model_set.size(), kMissing));
  for (const auto& r : records) {
    if (r.mode != InputMode::VO) continue;
    auto m = model_slot.find(r.model_id);
    if (m == model_slot.end()) continue;
    auto s = sample_slot.find(r.sample_id);
    if (s == sample_slot.end()) fail(ErrorKind::UnknownSample, "prediction for unknown sample '" + r.sample_id + "'");
    const auto& sample = samples.samples[s->second];
    if (r.chosen_index != kAbstain &&
        (r.chosen_index < 0 || static_cast<std::size_t>(r.chosen_index) >= sample.options.size())) {
      fail(ErrorKind::InvariantViolation, "prediction for '" + r.sample_id + "' chooses option " +
                                              std::to_string(r.chosen_index) + " of " + std::to_string(sample.options.size()));
    }
    int& slot = choice[s->second][m->second];
    if (slot != kMissing && slot != r.chosen_index) {
      fail(ErrorKind::InvariantViolation, "conflicting VO predictions for ('" + r.sample_id + "', '" + r.model_id + "')");
    }
    slot = r.chosen_index;
  }

  std::vector<std::string> missing;
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    for (std::size_t m = 0; m < model_set.size(); ++m) {
      if (choice[s][m] == kMissing) missing.push_back(samples.samples[s].id + "/" + model_set[m]);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    fail(ErrorKind::MissingPredictions, std::to_string(missing.size()) + " missing VO prediction(s): " + list);
  }

  BiasReport report;
  report.source_name = samples.source_name;
  report.n_samples = samples.samples.size();
  report.model_set = model_set;
  report.lambda = options.lambda;
  report.mc_trials = options.mc_trials;
  std::vector<std::size_t> correct_per_model(model_set.size(), 0);
  std::size_t any = 0;
  std::size_t total = 0;
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    const auto& sample = samples.samples[s];
    ++report.options_count_histogram[sample.options.size()];
    auto flags = flag_sample(choice[s], sample.answer_index);
    if (flags.any) {
      ++any;
      report.eob_sample_ids.push_back(sample.id);
    }
    if (flags.total) {
      ++total;
      report.total_eob_sample_ids.push_back(sample.id);
    }
    for (std::size_t m = 0; m < model_set.size(); ++m) {
      correct_per_model[m] += choice[s][m] >= 0 && static_cast<std::size_t>(choice[s][m]) == sample.answer_index;
    }
  }
  const double n = static_cast<double>(report.n_samples);
  report.eob_ratio = static_cast<double>(any) / n;
  report.total_eob_ratio = static_cast<double>(total) / n;
  for (std::size_t m = 0; m < model_set.size(); ++m) {
    report.per_model_vo_accuracy[model_set[m]] = static_cast<double>(correct_per_model[m]) / n;
  }

  const int n_models = static_cast<int>(model_set.size());
  double var = 0.0;
  for (auto [count, members] : report.options_count_histogram) {
    const double w = static_cast<double>(members) / n;
    report.expected_eob += w * expected_eob(static_cast<int>(count), n_models, options.lambda);
    if (options.mc_trials > 0) {
      auto est = simulate_random_models(static_cast<int>(count), n_models, options.mc_trials,
                                        derive_seed(options.mc_seed, static_cast<std::uint64_t>(count)));
      report.expected_total_eob_mc += w * est.total_hat;
      var += w * w * est.total_stderr * est.total_stderr;
    }
  }
  report.expected_total_eob_mc_stderr = std::sqrt(var);
  return report;
}

std::string bias_report_json(const BiasReport& report, const ArtifactMeta* meta) {
  ordered_json j;
  if (meta) {
    j["meta"] = {{"stage", meta->stage}, {"schema_version", meta->schema_version},
                 {"config_hash", meta->config_hash}, {"seed", meta->seed}};
  }
  j["source_name"] = report.source_name;
  j["n_samples"] = report.n_samples;
  j["model_set"] = report.model_set;
  j["eob_ratio"] = report.eob_ratio;
  j["total_eob_ratio"] = report.total_eob_ratio;
  j["per_model_vo_accuracy"] = report.per_model_vo_accuracy;
  j["expected_eob"] = report.expected_eob;
  j["lambda"] = report.lambda;
  j["expected_total_eob_mc"] = report.expected_total_eob_mc;
  j["expected_total_eob_mc_stderr"] = report.expected_total_eob_mc_stderr;
  j["mc_trials"] = report.mc_trials;
  ordered_json hist = ordered_json::object();
  for (auto [count, members] : report.options_count_histogram) hist[std::to_string(count)] = members;
  j["options_count_histogram"] = std::move(hist);
  j["eob_sample_ids"] = report.eob_sample_ids;
  j["total_eob_sample_ids"] = report.total_eob_sample_ids;
  return j.dump(2) + "\n";
}

std::string bias_report_table(const BiasReport& report) {
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << "%";
    return s.str();
  };
  const std::string header = "Percentage of Biased Samples";
  const std::string column = report.source_name.empty() ? "corpus" : report.source_name;
  const std::size_t w0 = header.size() + 2;
  const std::size_t w1 = std::max<std::size_t>(column.size(), 8) + 2;
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w0)) << header << std::right << std::setw(static_cast<int>(w1)) << column << "\n";
  out << std::string(w0 + w1, '-') << "\n";
  out << std::left << std::setw(static_cast<int>(w0)) << "EOB" << std::right << std::setw(static_cast<int>(w1))
      << pct(report.eob_ratio) << "\n";
  out << std::left << std::setw(static_cast<int>(w0)) << "Total EOB" << std::right << std::setw(static_cast<int>(w1))
      << pct(report.total_eob_ratio) << "\n";
  out << "\nsamples: " << report.n_samples << "\nmodels (" << report.model_set.size() << "):";
  for (const auto& m : report.model_set) out << " " << m;
  out << "\nrandom-model expectation: EOB " << pct(report.expected_eob) << " (lambda=" << report.lambda << ")";
  if (report.mc_trials > 0) {
    out << ", Total EOB " << std::setprecision(4) << std::fixed << 100.0 * report.expected_total_eob_mc << "% +/- "
        << 100.0 * report.expected_total_eob_mc_stderr << "% (MC, " << report.mc_trials << " trials)";
  }
  out << "\n";
  for (const auto& [model, acc] : report.per_model_vo_accuracy) out << "VO accuracy " << model << ": " << pct(acc) << "\n";
  return out.str();
}

}  // namespace eobkit
