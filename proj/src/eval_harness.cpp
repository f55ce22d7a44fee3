#include "eobkit/eval_harness.hpp"

#include <cctype>
#include <iomanip>
#include <mutex>
#include <regex>
#include <sstream>
#include <unordered_map>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

namespace {

void check_labels(const Sample& sample, std::string_view labels) {
  if (sample.options.size() > labels.size()) {
    fail(ErrorKind::InvariantViolation, "sample '" + sample.id + "' has " + std::to_string(sample.options.size()) +
                                            " options but only " + std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

std::string format_options(std::span<const std::string> options, std::string_view labels) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) out += '\n';
    out += '(';
    out += labels.at(i);
    out += ") ";
    out += options[i];
  }
  return out;
}

std::string query_text(const Sample& sample, InputMode mode, std::string_view labels) {
  check_labels(sample, labels);
  const auto opts = format_options(sample.options, labels);
  if (mode == InputMode::VQO) {
    return fill_template(prompt_template("eval_vqo"), {{"Question", sample.question}, {"Options", opts}});
  }
  return fill_template(prompt_template("eval_vo"), {{"Options", opts}});
}

Query build_query(const Sample& sample, InputMode mode, const MediaOptions& media, std::string_view labels) {
  return {query_text(sample, mode, labels), media_files(sample.visual, media)};
}

int extract_choice(std::string_view model_text, std::span<const std::string> options, std::string_view labels) {
  const std::string text = trim(model_text);
  const std::size_t n = std::min(options.size(), labels.size());
  auto letter_index = [&](char c) -> int {
    auto at = labels.substr(0, n).find(c);
    return at == std::string_view::npos ? kAbstain : static_cast<int>(at);
  };

  // Pass 1: an option letter standing on its own.
  static const std::regex bare_re(R"(^\(?([A-Z])\)?[.:)]?$)");
  static const std::regex leading_re(R"(^\(?([A-Z])[.:)](\s|$))");
  static const std::regex paren_re(R"(\(([A-Z])\))");
  static const std::regex answer_re(R"((?:[Aa]nswer|[Oo]ption|[Cc]hoice)\s*(?:is)?\s*:?\s*\(?([A-Z])\b)");
  std::smatch m;
  for (const auto* re : {&bare_re, &leading_re, &paren_re, &answer_re}) {
    if (std::regex_search(text, m, *re)) {
      char c = m[1].str()[0];
      if (int idx = letter_index(c); idx != kAbstain) return idx;
    }
  }

  // Pass 2: exactly one option's text appears in the reply.
  const auto reply = normalize_option(text);
  int found = kAbstain;
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = normalize_option(options[i]);
    if (key.empty() || reply.find(key) == std::string::npos) continue;
    if (found != kAbstain) return kAbstain;
    found = static_cast<int>(i);
  }
  return found;
}

EvalResult evaluate(const SampleSet& set, const EvalConfig& config, Transport transport, ResponseCache* cache,
                    RequestLog* log) {
  if (config.option_labels.empty()) fail(ErrorKind::ConfigError, "no option labels");
  for (const auto& s : set.samples) check_labels(s, config.option_labels);

  ChatClient client(config.endpoint, std::move(transport), cache, log);
  const MediaOptions media{config.media_root, config.frames};
  std::vector<std::optional<PredictionRecord>> slots(set.samples.size());
  std::vector<std::optional<EvalFailure>> failures(set.samples.size());

  parallel_for(set.samples.size(), config.max_concurrency, [&](std::size_t i) {
    const auto& sample = set.samples[i];
    try {
      auto query = build_query(sample, config.mode, media, config.option_labels);
      ChatMessage msg{"user", query.text, {}};
      for (const auto& f : query.attachments) msg.image_urls.push_back(file_data_url(f));
      auto reply = client.complete({msg});
      PredictionRecord rec;
      rec.sample_id = sample.id;
      rec.model_id = config.endpoint.model_name;
      rec.mode = config.mode;
      rec.chosen_index = extract_choice(reply, sample.options, config.option_labels);
      rec.raw_text = reply;
      slots[i] = std::move(rec);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EndpointError && e.kind() != ErrorKind::EmptyResponse &&
          e.kind() != ErrorKind::MediaError) {
        throw;
      }
      failures[i] = EvalFailure{sample.id, std::string(e.kind_name()), e.what()};
    }
  });

  EvalResult result;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) result.records.push_back(std::move(*slots[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  result.http_calls = client.http_calls();
  return result;
}

AccuracyTable accuracy_report(std::span<const PredictionRecord> records, const SampleSet& set) {
  if (records.empty()) fail(ErrorKind::EmptyReport, "no prediction records");
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : set.samples) by_id.emplace(s.id, &s);
  AccuracyTable table;
  for (const auto& r : records) {
    auto it = by_id.find(r.sample_id);
    if (it == by_id.end()) fail(ErrorKind::UnknownSample, "record for unknown sample '" + r.sample_id + "'");
    const Sample& s = *it->second;
    const bool correct = r.chosen_index >= 0 && static_cast<std::size_t>(r.chosen_index) == s.answer_index;
    auto& cat = table.per_category[s.category];
    ++cat.n;
    ++table.overall.n;
    cat.n_correct += correct;
    table.overall.n_correct += correct;
  }
  double sum = 0.0;
  for (auto& [name, cat] : table.per_category) {
    cat.accuracy = static_cast<double>(cat.n_correct) / static_cast<double>(cat.n);
    sum += cat.accuracy;
  }
  table.overall.accuracy = static_cast<double>(table.overall.n_correct) / static_cast<double>(table.overall.n);
  table.category_mean = sum / static_cast<double>(table.per_category.size());
  return table;
}

std::string accuracy_table_json(const AccuracyTable& table) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [name, c] : table.per_category) {
    cats[name] = {{"n", c.n}, {"n_correct", c.n_correct}, {"accuracy", c.accuracy}};
  }
  j["per_category"] = std::move(cats);
  j["overall"] = {{"n", table.overall.n}, {"n_correct", table.overall.n_correct}, {"accuracy", table.overall.accuracy}};
  j["category_mean"] = table.category_mean;
  return j.dump();
}

std::string accuracy_table_text(const AccuracyTable& table, std::string_view title) {
  std::ostringstream out;
  out << title << "\n";
  std::size_t width = 8;
  for (const auto& [name, c] : table.per_category) width = std::max(width, name.size() + 2);
  auto row = [&](const std::string& name, const CategoryAccuracy& c) {
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(8) << std::fixed
        << std::setprecision(2) << 100.0 * c.accuracy << "  (" << c.n_correct << "/" << c.n << ")\n";
  };
  for (const auto& [name, c] : table.per_category) row(name, c);
  row("Mean", table.overall);
  out << std::left << std::setw(static_cast<int>(width)) << "CatMean" << std::right << std::setw(8) << std::fixed
      << std::setprecision(2) << 100.0 * table.category_mean << "\n";
  return out.str();
}

}  // namespace eobkit
