#include "eobkit/annotations.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "eobkit/error.hpp"
#include "json.hpp"

namespace eobkit {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(MediaKind kind) { return kind == MediaKind::image ? "image" : "video"; }

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::original ? "original" : "groundattack";
}

std::string_view to_string(SampleFormat format) {
  switch (format) {
    case SampleFormat::canonical: return "canonical";
    case SampleFormat::nextqa: return "nextqa";
    case SampleFormat::mmstar: return "mmstar";
  }
  return "canonical";
}

MediaKind parse_media_kind(std::string_view text) {
  if (text == "image") return MediaKind::image;
  if (text == "video") return MediaKind::video;
  fail(ErrorKind::ParseError, "unknown media kind '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
  if (text == "original") return Provenance::original;
  if (text == "groundattack") return Provenance::groundattack;
  fail(ErrorKind::ParseError, "unknown provenance '" + std::string(text) + "'");
}

SampleFormat parse_sample_format(std::string_view text) {
  if (text == "canonical") return SampleFormat::canonical;
  if (text == "nextqa") return SampleFormat::nextqa;
  if (text == "mmstar") return SampleFormat::mmstar;
  fail(ErrorKind::UsageError, "unknown sample format '" + std::string(text) + "'");
}

std::vector<std::string> Sample::negatives() const {
  std::vector<std::string> out;
  out.reserve(options.size());
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i != answer_index) out.push_back(options[i]);
  }
  return out;
}

const Sample* SampleSet::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

void validate(const Sample& sample) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::InvariantViolation, "sample '" + sample.id + "': " + what);
  };
  if (sample.id.empty()) bad("empty id");
  if (trim(sample.question).empty()) bad("empty question");
  if (sample.options.size() < 2) bad("fewer than 2 options");
  if (sample.options.size() > kMaxOptions) bad("more than 26 options");
  if (sample.answer_index >= sample.options.size()) {
    bad("answer_index " + std::to_string(sample.answer_index) + " out of range");
  }
  if (sample.visual.kind == MediaKind::image && sample.visual.frame_count_hint &&
      *sample.visual.frame_count_hint != 1) {
    bad("image with frame_count_hint != 1");
  }
  std::set<std::string> seen;
  for (const auto& opt : sample.options) {
    auto key = normalize_option(opt);
    if (key.empty()) bad("empty option");
    if (!seen.insert(key).second) bad("duplicate option '" + opt + "'");
  }
}

void validate(const SampleSet& set) {
  if (set.samples.empty()) fail(ErrorKind::EmptySetError, "sample set '" + set.source_name + "' is empty");
  std::unordered_set<std::string> ids;
  for (const auto& s : set.samples) {
    validate(s);
    if (!ids.insert(s.id).second) fail(ErrorKind::InvariantViolation, "duplicate sample id '" + s.id + "'");
  }
}

namespace {

std::string join_media(const std::string& root, const std::string& name) {
  if (root.empty()) return name;
  return (std::filesystem::path(root) / name).generic_string();
}

// Shared row collector: enforces invariants per row and, when lenient,
// counts what it had to drop.
class RowCollector {
 public:
  RowCollector(SampleSet& set, const LoadOptions& options) : set_(set), options_(options) {}

  void add(Sample sample, std::size_t row) {
    try {
      validate(sample);
      if (!ids_.insert(sample.id).second) {
        fail(ErrorKind::InvariantViolation, "duplicate sample id '" + sample.id + "'");
      }
    } catch (const Error& e) {
      if (!options_.skip_invalid) {
        throw Error(e.kind(), std::string(e.what()) + " (row " + std::to_string(row) + ")");
      }
      ++set_.dropped_rows;
      return;
    }
    set_.samples.push_back(std::move(sample));
  }

  void finish() {
    if (set_.dropped_rows > 0) {
      std::cerr << "warning: dropped " << set_.dropped_rows << " invalid row(s) from '"
                << set_.source_name << "'\n";
    }
    if (set_.samples.empty()) {
      fail(ErrorKind::EmptySetError, "no samples loaded from '" + set_.source_name + "'");
    }
  }

 private:
  SampleSet& set_;
  const LoadOptions& options_;
  std::unordered_set<std::string> ids_;
};

[[noreturn]] void parse_error(std::size_t row, const std::string& what) {
  fail(ErrorKind::ParseError, "row " + std::to_string(row) + ": " + what);
}

std::size_t resolve_answer_string(const std::vector<std::string>& options, const std::string& answer,
                                  const std::string& id) {
  const auto key = normalize_option(answer);
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (normalize_option(options[i]) == key) return i;
  }
  fail(ErrorKind::InvariantViolation, "sample '" + id + "': answer '" + answer + "' not among options");
}

Sample sample_from_canonical(const json& j, std::size_t row) {
  if (!j.is_object()) parse_error(row, "expected a JSON object");
  Sample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.visual.kind = parse_media_kind(j.value("kind", std::string("image")));
    s.visual.uri = j.value("uri", std::string());
    if (j.contains("frame_count_hint") && !j["frame_count_hint"].is_null()) {
      s.visual.frame_count_hint = j["frame_count_hint"].get<int>();
    }
    s.question = j.at("question").get<std::string>();
    s.options = j.at("options").get<std::vector<std::string>>();
    s.category = j.value("category", std::string());
    s.provenance = parse_provenance(j.value("provenance", std::string("original")));
  } catch (const json::exception& e) {
    parse_error(row, e.what());
  }
  if (j.contains("answer_index") && !j["answer_index"].is_null()) {
    const auto& a = j["answer_index"];
    if (!a.is_number_integer()) parse_error(row, "answer_index must be an integer");
    auto idx = a.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= s.options.size()) {
      fail(ErrorKind::InvariantViolation, "sample '" + s.id + "': answer_index " + std::to_string(idx) +
                                              " out of range (row " + std::to_string(row) + ")");
    }
    s.answer_index = static_cast<std::size_t>(idx);
  } else if (j.contains("answer") && j["answer"].is_string()) {
    s.answer_index = resolve_answer_string(s.options, j["answer"].get<std::string>(), s.id);
  } else {
    parse_error(row, "missing answer_index");
  }
  return s;
}

// RFC 4180 fields for a single record; quoted fields may not span lines here.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t row) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) parse_error(row, "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

std::string nextqa_category(std::string_view type_code) {
  auto code = trim(type_code);
  if (!code.empty()) {
    switch (code[0]) {
      case 'C': return "causal";
      case 'T': return "temporal";
      case 'D': return "descriptive";
      default: break;
    }
  }
  fail(ErrorKind::ParseError, "unknown NExT-QA question type '" + code + "'");
}

std::string mmstar_category(std::string_view name) {
  static const std::unordered_map<std::string, std::string> table = {
      {"coarse perception", "CP"},   {"fine-grained perception", "FP"}, {"instance reasoning", "IR"},
      {"logical reasoning", "LR"},   {"science & technology", "ST"},    {"science and technology", "ST"},
      {"math", "MA"},                {"mathematics", "MA"},             {"cp", "CP"},
      {"fp", "FP"},                  {"ir", "IR"},                      {"lr", "LR"},
      {"st", "ST"},                  {"ma", "MA"}};
  auto it = table.find(normalize_option(name));
  if (it == table.end()) fail(ErrorKind::ParseError, "unknown MMStar category '" + std::string(name) + "'");
  return it->second;
}

SampleSet parse_canonical(std::string_view text, std::string source_name, const LoadOptions& options) {
  SampleSet set;
  set.source_name = std::move(source_name);
  RowCollector rows(set, options);
  for (auto [row, line] : jsonl_lines(text)) {
    ArtifactMeta meta;
    if (ArtifactMeta::parse_line(line, &meta)) {
      if (!meta.schema_version.empty()) set.schema_version = meta.schema_version;
      continue;
    }
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) parse_error(row, "malformed JSON");
    if (j.contains("schema_version") && j["schema_version"].is_string()) {
      set.schema_version = j["schema_version"].get<std::string>();
    }
    Sample s;
    try {
      s = sample_from_canonical(j, row);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvariantViolation || !options.skip_invalid) throw;
      ++set.dropped_rows;
      continue;
    }
    rows.add(std::move(s), row);
  }
  rows.finish();
  return set;
}

SampleSet parse_nextqa_csv(std::string_view text, std::string source_name, const LoadOptions& options) {
  SampleSet set;
  set.source_name = std::move(source_name);
  auto lines = jsonl_lines(text);
  if (lines.empty()) fail(ErrorKind::ParseError, "empty NExT-QA file");
  auto header = split_csv_line(lines.front().second, lines.front().first);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* required : {"video", "question", "answer", "qid", "type", "a0", "a1"}) {
    if (!col.count(required)) parse_error(1, std::string("missing column '") + required + "'");
  }
  std::vector<std::size_t> option_cols;
  for (int k = 0; col.count("a" + std::to_string(k)); ++k) option_cols.push_back(col["a" + std::to_string(k)]);

  RowCollector rows(set, options);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto [row, line] = lines[li];
    auto f = split_csv_line(line, row);
    if (f.size() != header.size()) {
      parse_error(row, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    Sample s;
    s.id = trim(f[col["video"]]) + "_" + trim(f[col["qid"]]);
    s.visual.kind = MediaKind::video;
    s.visual.uri = join_media(options.media_root, trim(f[col["video"]]));
    if (col.count("frame_count")) {
      try {
        s.visual.frame_count_hint = std::stoi(f[col["frame_count"]]);
      } catch (const std::exception&) {
        parse_error(row, "bad frame_count");
      }
    }
    s.question = trim(f[col["question"]]);
    for (auto c : option_cols) s.options.push_back(trim(f[c]));
    s.category = nextqa_category(f[col["type"]]);
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(trim(f[col["answer"]]), &used);
    } catch (const std::exception&) {
      parse_error(row, "answer must be an option index");
    }
    s.answer_index = idx;
    rows.add(std::move(s), row);
  }
  rows.finish();
  return set;
}

namespace {

// MMStar embeds its options in the question: "...\nOptions: A: x, B: y, C: z".
void split_mmstar_question(const std::string& raw, std::size_t row, std::string& stem,
                           std::vector<std::string>& options) {
  auto at = raw.rfind("Options:");
  if (at == std::string::npos) parse_error(row, "question has no 'Options:' block");
  stem = trim(std::string_view(raw).substr(0, at));
  std::string_view rest = std::string_view(raw).substr(at + 8);
  auto first = rest.find("A:");
  if (first == std::string_view::npos) parse_error(row, "options block has no 'A:'");
  rest.remove_prefix(first + 2);
  for (char next = 'B';; ++next) {
    std::string marker = std::string(", ") + next + ":";
    auto cut = rest.find(marker);
    if (cut == std::string_view::npos || next > 'Z') {
      options.push_back(trim(rest));
      break;
    }
    options.push_back(trim(rest.substr(0, cut)));
    rest.remove_prefix(cut + marker.size());
  }
}

}  // namespace

SampleSet parse_mmstar(std::string_view text, std::string source_name, const LoadOptions& options) {
  SampleSet set;
  set.source_name = std::move(source_name);
  std::vector<std::pair<std::size_t, json>> records;
  auto trimmed = trim(text);
  if (!trimmed.empty() && trimmed.front() == '[') {
    auto arr = json::parse(trimmed, nullptr, false);
    if (arr.is_discarded() || !arr.is_array()) parse_error(1, "malformed JSON array");
    for (std::size_t i = 0; i < arr.size(); ++i) records.emplace_back(i + 1, arr[i]);
  } else {
    for (auto [row, line] : jsonl_lines(text)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) parse_error(row, "malformed JSON");
      records.emplace_back(row, std::move(j));
    }
  }
  RowCollector rows(set, options);
  for (auto& [row, j] : records) {
    Sample s;
    std::string letter;
    try {
      const auto& index = j.at("index");
      s.id = index.is_string() ? index.get<std::string>() : std::to_string(index.get<long long>());
      split_mmstar_question(j.at("question").get<std::string>(), row, s.question, s.options);
      letter = trim(j.at("answer").get<std::string>());
      s.category = mmstar_category(j.at("category").get<std::string>());
      s.visual.kind = MediaKind::image;
      s.visual.uri = join_media(options.media_root, j.value("image", s.id + ".jpg"));
    } catch (const json::exception& e) {
      parse_error(row, e.what());
    }
    if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'Z') parse_error(row, "answer must be a letter");
    auto idx = static_cast<std::size_t>(letter[0] - 'A');
    if (idx >= s.options.size()) {
      if (!options.skip_invalid) {
        fail(ErrorKind::InvariantViolation, "sample '" + s.id + "': answer " + letter + " not among options (row " +
                                                std::to_string(row) + ")");
      }
      ++set.dropped_rows;
      continue;
    }
    s.answer_index = idx;
    rows.add(std::move(s), row);
  }
  rows.finish();
  return set;
}

SampleSet load_samples(const std::filesystem::path& path, SampleFormat format, const LoadOptions& options) {
  auto text = read_text_file(path);
  auto name = path.stem().string();
  switch (format) {
    case SampleFormat::canonical: return parse_canonical(text, name, options);
    case SampleFormat::nextqa: return parse_nextqa_csv(text, name, options);
    case SampleFormat::mmstar: return parse_mmstar(text, name, options);
  }
  fail(ErrorKind::UsageError, "unknown format");
}

std::string serialize_samples(const SampleSet& set, const ArtifactMeta* meta) {
  validate(set);
  std::string out;
  if (meta) {
    out += meta->to_json_line();
    out += '\n';
  }
  for (const auto& s : set.samples) {
    ordered_json j;
    j["id"] = s.id;
    j["kind"] = to_string(s.visual.kind);
    j["uri"] = s.visual.uri;
    if (s.visual.frame_count_hint) j["frame_count_hint"] = *s.visual.frame_count_hint;
    j["question"] = s.question;
    j["options"] = s.options;
    j["answer_index"] = s.answer_index;
    j["category"] = s.category;
    j["provenance"] = to_string(s.provenance);
    j["schema_version"] = set.schema_version;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_samples(const SampleSet& set, const std::filesystem::path& path, const ArtifactMeta* meta) {
  write_text_file_atomic(path, serialize_samples(set, meta));
}

ReplaceResult replace_negatives(const Sample& sample, std::span<const std::string> new_negatives,
                                std::uint64_t global_seed) {
  if (new_negatives.empty()) {
    fail(ErrorKind::InvariantViolation, "sample '" + sample.id + "': no replacement negatives");
  }
  if (new_negatives.size() + 1 > kMaxOptions) {
    fail(ErrorKind::InvariantViolation, "sample '" + sample.id + "': more than 26 options after replacement");
  }
  const std::string& answer = sample.answer();
  const auto answer_key = normalize_option(answer);
  std::set<std::string> seen;
  for (const auto& neg : new_negatives) {
    auto key = normalize_option(neg);
    if (key == answer_key) {
      fail(ErrorKind::AnswerCollision, "sample '" + sample.id + "': negative '" + neg + "' equals the answer");
    }
    if (key.empty() || !seen.insert(key).second) {
      fail(ErrorKind::DuplicateNegative, "sample '" + sample.id + "': duplicate negative '" + neg + "'");
    }
  }

  ReplaceResult result;
  result.shuffle_seed = derive_seed(global_seed, sample.id);
  result.permutation.resize(new_negatives.size() + 1);
  for (std::size_t i = 0; i < result.permutation.size(); ++i) result.permutation[i] = i;
  Rng rng(result.shuffle_seed);
  rng.shuffle(result.permutation);

  Sample out = sample;
  out.options.clear();
  for (std::size_t i = 0; i < result.permutation.size(); ++i) {
    std::size_t src = result.permutation[i];
    if (src == 0) {
      out.options.push_back(answer);
      out.answer_index = i;
    } else {
      out.options.push_back(new_negatives[src - 1]);
    }
  }
  out.provenance = Provenance::groundattack;
  result.sample = std::move(out);
  return result;
}

}  // namespace eobkit
