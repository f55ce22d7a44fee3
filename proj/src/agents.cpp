#include "eobkit/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <thread>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

namespace detail {
const std::map<std::string, std::string_view>& prompt_table();
}

using nlohmann::json;
using nlohmann::ordered_json;

void ModelEndpoint::validate() const {
  static const std::regex url_re(R"(^https?://[^/\s:]+(:\d+)?(/\S*)?$)");
  if (!std::regex_match(base_url, url_re)) fail(ErrorKind::ConfigError, "invalid base_url '" + base_url + "'");
  if (model_name.empty()) fail(ErrorKind::ConfigError, "endpoint model_name is empty");
  if (max_retries < 0) fail(ErrorKind::ConfigError, "max_retries must be >= 0");
  if (!(timeout_s > 0.0)) fail(ErrorKind::ConfigError, "timeout_s must be > 0");
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("response") || !j["response"].is_string()) return std::nullopt;
  return j["response"].get<std::string>();
}

void ResponseCache::put(const std::string& key, const std::string& model, const std::string& raw_response) {
  ordered_json j;
  j["key"] = key;
  j["model"] = model;
  j["response"] = raw_response;
  std::lock_guard lock(write_mutex_);
  write_text_file_atomic(dir_ / (key + ".json"), j.dump() + "\n");
}

RequestLog::RequestLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void RequestLog::record(const std::string& key, const std::string& model, const std::vector<ChatMessage>& messages,
                        bool cached) {
  ordered_json j;
  j["key"] = key;
  j["model"] = model;
  j["cached"] = cached;
  j["messages"] = json::array();
  for (const auto& m : messages) {
    j["messages"].push_back({{"role", m.role}, {"text", m.text}, {"attachments", m.image_urls.size()}});
  }
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << j.dump() << '\n';
}

std::string build_chat_request(const ModelEndpoint& endpoint, const std::vector<ChatMessage>& messages) {
  ordered_json j;
  j["model"] = endpoint.model_name;
  j["temperature"] = endpoint.temperature;
  j["messages"] = json::array();
  for (const auto& m : messages) {
    ordered_json msg;
    msg["role"] = m.role;
    if (m.image_urls.empty()) {
      msg["content"] = m.text;
    } else {
      ordered_json parts = json::array();
      for (const auto& url : m.image_urls) {
        ordered_json part;
        part["type"] = "image_url";
        part["image_url"] = {{"url", url}};
        parts.push_back(std::move(part));
      }
      parts.push_back({{"type", "text"}, {"text", m.text}});
      msg["content"] = std::move(parts);
    }
    j["messages"].push_back(std::move(msg));
  }
  return j.dump();
}

std::string parse_chat_response(std::string_view body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::EndpointError, "response is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::EndpointError, std::string("unexpected response shape: ") + e.what());
  }
}

ChatClient::ChatClient(ModelEndpoint endpoint, Transport transport, ResponseCache* cache, RequestLog* log)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), cache_(cache), log_(log) {
  endpoint_.validate();
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) {
  const std::string body = build_chat_request(endpoint_, messages);
  const std::string key = sha256_hex(body);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      ++cache_hits_;
      if (log_) log_->record(key, endpoint_.model_name, messages, true);
      auto text = parse_chat_response(*hit);
      if (!text.empty()) return text;
    }
  }
  if (log_) log_->record(key, endpoint_.model_name, messages, false);

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0 && endpoint_.backoff_base_s > 0.0) {
      double delay = endpoint_.backoff_base_s * std::pow(2.0, attempt - 1);
      delay *= 1.0 + std::uniform_real_distribution<double>(0.0, 0.25)(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++http_calls_;
    HttpResponse resp = transport_(endpoint_, body);
    if (resp.status == 200) {
      auto text = parse_chat_response(resp.body);
      if (trim(text).empty()) fail(ErrorKind::EmptyResponse, endpoint_.model_name + " returned an empty message");
      if (cache_) cache_->put(key, endpoint_.model_name, resp.body);
      return text;
    }
    last_error = resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status);
    const bool retryable = resp.status == 0 || resp.status == 429 || resp.status >= 500;
    if (!retryable) break;
  }
  fail(ErrorKind::EndpointError, endpoint_.model_name + " at " + endpoint_.base_url + ": " + last_error);
}

std::string_view prompt_template(std::string_view name) {
  const auto& table = detail::prompt_table();
  auto it = table.find(std::string(name));
  if (it == table.end()) fail(ErrorKind::ConfigError, "no prompt template named '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::size_t> uniform_frame_indices(std::size_t total, std::size_t k) {
  if (total == 0) fail(ErrorKind::EmptyFrames, "video has no frames");
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = total >= k ? (i * total) / k : i % total;
  return out;
}

namespace {

std::string lower_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::string mime_for(const std::filesystem::path& p) {
  auto ext = lower_extension(p);
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/jpeg";
}

bool is_image_file(const std::filesystem::path& p) {
  static const std::set<std::string> exts = {".jpg", ".jpeg", ".png", ".webp", ".gif", ".bmp"};
  return exts.count(lower_extension(p)) > 0;
}

std::filesystem::path resolve(const std::filesystem::path& root, const std::string& uri) {
  std::filesystem::path p(uri);
  if (p.is_absolute() || root.empty()) return p;
  return root / p;
}

}  // namespace

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> frames;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

std::vector<std::filesystem::path> media_files(const VisualRef& visual, const MediaOptions& options) {
  auto path = resolve(options.media_root, visual.uri);
  if (visual.kind == MediaKind::image) {
    if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::MediaError, "image not found: " + path.string());
    return {path};
  }
  if (!std::filesystem::is_directory(path)) {
    fail(ErrorKind::MediaError, "video frame directory not found: " + path.string());
  }
  auto all = list_frame_files(path);
  if (all.empty()) fail(ErrorKind::MediaError, "no frame images in " + path.string());
  std::vector<std::filesystem::path> picked;
  for (auto i : uniform_frame_indices(all.size(), options.frames)) picked.push_back(all[i]);
  return picked;
}

std::string file_data_url(const std::filesystem::path& path) {
  auto bytes = read_binary_file(path);
  return "data:" + mime_for(path) + ";base64," + base64_encode(bytes);
}

Caption caption(const Sample& sample, ChatClient& client, const MediaOptions& media) {
  ChatMessage msg;
  msg.role = "user";
  msg.text = std::string(prompt_template(sample.visual.kind == MediaKind::video ? "caption_video" : "caption_image"));
  for (const auto& f : media_files(sample.visual, media)) msg.image_urls.push_back(file_data_url(f));
  Caption out;
  out.sample_id = sample.id;
  out.media_kind = sample.visual.kind;
  out.frame_count = msg.image_urls.size();
  out.text = client.complete({msg});
  return out;
}

std::string distractor_prompt(std::string_view description, std::string_view question, std::string_view answer) {
  return fill_template(prompt_template("distractor"), {{"Description", std::string(description)},
                                                       {"Question", std::string(question)},
                                                       {"Correct Answer", std::string(answer)}});
}

std::vector<std::string> parse_numbered_options(std::string_view text, std::size_t expected_max) {
  static const std::regex line_re(R"(^\s*(?:\((\d+)\)|(\d+)[.)])\s*(.*?)\s*$)");
  std::vector<std::string> out;
  std::set<std::string> seen_markers;
  std::size_t pos = 0;
  while (pos <= text.size() && out.size() < expected_max) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      std::string marker = m[1].matched ? m[1].str() : m[2].str();
      std::string body = m[3].str();
      if (!body.empty() && seen_markers.insert(marker).second) out.push_back(std::move(body));
    }
    if (end == text.size()) break;
  }
  if (out.empty()) fail(ErrorKind::NoOptionsFound, "no numbered options in response");
  return out;
}

namespace {

std::vector<std::string> parse_or_empty(std::string_view text, std::size_t expected_max) {
  try {
    return parse_numbered_options(text, expected_max);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoOptionsFound) throw;
    return {};
  }
}

}  // namespace

CandidateSet generate_candidates(const CandidateRequest& request, ChatClient& client) {
  if (trim(request.question).empty() || trim(request.answer).empty() || trim(request.caption_text).empty()) {
    fail(ErrorKind::InvariantViolation, "sample '" + request.sample_id + "': question, answer and caption must be nonempty");
  }
  if (request.n == 0) fail(ErrorKind::ConfigError, "candidate count N must be >= 1");
  const std::size_t floor = request.floor.value_or((request.n + 1) / 2);

  std::vector<ChatMessage> convo{{"user", distractor_prompt(request.caption_text, request.question, request.answer), {}}};
  std::string reply = client.complete(convo);
  auto parsed = parse_or_empty(reply, request.n);
  auto candidates = dedupe_candidates(parsed, request.answer);

  if (candidates.size() < request.n) {
    convo.push_back({"assistant", reply, {}});
    convo.push_back({"user",
                     fill_template(prompt_template("distractor_continue"),
                                   {{"Next", std::to_string(parsed.size())}, {"Last", std::to_string(request.n - 1)}}),
                     {}});
    auto more = parse_or_empty(client.complete(convo), request.n);
    parsed.insert(parsed.end(), more.begin(), more.end());
    candidates = dedupe_candidates(parsed, request.answer);
    if (candidates.size() > request.n) candidates.resize(request.n);
  }
  if (candidates.size() < floor) {
    fail(ErrorKind::InsufficientCandidates, "sample '" + request.sample_id + "': " + std::to_string(candidates.size()) +
                                                " usable candidates, need at least " + std::to_string(floor));
  }
  return {request.sample_id, std::move(candidates), CandidateSource::distractor};
}

}  // namespace eobkit
