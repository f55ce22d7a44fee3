#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eobkit/annotations.hpp"
#include "eobkit/selector.hpp"

namespace eobkit {

struct ModelEndpoint {
  std::string base_url;
  std::string model_name;
  /// Name of the environment variable holding the bearer token; may be empty.
  std::string api_key_env;
  double timeout_s = 120.0;
  int max_retries = 3;
  double temperature = 0.0;
  /// First retry delay; later retries double it and add up to 25% jitter.
  double backoff_base_s = 1.0;

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string text;
  /// data: or http(s): URLs sent as image_url content parts.
  std::vector<std::string> image_urls;
};

struct HttpResponse {
  /// 0 when the request never produced an HTTP status (connect error, timeout).
  int status = 0;
  std::string body;
  std::string error;
};

/// POSTs a chat-completions body for an endpoint.
using Transport = std::function<HttpResponse(const ModelEndpoint&, const std::string& body)>;

/// Real HTTP(S) transport.
Transport http_transport();

/// On-disk response cache laid out as `<dir>/<sha256>.json`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& model, const std::string& raw_response);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

/// Append-only JSONL log of outgoing requests. Image payloads are elided.
class RequestLog {
 public:
  explicit RequestLog(std::filesystem::path path);
  void record(const std::string& key, const std::string& model, const std::vector<ChatMessage>& messages, bool cached);

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

std::string build_chat_request(const ModelEndpoint& endpoint, const std::vector<ChatMessage>& messages);
/// Extracts choices[0].message.content; throws EndpointError on malformed bodies.
std::string parse_chat_response(std::string_view body);

class ChatClient {
 public:
  ChatClient(ModelEndpoint endpoint, Transport transport, ResponseCache* cache = nullptr, RequestLog* log = nullptr);

  /// Returns the assistant text. Retries 429, 5xx and transport failures up
  /// to max_retries times; other statuses fail at once.
  std::string complete(const std::vector<ChatMessage>& messages);

  const ModelEndpoint& endpoint() const { return endpoint_; }
  std::size_t http_calls() const { return http_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  ModelEndpoint endpoint_;
  Transport transport_;
  ResponseCache* cache_;
  RequestLog* log_;
  std::atomic<std::size_t> http_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Bundled prompt template by name (caption_image, caption_video, distractor,
/// distractor_continue, eval_vo, eval_vqo).
std::string_view prompt_template(std::string_view name);

/// k indices spread uniformly over [0, total): floor(i * total / k). When
/// total < k the frames repeat cyclically.
std::vector<std::size_t> uniform_frame_indices(std::size_t total, std::size_t k);

struct MediaOptions {
  std::filesystem::path media_root;
  std::size_t frames = 8;
};

/// Sorted image files of an extracted-frame directory.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);
/// Files to attach for a visual: the image itself, or `frames` uniformly
/// sampled files from a video's frame directory.
std::vector<std::filesystem::path> media_files(const VisualRef& visual, const MediaOptions& options);
std::string file_data_url(const std::filesystem::path& path);

struct Caption {
  std::string sample_id;
  std::string text;
  MediaKind media_kind = MediaKind::image;
  std::size_t frame_count = 0;
};

Caption caption(const Sample& sample, ChatClient& client, const MediaOptions& media);

std::string distractor_prompt(std::string_view description, std::string_view question, std::string_view answer);

/// Lines of the form "(k) body", "k. body" or "k) body", markers stripped.
/// Repeated indices and empty bodies are skipped; at most expected_max are kept.
std::vector<std::string> parse_numbered_options(std::string_view text, std::size_t expected_max);

struct CandidateRequest {
  std::string sample_id;
  std::string question;
  std::string answer;
  std::string caption_text;
  std::size_t n = 128;
  /// Minimum usable candidates; defaults to half of n.
  std::optional<std::size_t> floor;
};

/// Fills the distractor template, parses and dedupes the reply, and asks once
/// for the rest of the list if it came back short.
CandidateSet generate_candidates(const CandidateRequest& request, ChatClient& client);

}  // namespace eobkit
