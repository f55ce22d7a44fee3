#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "eobkit/agents.hpp"

namespace eobkit {

// Deterministic stand-ins for the captioner, distractor and answering
// models. The role comes from the server route (or the `role` argument);
// when empty it is inferred from the model name. Per role:
//   captioner   caption derived from a hash of the request
//   distractor  128 numbered candidates; "-short" model names stop at 40,
//               "-truncating" ones stop at 100 and finish on "continue"
//   evaluator   a letter picked by hashing (model, prompt); "always-a" models answer "A"
// Any model name containing "fail" gets HTTP 500.
struct MockReply {
  int status = 200;
  std::string body;
};

MockReply mock_chat_completion(std::string_view request_body, std::string_view role = {});

/// In-process transport that calls mock_chat_completion without sockets.
Transport mock_transport(std::string role = {});

/// Loopback HTTP server speaking the chat-completions protocol with the
/// mock behaviour above.
class MockServer {
 public:
  MockServer();
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// e.g. "http://127.0.0.1:40123/mock/captioner/v1"; an empty role gives
  /// "http://127.0.0.1:40123/v1" with model-name inference.
  std::string base_url(std::string_view role = {}) const;
  std::size_t request_count() const { return requests_->load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<std::atomic<std::size_t>> requests_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace eobkit
