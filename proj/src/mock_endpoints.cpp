#include "eobkit/mock_endpoints.hpp"

#include <regex>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace eobkit {

using nlohmann::json;

namespace {

struct FlatMessage {
  std::string role;
  std::string text;
  std::size_t attachments = 0;
};

std::vector<FlatMessage> flatten(const json& messages) {
  std::vector<FlatMessage> out;
  for (const auto& m : messages) {
    FlatMessage f;
    f.role = m.value("role", "");
    const auto& content = m.at("content");
    if (content.is_string()) {
      f.text = content.get<std::string>();
    } else {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") f.text += part.value("text", "");
        if (part.value("type", "") == "image_url") ++f.attachments;
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::string last_field(const std::string& text, const std::string& label) {
  auto at = text.rfind(label);
  if (at == std::string::npos) return {};
  auto start = at + label.size();
  auto end = text.find('\n', start);
  return trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

std::string distractor_line(std::size_t i, std::uint64_t topic) {
  static const char* verbs[] = {"walk towards", "look at",   "point to",     "pick up",
                                "move away from", "sit next to", "reach for", "circle around"};
  static const char* adjectives[] = {"red", "small", "wooden", "distant"};
  static const char* objects[] = {"pet bed", "cushion", "black dog", "window", "ball",  "table",
                                  "door",    "sofa",    "toy car",   "basket", "plant", "chair"};
  const std::size_t obj = (i / 32 + topic) % 12;
  std::string s = verbs[i % 8];
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + " the " + adjectives[(i / 8) % 4] + " " + objects[obj] + ".";
}

std::string distractor_reply(const std::vector<FlatMessage>& convo, const std::string& model) {
  const std::string& first = convo.front().text;
  const std::uint64_t topic = fnv1a64(last_field(first, "[Question]:")) % 12;
  std::size_t begin = 0;
  std::size_t end = 128;
  if (model.find("short") != std::string::npos) end = 40;
  if (model.find("truncating") != std::string::npos) end = 100;
  if (convo.size() > 1) {
    static const std::regex cont_re(R"(from \((\d+)\) up to \((\d+)\))");
    std::smatch m;
    if (std::regex_search(convo.back().text, m, cont_re)) {
      begin = std::stoul(m[1].str());
      end = std::stoul(m[2].str()) + 1;
      if (model.find("short") != std::string::npos) end = begin;
    }
  }
  std::string out;
  for (std::size_t i = begin; i < end && i < 128; ++i) {
    out += "(" + std::to_string(i) + ") " + distractor_line(i, topic) + "\n";
  }
  return out.empty() ? "No more options." : out;
}

std::string answer_reply(const FlatMessage& msg, const std::string& model) {
  static const std::regex option_re(R"((^|\n)\(([A-Z])\) )");
  std::size_t n = 0;
  for (auto it = std::sregex_iterator(msg.text.begin(), msg.text.end(), option_re); it != std::sregex_iterator(); ++it) {
    ++n;
  }
  if (n == 0) return "I cannot tell.";
  if (model.find("always-a") != std::string::npos) return "A";
  auto pick = fnv1a64(model + "\n" + msg.text + "\n" + std::to_string(msg.attachments)) % n;
  return std::string(1, static_cast<char>('A' + pick));
}

std::string completion_body(const std::string& model, const std::string& content) {
  nlohmann::ordered_json j;
  j["id"] = "mock-" + sha256_hex(model + content).substr(0, 16);
  j["object"] = "chat.completion";
  j["model"] = model;
  j["choices"] = json::array({{{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", content}}},
                               {"finish_reason", "stop"}}});
  return j.dump();
}

}  // namespace

MockReply mock_chat_completion(std::string_view request_body, std::string_view role) {
  auto req = json::parse(request_body, nullptr, false);
  if (req.is_discarded() || !req.contains("messages") || !req.contains("model")) {
    return {400, R"({"error":"bad request"})"};
  }
  const auto model = req["model"].get<std::string>();
  if (model.find("fail") != std::string::npos) return {500, R"({"error":"mock failure"})"};
  std::vector<FlatMessage> convo;
  try {
    convo = flatten(req["messages"]);
  } catch (const json::exception&) {
    return {400, R"({"error":"bad messages"})"};
  }
  if (convo.empty()) return {400, R"({"error":"no messages"})"};

  std::string kind(role);
  if (kind.empty()) {
    if (model.find("caption") != std::string::npos) {
      kind = "captioner";
    } else if (model.find("distract") != std::string::npos) {
      kind = "distractor";
    } else {
      kind = "evaluator";
    }
  }
  std::string content;
  if (kind == "captioner") {
    const auto& msg = convo.back();
    content = "A mock scene " + sha256_hex(std::string(request_body)).substr(0, 12) + " described from " +
              std::to_string(msg.attachments) + " frame(s).";
  } else if (kind == "distractor") {
    content = distractor_reply(convo, model);
  } else {
    content = answer_reply(convo.back(), model);
  }
  return {200, completion_body(model, content)};
}

Transport mock_transport(std::string role) {
  return [role](const ModelEndpoint&, const std::string& body) -> HttpResponse {
    auto reply = mock_chat_completion(body, role);
    return {reply.status, reply.body, {}};
  };
}

struct MockServer::Impl {
  httplib::Server server;
};

MockServer::MockServer() : impl_(std::make_unique<Impl>()), requests_(std::make_shared<std::atomic<std::size_t>>(0)) {
  auto counter = requests_;
  auto handler = [counter](const httplib::Request& req, httplib::Response& res) {
    ++*counter;
    std::string role = req.matches.size() > 1 ? req.matches[1].str() : std::string();
    auto reply = mock_chat_completion(req.body, role);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  impl_->server.Post(R"(/mock/(captioner|distractor|evaluator)/v1/chat/completions)", handler);
  impl_->server.Post("/v1/chat/completions", handler);
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) fail(ErrorKind::EndpointError, "mock server could not bind a loopback port");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url(std::string_view role) const {
  std::string root = "http://127.0.0.1:" + std::to_string(port_);
  if (role.empty()) return root + "/v1";
  return root + "/mock/" + std::string(role) + "/v1";
}

}  // namespace eobkit
