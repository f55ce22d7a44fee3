#include <cstdlib>
#include <regex>

#include "eobkit/agents.hpp"
#include "eobkit/error.hpp"
#include "httplib.h"

namespace eobkit {

Transport http_transport() {
  return [](const ModelEndpoint& endpoint, const std::string& body) -> HttpResponse {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint.base_url, m, url_re)) {
      fail(ErrorKind::ConfigError, "invalid base_url '" + endpoint.base_url + "'");
    }
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(m[1].str());
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");
    if (!res) return {0, {}, "transport error: " + httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  };
}

}  // namespace eobkit
