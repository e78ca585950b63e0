#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"
#include "userprof/error.hpp"
#include "userprof/llm_gateway.hpp"

namespace userprof {

using json = nlohmann::json;

RemoteGateway::RemoteGateway(RemoteGatewayConfig cfg)
    : cfg_(std::move(cfg)), slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg_.max_in_flight, 1, 1024))) {
  if (cfg_.endpoint.empty()) throw InvalidArgument("remote gateway requires an endpoint");
}

Completion RemoteGateway::complete(const CompletionRequest& req) {
  if (req.prompt.empty()) throw InvalidArgument("prompt must not be empty");
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  auto ep = detail::split_endpoint(cfg_.endpoint);
  httplib::Client client(ep.base);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (cfg_.api_key) headers.emplace("Authorization", "Bearer " + *cfg_.api_key);

  json body = {{"model", req.model_name.empty() ? cfg_.model : req.model_name},
               {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
               {"temperature", req.temperature},
               {"top_p", req.top_p},
               {"max_tokens", req.max_tokens}};
  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << std::min(attempt, 5)));
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
      continue;
    }
    try {
      json reply = json::parse(res->body);
      Completion c;
      c.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (reply.contains("usage")) {
        c.usage.prompt_tokens = reply["usage"].value("prompt_tokens", std::size_t{0});
        c.usage.completion_tokens = reply["usage"].value("completion_tokens", std::size_t{0});
      }
      return c;
    } catch (const json::exception& e) {
      last_error = std::string("malformed reply: ") + e.what();
    }
  }
  throw TransportError("completion endpoint " + cfg_.endpoint + " failed: " + last_error);
}

}  // namespace userprof
