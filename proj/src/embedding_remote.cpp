#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"
#include "userprof/embedding.hpp"
#include "userprof/error.hpp"

namespace userprof {

RemoteEmbedder::RemoteEmbedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Matrix RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  using nlohmann::json;
  auto ep = detail::split_endpoint(*cfg_.endpoint);
  httplib::Client client(ep.base);
  auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  Matrix out(texts.size(), cfg_.dim);
  for (std::size_t start = 0; start < texts.size(); start += cfg_.batch_size) {
    std::size_t end = std::min(texts.size(), start + cfg_.batch_size);
    json body = {{"model", cfg_.model_name.value_or("")},
                 {"texts", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                    texts.begin() + static_cast<std::ptrdiff_t>(end))}};
    std::string last_error;
    json reply;
    bool ok = false;
    for (int attempt = 0; attempt <= cfg_.retries && !ok; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 << std::min(attempt, 5)));
      auto res = client.Post(ep.path, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        reply = json::parse(res->body);
        ok = true;
      } catch (const json::exception& e) {
        last_error = e.what();
      }
    }
    if (!ok) throw TransportError("embedding endpoint " + *cfg_.endpoint + " failed: " + last_error);
    const auto& vectors = reply.at("vectors");
    if (vectors.size() != end - start) throw TransportError("embedding endpoint returned wrong vector count");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      auto row = out.row(start + i);
      if (vectors[i].size() != cfg_.dim) throw TransportError("embedding endpoint returned wrong dimension");
      for (std::size_t j = 0; j < cfg_.dim; ++j) row[j] = vectors[i][j].get<double>();
      normalize_in_place(row);
    }
  }
  return out;
}

}  // namespace userprof
