#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "userprof/annotation.hpp"
#include "userprof/error.hpp"

namespace userprof {

using json = nlohmann::json;

namespace {

constexpr const char* kGuideline =
    "Label the statement using only what the tweets state. Multi-step reasoning and inference are prohibited. "
    "Choose True, False, or Cannot Be Answered.";

struct HttpError {
  int status;
  std::string code;
  std::string message;
  json extra = json::object();
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json task_json(const AnnotationTask& t, std::size_t remaining, std::size_t cap) {
  json tweets = json::array();
  for (const auto& tw : t.pool_tweets) {
    tweets.push_back({{"id", tw.id}, {"text", tw.text}, {"created_at", format_iso8601(tw.created_at)}});
  }
  return {{"task_id", t.task_id},
          {"user_id", t.user_id},
          {"statement", {{"id", t.statement.id}, {"text", t.statement.text}}},
          {"pool_tweets", tweets},
          {"assigned_to", t.assigned_to},
          {"status", to_string(t.status)},
          {"labels", {"True", "False", "CannotAnswer"}},
          {"guideline", kGuideline},
          {"remaining_today", remaining},
          {"daily_cap", cap}};
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  AnnotationServerConfig cfg;
  httplib::Server server;
  std::jthread thread;

  Impl(AnnotationStore& s, AnnotationServerConfig c) : store(s), cfg(std::move(c)) {}

  const AnnotatorIdentity& authenticate(const httplib::Request& req) const {
    auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (!header.starts_with(prefix)) throw Unauthorized("missing bearer token");
    auto it = cfg.tokens.find(header.substr(prefix.size()));
    if (it == cfg.tokens.end()) throw Unauthorized("unknown token");
    return it->second;
  }

  std::size_t remaining(const std::string& id) const {
    auto used = store.labels_today(id);
    return used >= store.daily_cap() ? 0 : store.daily_cap() - used;
  }

  template <class Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        json body = {{"error", e.message}, {"code", e.code}};
        body.update(e.extra);
        send_json(res, e.status, body);
      } catch (const Unauthorized& e) {
        send_json(res, 401, {{"error", e.what()}, {"code", "unauthorized"}});
      } catch (const Forbidden& e) {
        send_json(res, 403, {{"error", e.what()}, {"code", "forbidden"}});
      } catch (const NotFound& e) {
        send_json(res, 404, {{"error", e.what()}, {"code", "not_found"}});
      } catch (const UnfinishedPairs& e) {
        json pairs = json::array();
        for (const auto& [u, s] : e.pairs()) pairs.push_back({{"user_id", u}, {"statement_id", s}});
        send_json(res, 409, {{"error", e.what()}, {"code", "unfinished"}, {"unfinished", pairs}});
      } catch (const Conflict& e) {
        send_json(res, 409, {{"error", e.what()}, {"code", "conflict"}});
      } catch (const QuotaExceeded& e) {
        send_json(res, 429,
                  {{"error", e.what()}, {"code", "daily_cap"}, {"reset_at", format_iso8601(e.reset_at())}});
      } catch (const InvalidArgument& e) {
        send_json(res, 400, {{"error", e.what()}, {"code", "bad_request"}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}, {"code", "internal"}});
      }
    };
  }

  void routes() {
    server.Get("/tasks/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& who = authenticate(req);
      if (req.has_param("annotator") && req.get_param_value("annotator") != who.id) {
        throw Forbidden("token does not belong to annotator " + req.get_param_value("annotator"));
      }
      auto task = store.next_task(who.id);
      if (!task) {
        send_json(res, 200, {{"task", nullptr}, {"remaining_today", remaining(who.id)}});
        return;
      }
      send_json(res, 200, {{"task", task_json(*task, remaining(who.id), store.daily_cap())}});
    }));

    server.Post(R"(/tasks/([^/]+)/label)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& who = authenticate(req);
      std::string task_id = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        throw InvalidArgument("request body is not json");
      }
      if (!body.is_object() || !body.contains("label") || !body["label"].is_string()) {
        throw InvalidArgument("body must be {\"label\": ...}");
      }
      auto label = body["label"].get<std::string>();
      StanceLabel parsed;
      if (label == "True") {
        parsed = StanceLabel::True;
      } else if (label == "False") {
        parsed = StanceLabel::False;
      } else if (label == "CannotAnswer") {
        parsed = StanceLabel::CannotAnswer;
      } else {
        throw InvalidArgument("label must be one of True, False, CannotAnswer");
      }
      auto status = store.submit_label(task_id, who.id, parsed);
      send_json(res, 200,
                {{"task_id", task_id}, {"status", to_string(status)}, {"remaining_today", remaining(who.id)}});
    }));

    server.Get("/adjudication/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& who = authenticate(req);
      if (who.role != AnnotatorRole::adjudicator) throw Forbidden(who.id + " is not an adjudicator");
      auto task = store.next_adjudication(who.id);
      if (!task) {
        send_json(res, 200, {{"task", nullptr}, {"remaining_today", remaining(who.id)}});
        return;
      }
      send_json(res, 200, {{"task", task_json(*task, remaining(who.id), store.daily_cap())}});
    }));

    server.Get("/progress", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto p = store.progress();
      json body = {{"pairs", p.pairs},
                   {"final", p.final_pairs},
                   {"adjudication", p.adjudication_pairs},
                   {"open", p.open_pairs},
                   {"records", p.records},
                   {"daily_cap", store.daily_cap()},
                   {"quota_resets_at", format_iso8601(store.quota_reset_at())}};
      if (req.has_header("Authorization")) {
        const auto& who = authenticate(req);
        body["annotator"] = {{"id", who.id},
                             {"labels_today", store.labels_today(who.id)},
                             {"remaining_today", remaining(who.id)}};
      }
      send_json(res, 200, body);
    }));

    server.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      authenticate(req);
      auto gold = store.export_gold();
      json rows = json::array();
      for (const auto& [key, label] : gold.gold) {
        rows.push_back({{"user_id", key.first}, {"statement_id", key.second}, {"label", to_string(label)}});
      }
      write_gold_jsonl(store.directory() / "gold.jsonl", gold.gold);
      store.checkpoint();
      send_json(res, 200, {{"gold", rows}, {"kappa", gold.kappa}, {"pairs", gold.gold.size()},
                           {"adjudicated", gold.adjudicated}});
    }));

    if (cfg.static_dir) {
      if (!server.set_mount_point("/", cfg.static_dir->string())) {
        throw InvalidArgument("static directory " + cfg.static_dir->string() + " does not exist");
      }
    }
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, AnnotationServerConfig cfg)
    : impl_(std::make_unique<Impl>(store, std::move(cfg))) {
  if (impl_->cfg.tokens.empty()) throw InvalidArgument("annotation server needs at least one annotator token");
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  if (impl_->cfg.port == 0) {
    port_ = impl_->server.bind_to_any_port(impl_->cfg.host);
  } else {
    port_ = impl_->server.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1;
  }
  if (port_ < 0) throw Error("cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  impl_->thread = std::jthread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void AnnotationServer::run() {
  if (!impl_->server.listen(impl_->cfg.host, impl_->cfg.port)) {
    throw Error("cannot serve on " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  }
}

void AnnotationServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->store.checkpoint();
}

}  // namespace userprof
