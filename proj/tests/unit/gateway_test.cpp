#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <fstream>
#include <thread>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/llm_gateway.hpp"

using namespace userprof;
using json = nlohmann::json;

namespace {

// Local chat-completions stub on a free port.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_body(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
              {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}}
      .dump();
}

}  // namespace

TEST(PromptTemplate, NoPlaceholdersIsVerbatim) {
  auto t = PromptTemplate::from_body("t", "plain text, {{braces}} kept");
  EXPECT_EQ(t.render({}), "plain text, {braces} kept");
}

TEST(PromptTemplate, SubstitutesEveryVariable) {
  PromptTemplate t("t", "S: {statement}\nT: {tweets}\nS again: {statement}", {"statement", "tweets"});
  auto out = t.render({{"statement", "fares"}, {"tweets", "[T1] hi"}, {"extra", "ignored"}});
  EXPECT_EQ(out, "S: fares\nT: [T1] hi\nS again: fares");
}

TEST(PromptTemplate, MissingVariableNamed) {
  PromptTemplate t("t", "{statement} {tweets}", {"statement", "tweets"});
  try {
    t.render({{"statement", "x"}});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("tweets"), std::string::npos);
  }
}

TEST(PromptTemplate, UndeclaredPlaceholderRejected) {
  PromptTemplate t("t", "{statement} {other}", {"statement"});
  EXPECT_THROW(t.render({{"statement", "x"}, {"other", "y"}}), InvalidArgument);
  EXPECT_THROW(PromptTemplate("t", "{a}", {"a", "b"}), InvalidArgument);
}

TEST(PromptTemplate, BuiltinsDeclareTheirVariables) {
  EXPECT_EQ(default_template("profile").required_vars(),
            (std::set<std::string>{"statement", "statement_id", "tweets", "user_id"}));
  EXPECT_EQ(default_template("evaluate").required_vars(),
            (std::set<std::string>{"context", "statement", "statement_id"}));
  EXPECT_EQ(default_template("generate_statements").required_vars(), (std::set<std::string>{"tweets"}));
  EXPECT_THROW(default_template("nope"), NotFound);
}

TEST(PromptTemplate, Placeholders) {
  EXPECT_EQ(template_placeholders("{a} {{b}} {c} {a} {not valid}"), (std::vector<std::string>{"a", "c", "a"}));
}

TEST(MockGateway, FirstMatchingRuleWins) {
  MockGateway g(std::vector<MockRule>{{".*STATEMENT_7.*", "seven"}, {"STATEMENT", "generic"}});
  auto a = g.complete(CompletionRequest("about STATEMENT_7 here"));
  auto b = g.complete(CompletionRequest("about STATEMENT_7 here"));
  EXPECT_EQ(a.text, "seven");
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(g.complete(CompletionRequest("STATEMENT_1")).text, "generic");
  EXPECT_EQ(g.calls(), 3u);
}

TEST(MockGateway, UnmatchedPromptFails) {
  MockGateway g(std::vector<MockRule>{{"^never$", "x"}});
  EXPECT_THROW(g.complete(CompletionRequest("something")), TransportError);
}

TEST(MockGateway, BadPatternRejected) { EXPECT_THROW(MockGateway(std::vector<MockRule>{{"(unclosed", "x"}}), InvalidArgument); }

TEST(MockGateway, RulesFileRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "userprof_rules.json";
  write_mock_rules(path, {{"a\nb", "multi\nline"}});
  auto back = read_mock_rules(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].pattern, "a\nb");
  EXPECT_EQ(back[0].response, "multi\nline");
  std::filesystem::remove(path);
}

TEST(AuditedGateway, LogsHashesOfRequestAndResponse) {
  auto path = std::filesystem::temp_directory_path() / "userprof_audit.jsonl";
  std::filesystem::remove(path);
  MockGateway mock(std::vector<MockRule>{{"hello", "world"}});
  AuditedGateway g(mock, path, "mock");
  g.complete(CompletionRequest("hello there"));
  EXPECT_THROW(g.complete(CompletionRequest("unmatched")), TransportError);

  std::ifstream in(path);
  std::vector<json> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(json::parse(l));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0]["direction"], "request");
  EXPECT_EQ(lines[0]["sha256"], sha256_hex("hello there"));
  EXPECT_EQ(lines[1]["direction"], "response");
  EXPECT_EQ(lines[1]["sha256"], sha256_hex("world"));
  EXPECT_EQ(lines[3]["direction"], "error");
  std::filesystem::remove(path);
}

TEST(RemoteGateway, ReturnsStubBody) {
  std::atomic<int> hits{0};
  std::string seen_auth, seen_model;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    seen_model = body["model"];
    EXPECT_EQ(body["messages"][0]["content"], "prompt text");
    res.set_content(chat_body("fixed reply"), "application/json");
  });
  RemoteGatewayConfig cfg;
  cfg.endpoint = stub.url();
  cfg.model = "m1";
  cfg.api_key = "secret";
  RemoteGateway g(cfg);
  auto c = g.complete(CompletionRequest("prompt text"));
  EXPECT_EQ(c.text, "fixed reply");
  EXPECT_EQ(c.usage.prompt_tokens, 7u);
  EXPECT_EQ(hits.load(), 1);
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_model, "m1");
}

TEST(RemoteGateway, RetriesServerErrors) {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 503;
      return;
    }
    res.set_content(chat_body("eventually"), "application/json");
  });
  RemoteGatewayConfig cfg;
  cfg.endpoint = stub.url();
  cfg.retries = 2;
  RemoteGateway g(cfg);
  EXPECT_EQ(g.complete(CompletionRequest("p")).text, "eventually");
  EXPECT_EQ(hits.load(), 3);
}

TEST(RemoteGateway, ClientErrorIsNotRetried) {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  RemoteGatewayConfig cfg;
  cfg.endpoint = stub.url();
  cfg.retries = 3;
  RemoteGateway g(cfg);
  EXPECT_THROW(g.complete(CompletionRequest("p")), TransportError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(RemoteGateway, CapsConcurrentRequests) {
  std::atomic<int> in_flight{0}, peak{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(chat_body("ok"), "application/json");
  });
  RemoteGatewayConfig cfg;
  cfg.endpoint = stub.url();
  cfg.max_in_flight = 2;
  RemoteGateway g(cfg);
  std::vector<std::jthread> workers;
  for (int i = 0; i < 8; ++i) workers.emplace_back([&] { g.complete(CompletionRequest("p")); });
  workers.clear();
  EXPECT_LE(peak.load(), 2);
}

TEST(RemoteGateway, UnreachableEndpointFails) {
  RemoteGatewayConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.retries = 0;
  cfg.timeout_seconds = 2;
  RemoteGateway g(cfg);
  EXPECT_THROW(g.complete(CompletionRequest("p")), TransportError);
}
