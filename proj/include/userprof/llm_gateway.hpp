#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace userprof {

/// Prompt with `{name}` placeholders; `{{` and `}}` are literal braces.
class PromptTemplate {
 public:
  /// Declared variables must each appear in the body.
  PromptTemplate(std::string name, std::string body, std::set<std::string> required_vars);
  /// Declares exactly the placeholders found in the body.
  static PromptTemplate from_body(std::string name, std::string body);
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& required_vars() const noexcept { return required_; }

  /// Throws InvalidArgument naming a missing variable or an undeclared placeholder.
  std::string render(const std::map<std::string, std::string>& vars) const;

 private:
  std::string name_;
  std::string body_;
  std::set<std::string> required_;
};

/// Placeholder names in order of appearance (duplicates kept).
std::vector<std::string> template_placeholders(const std::string& body);

/// Built-in templates: "profile", "evaluate", "generate_statements",
/// "amazon_summary", "amazon_rag".
PromptTemplate default_template(const std::string& name);

struct CompletionRequest {
  CompletionRequest() = default;
  explicit CompletionRequest(std::string p) : prompt(std::move(p)) {}

  std::string prompt;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
  std::string model_name;
};

struct TokenUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

class Gateway {
 public:
  virtual ~Gateway() = default;
  /// Throws TransportError when the provider cannot answer.
  virtual Completion complete(const CompletionRequest& req) = 0;
};

struct MockRule {
  std::string pattern;
  std::string response;
};

/// Deterministic scripted provider: the first rule whose regex (Perl syntax,
/// searched anywhere in the prompt) matches supplies the response.
class MockGateway final : public Gateway {
 public:
  explicit MockGateway(std::vector<MockRule> rules);
  ~MockGateway() override;

  Completion complete(const CompletionRequest& req) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  struct Compiled;
  std::vector<Compiled> compiled_;
  std::atomic<std::size_t> calls_{0};
};

std::vector<MockRule> read_mock_rules(const std::filesystem::path& path);
void write_mock_rules(const std::filesystem::path& path, const std::vector<MockRule>& rules);

struct RemoteGatewayConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model;
  std::optional<std::string> api_key;
  double timeout_seconds = 60.0;
  int retries = 2;
  std::size_t max_in_flight = 4;
};

/// OpenAI-style chat completion over HTTP with bounded retries and a cap on
/// concurrent requests.
class RemoteGateway final : public Gateway {
 public:
  explicit RemoteGateway(RemoteGatewayConfig cfg);
  Completion complete(const CompletionRequest& req) override;

 private:
  RemoteGatewayConfig cfg_;
  std::counting_semaphore<1024> slots_;
};

/// Appends one json line per request and response with its SHA-256.
class AuditedGateway final : public Gateway {
 public:
  AuditedGateway(Gateway& inner, std::filesystem::path log_path, std::string provider);
  Completion complete(const CompletionRequest& req) override;

 private:
  Gateway& inner_;
  std::filesystem::path log_path_;
  std::string provider_;
  std::mutex mu_;
  std::size_t seq_ = 0;
};

}  // namespace userprof
