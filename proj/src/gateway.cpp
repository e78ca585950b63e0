#include <fstream>

#include <boost/regex.hpp>
#include <json.hpp>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/llm_gateway.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

struct MockGateway::Compiled {
  boost::regex re;
  std::string response;
};

MockGateway::MockGateway(std::vector<MockRule> rules) {
  compiled_.reserve(rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) {
    try {
      compiled_.push_back({boost::regex(rules[i].pattern, boost::regex::perl), std::move(rules[i].response)});
    } catch (const boost::regex_error& e) {
      throw InvalidArgument("mock rule " + std::to_string(i) + " has an invalid pattern: " + e.what());
    }
  }
}

MockGateway::~MockGateway() = default;

namespace {

std::size_t rough_tokens(const std::string& s) { return text::whitespace_spans(s).size(); }

}  // namespace

Completion MockGateway::complete(const CompletionRequest& req) {
  ++calls_;
  for (const auto& rule : compiled_) {
    if (boost::regex_search(req.prompt, rule.re)) {
      return {rule.response, {rough_tokens(req.prompt), rough_tokens(rule.response)}};
    }
  }
  throw TransportError("no mock rule matches the prompt (sha256 " + sha256_hex(req.prompt) + ")");
}

std::vector<MockRule> read_mock_rules(const std::filesystem::path& path) {
  json j = json::parse(read_file(path));
  if (!j.is_array()) throw ParseError("mock rule file must be a json list", 0);
  std::vector<MockRule> rules;
  for (const auto& r : j) rules.push_back({r.at("pattern").get<std::string>(), r.at("response").get<std::string>()});
  return rules;
}

void write_mock_rules(const std::filesystem::path& path, const std::vector<MockRule>& rules) {
  json j = json::array();
  for (const auto& r : rules) j.push_back({{"pattern", r.pattern}, {"response", r.response}});
  write_file_atomic(path, j.dump(1) + "\n");
}

AuditedGateway::AuditedGateway(Gateway& inner, std::filesystem::path log_path, std::string provider)
    : inner_(inner), log_path_(std::move(log_path)), provider_(std::move(provider)) {
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
}

Completion AuditedGateway::complete(const CompletionRequest& req) {
  std::size_t id;
  {
    std::lock_guard lock(mu_);
    id = seq_++;
    std::ofstream(log_path_, std::ios::app) << json{{"seq", id},
                                                    {"direction", "request"},
                                                    {"provider", provider_},
                                                    {"model", req.model_name},
                                                    {"sha256", sha256_hex(req.prompt)},
                                                    {"bytes", req.prompt.size()}}
                                                   .dump()
                                            << '\n';
  }
  try {
    Completion c = inner_.complete(req);
    std::lock_guard lock(mu_);
    std::ofstream(log_path_, std::ios::app) << json{{"seq", id},
                                                    {"direction", "response"},
                                                    {"provider", provider_},
                                                    {"sha256", sha256_hex(c.text)},
                                                    {"bytes", c.text.size()}}
                                                   .dump()
                                            << '\n';
    return c;
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    std::ofstream(log_path_, std::ios::app)
        << json{{"seq", id}, {"direction", "error"}, {"provider", provider_}, {"error", e.what()}}.dump() << '\n';
    throw;
  }
}

}  // namespace userprof
