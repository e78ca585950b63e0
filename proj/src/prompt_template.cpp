#include <cctype>
#include <fstream>

#include "default_templates.hpp"
#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/llm_gateway.hpp"

namespace userprof {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls on_text(literal) and on_var(name) while scanning `body`.
template <class Text, class Var>
void scan(const std::string& body, Text on_text, Var on_var) {
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if ((c == '{' || c == '}') && i + 1 < body.size() && body[i + 1] == c) {
      on_text(std::string_view(&body[i], 1));
      i += 2;
      continue;
    }
    if (c == '{' && i + 1 < body.size() && ident_start(body[i + 1])) {
      std::size_t j = i + 1;
      while (j < body.size() && ident_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        on_var(body.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(std::string_view(&body[i], 1));
    ++i;
  }
}

}  // namespace

std::vector<std::string> template_placeholders(const std::string& body) {
  std::vector<std::string> names;
  scan(body, [](std::string_view) {}, [&](std::string name) { names.push_back(std::move(name)); });
  return names;
}

PromptTemplate::PromptTemplate(std::string name, std::string body, std::set<std::string> required_vars)
    : name_(std::move(name)), body_(std::move(body)), required_(std::move(required_vars)) {
  auto found = template_placeholders(body_);
  std::set<std::string> present(found.begin(), found.end());
  for (const auto& v : required_) {
    if (!present.count(v)) throw InvalidArgument("template '" + name_ + "' declares '" + v + "' but never uses it");
  }
}

PromptTemplate PromptTemplate::from_body(std::string name, std::string body) {
  auto found = template_placeholders(body);
  return PromptTemplate(std::move(name), std::move(body), std::set<std::string>(found.begin(), found.end()));
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return from_body(path.stem().string(), read_file(path));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars) const {
  for (const auto& v : required_) {
    if (!vars.count(v)) throw InvalidArgument("template '" + name_ + "' is missing variable '" + v + "'");
  }
  std::string out;
  out.reserve(body_.size());
  scan(
      body_, [&](std::string_view t) { out.append(t); },
      [&](const std::string& name) {
        if (!required_.count(name)) {
          throw InvalidArgument("template '" + name_ + "' has undeclared placeholder '" + name + "'");
        }
        out.append(vars.at(name));
      });
  return out;
}

PromptTemplate default_template(const std::string& name) {
  for (const auto& [n, body] : detail::kDefaultTemplates) {
    if (name == n) return PromptTemplate::from_body(name, std::string(body));
  }
  throw NotFound("no built-in template named '" + name + "'");
}

}  // namespace userprof
