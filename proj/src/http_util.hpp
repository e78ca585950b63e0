#pragma once

#include <string>
#include <string_view>

namespace userprof::detail {

/// "http://host:port/path" split into the client base and request path.
struct Endpoint {
  std::string base;
  std::string path;
};

inline Endpoint split_endpoint(std::string_view url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

}  // namespace userprof::detail
