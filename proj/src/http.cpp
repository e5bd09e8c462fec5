/* Copyright 2026 The envforge Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// The only translation unit that includes cpp-httplib.
#include "envforge/http.hpp"

#include <httplib.h>

#include "envforge/error.hpp"

namespace envforge {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string path;    // /path?query
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ContractError("url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse http_send(const HttpRequest& request) {
  const SplitUrl parts = split_url(request.url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(request.timeout);
  client.set_read_timeout(request.timeout);
  client.set_write_timeout(request.timeout);
  client.set_follow_location(request.follow_redirects);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  const std::string content_type = request.content_type.empty()
                                       ? "application/x-www-form-urlencoded"
                                       : request.content_type;

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(parts.path, headers);
  } else if (request.method == "POST") {
    result = client.Post(parts.path, headers, request.body, content_type);
  } else {
    throw ContractError("unsupported HTTP method " + request.method);
  }
  if (!result)
    throw TransportError(request.method + " " + request.url + ": " +
                         httplib::to_string(result.error()));

  HttpResponse response;
  response.status = result->status;
  response.body = std::move(result->body);
  response.final_path = parts.path;
  if (!result->location.empty()) {
    const std::string& loc = result->location;
    auto scheme_end = loc.find("://");
    if (scheme_end == std::string::npos) {
      response.final_path = loc;
    } else {
      auto p = loc.find('/', scheme_end + 3);
      response.final_path = p == std::string::npos ? "/" : loc.substr(p);
    }
  }
  return response;
}

std::string status_class(int status) {
  if (status < 100 || status > 599) return "none";
  return std::to_string(status / 100) + "xx";
}

}  // namespace envforge
