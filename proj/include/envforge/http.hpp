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

#pragma once

#include <chrono>
#include <map>
#include <string>

namespace envforge {

struct HttpResponse {
  int status = 0;
  std::string body;
  // Path of the final resource after redirects, relative to the host.
  std::string final_path;
};

struct HttpRequest {
  std::string method = "GET";
  std::string url;  // scheme://host[:port]/path
  std::map<std::string, std::string> headers;
  std::string body;
  std::string content_type;
  std::chrono::milliseconds timeout{5000};
  bool follow_redirects = true;
};

// Throws TransportError when no HTTP response was received.
HttpResponse http_send(const HttpRequest& request);

// Status class label, e.g. 200 -> "2xx". 0 -> "none".
std::string status_class(int status);

}  // namespace envforge
