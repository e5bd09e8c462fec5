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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace envforge {

// Writes content to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Throws ParseError when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string to_lower(std::string_view text);
std::string_view trim_view(std::string_view text);

// application/x-www-form-urlencoded helpers.
std::string url_encode(std::string_view text);
std::string url_decode(std::string_view text);

}  // namespace envforge
