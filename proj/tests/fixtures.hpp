/*
 * Copyright 2026 The quotecse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Filesystem and process helpers for tests.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <map>

#include "quotecse/encoder.hpp"
#include "quotecse/rng.hpp"

namespace quotecse::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "quotecse") {
    static std::uint64_t counter = 0;
    const auto stamp = mix_seed({static_cast<std::uint64_t>(::getpid()), ++counter,
                                 static_cast<std::uint64_t>(std::hash<std::string>{}(tag))});
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(stamp));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Encoder with planted embeddings, keyed by exact text.
class PlantedEncoder {
 public:
  void set(const std::string& text, Vector v) { table_[text] = std::move(v); }
  Embedding encode(std::string_view text) const {
    auto it = table_.find(std::string(text));
    if (it == table_.end()) throw std::out_of_range("planted encoder: unknown text " + std::string(text));
    return Embedding{it->second, false};
  }
  std::string identifier() const { return "planted:" + std::to_string(version_); }
  void bump() { ++version_; }

 private:
  std::map<std::string, Vector> table_;
  int version_ = 0;
};

// Unit vector in the plane with cosine `c` to (1, 0).
inline Vector at_cosine(double c) { return {c, std::sqrt(1.0 - c * c)}; }

}  // namespace quotecse::testing
