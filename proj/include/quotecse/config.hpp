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

// key=value run configuration shared by the command line tools.
//
//   # comment
//   loss = quotecse
//   temperature = 0.05
//
// Unknown keys and unparsable values are all reported together.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/contrastive.hpp"
#include "quotecse/detection.hpp"
#include "quotecse/encoder.hpp"
#include "quotecse/errors.hpp"
#include "quotecse/rng.hpp"
#include "quotecse/text.hpp"

namespace quotecse {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in, const std::string& origin = "config") {
  KeyValues kv;
  std::vector<std::string> bad;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = text::trim(std::string_view(line));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      bad.push_back(origin + ":" + std::to_string(n) + ": expected key = value");
      continue;
    }
    kv[text::trim(std::string_view(t).substr(0, eq))] = text::trim(std::string_view(t).substr(eq + 1));
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return kv;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  return parse_key_values(in, path);
}

struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
  ClassifierConfig classifier;
};

namespace detail {

template <class T>
bool parse_number(const std::string& s, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = std::stod(s, &used);
      return used == s.size();
    } catch (...) {
      return false;
    }
  } else {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "on" || s == "true" || s == "1") return out = true, true;
  if (s == "off" || s == "false" || s == "0") return out = false, true;
  return false;
}

using Setter = std::function<bool(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // contrastive training
      {"temperature", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.temperature) && c.train.temperature > 0; }},
      {"batch_size", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.batch_size) && c.train.batch_size > 0; }},
      {"learning_rate", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.learning_rate) && c.train.learning_rate >= 0; }},
      {"max_epochs", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.max_epochs); }},
      {"queue_size", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.queue_size) && c.train.queue_size > 0; }},
      {"momentum", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.momentum) && c.train.momentum > 0 && c.train.momentum <= 1; }},
      {"seed", [](RunConfig& c, const std::string& v) { return parse_number(v, c.train.seed); }},
      {"loss", [](RunConfig& c, const std::string& v) {
         auto k = parse_loss_kind(v);
         if (k) c.train.loss = *k;
         return k.has_value();
       }},
      {"moco", [](RunConfig& c, const std::string& v) { return parse_bool(v, c.train.moco); }},
      {"reassign", [](RunConfig& c, const std::string& v) { return parse_bool(v, c.train.reassign); }},
      {"freeze_negatives", [](RunConfig& c, const std::string& v) { return parse_bool(v, c.train.freeze_negatives); }},
      // encoder
      {"input_dim", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.input_dim) && c.encoder.input_dim > 0; }},
      {"projection_hidden_dim", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.projection_hidden_dim) && c.encoder.projection_hidden_dim > 0; }},
      {"projection_output_dim", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.projection_output_dim) && c.encoder.projection_output_dim > 0; }},
      {"dropout_rate", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.dropout_rate) && c.encoder.dropout_rate >= 0 && c.encoder.dropout_rate < 1; }},
      {"ngram_min", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.ngram_min) && c.encoder.ngram_min > 0; }},
      {"ngram_max", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.ngram_max) && c.encoder.ngram_max > 0; }},
      {"hash_seed", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.hash_seed); }},
      {"init_seed", [](RunConfig& c, const std::string& v) { return parse_number(v, c.encoder.init_seed); }},
      // detection head
      {"classifier_learning_rate", [](RunConfig& c, const std::string& v) { return parse_number(v, c.classifier.learning_rate) && c.classifier.learning_rate >= 0; }},
      {"classifier_batch_size", [](RunConfig& c, const std::string& v) { return parse_number(v, c.classifier.batch_size) && c.classifier.batch_size > 0; }},
      {"classifier_max_epochs", [](RunConfig& c, const std::string& v) { return parse_number(v, c.classifier.max_epochs); }},
      {"classifier_validation_fraction", [](RunConfig& c, const std::string& v) { return parse_number(v, c.classifier.validation_fraction) && c.classifier.validation_fraction >= 0 && c.classifier.validation_fraction < 1; }},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

// Applies `kv` on top of `base`; throws ConfigError naming every bad key.
inline RunConfig apply_key_values(RunConfig base, const KeyValues& kv) {
  std::vector<std::string> bad;
  const auto& table = detail::setters();
  for (const auto& [k, v] : kv) {
    auto it = table.find(k);
    if (it == table.end()) {
      bad.push_back("unknown key '" + k + "'");
      continue;
    }
    if (!it->second(base, v)) bad.push_back("invalid value for '" + k + "': '" + v + "'");
  }
  if (base.encoder.ngram_min > base.encoder.ngram_max) bad.push_back("ngram_min must not exceed ngram_max");
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return base;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["temperature"] = c.train.temperature;
  j["batch_size"] = c.train.batch_size;
  j["learning_rate"] = c.train.learning_rate;
  j["max_epochs"] = c.train.max_epochs;
  j["queue_size"] = c.train.queue_size;
  j["momentum"] = c.train.momentum;
  j["seed"] = c.train.seed;
  j["loss"] = std::string(to_string(c.train.loss));
  j["moco"] = c.train.moco;
  j["reassign"] = c.train.reassign;
  j["freeze_negatives"] = c.train.freeze_negatives;
  j["input_dim"] = c.encoder.input_dim;
  j["projection_hidden_dim"] = c.encoder.projection_hidden_dim;
  j["projection_output_dim"] = c.encoder.projection_output_dim;
  j["dropout_rate"] = c.encoder.dropout_rate;
  j["ngram_min"] = c.encoder.ngram_min;
  j["ngram_max"] = c.encoder.ngram_max;
  j["hash_seed"] = c.encoder.hash_seed;
  j["init_seed"] = c.encoder.init_seed;
  j["classifier_learning_rate"] = c.classifier.learning_rate;
  j["classifier_batch_size"] = c.classifier.batch_size;
  j["classifier_max_epochs"] = c.classifier.max_epochs;
  j["classifier_validation_fraction"] = c.classifier.validation_fraction;
  return j;
}

// Hash of the canonical (sorted-key) JSON dump.
inline std::string config_hash(const nlohmann::json& snapshot) { return text::hex64(fnv1a64(snapshot.dump())); }

}  // namespace quotecse
