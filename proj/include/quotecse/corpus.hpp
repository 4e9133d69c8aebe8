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

// News articles, direct-quote extraction and labeled detection examples.
//
// Offsets are code point offsets into the (NFC-normalized) source text, so a
// span can be applied the same way by any consumer regardless of how it
// stores strings.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/errors.hpp"
#include "quotecse/rng.hpp"
#include "quotecse/text.hpp"

namespace quotecse {

enum class QuoteSource { headline, body };

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct Quote {
  std::string text;  // delimiters stripped, whitespace trimmed
  Span span;         // includes the delimiters
  QuoteSource source = QuoteSource::body;
  std::size_t index = 0;  // position among quotes of the same source
  bool operator==(const Quote&) const = default;
};

struct DelimiterPair {
  char32_t open;
  char32_t close;
};

// Double-quote family only. Single quotes are mostly emphasis in news copy.
inline std::vector<DelimiterPair> default_delimiters() {
  return {{U'"', U'"'}, {U'“', U'”'}, {U'『', U'』'}, {U'「', U'」'}};
}

inline constexpr std::size_t kMinQuoteLength = 2;

// Scans left to right. An opening mark claims everything up to the first
// matching close; marks in between are not re-matched. An open with no close
// produces nothing and scanning resumes right after it.
inline std::vector<Quote> extract_quotes(std::string_view text, std::span<const DelimiterPair> delimiters,
                                         QuoteSource source = QuoteSource::body,
                                         std::size_t min_length = kMinQuoteLength) {
  if (delimiters.empty()) throw std::invalid_argument("extract_quotes: delimiter set is empty");
  const std::u32string cps = text::decode_utf8(text);
  std::vector<Quote> quotes;
  std::size_t i = 0;
  while (i < cps.size()) {
    const auto pair = std::find_if(delimiters.begin(), delimiters.end(),
                                   [&](const DelimiterPair& d) { return d.open == cps[i]; });
    if (pair == delimiters.end()) {
      ++i;
      continue;
    }
    const std::size_t close = cps.find(pair->close, i + 1);
    if (close == std::u32string::npos) {
      ++i;
      continue;
    }
    const std::u32string inner =
        text::trim(std::u32string_view(cps).substr(i + 1, close - i - 1));
    if (inner.size() >= min_length) {
      Quote q;
      q.text = text::encode_utf8(inner);
      q.span = {i, close + 1};
      q.source = source;
      q.index = quotes.size();
      quotes.push_back(std::move(q));
    }
    i = close + 1;
  }
  return quotes;
}

inline std::vector<Quote> extract_quotes(std::string_view text, QuoteSource source = QuoteSource::body) {
  const auto d = default_delimiters();
  return extract_quotes(text, d, source);
}

inline bool is_identical_quote(const Quote& headline_quote, std::span<const Quote> body_quotes) {
  const std::string key = text::canonicalize_whitespace(headline_quote.text);
  return std::any_of(body_quotes.begin(), body_quotes.end(), [&](const Quote& q) {
    return text::canonicalize_whitespace(q.text) == key;
  });
}

struct Article {
  std::string id;
  std::string title;
  std::string body;
  std::vector<Quote> headline_quotes;
  std::vector<Quote> body_quotes;
};

inline Article make_article(std::string id, std::string title, std::string body,
                            std::span<const DelimiterPair> delimiters) {
  Article a{std::move(id), std::move(title), std::move(body), {}, {}};
  a.headline_quotes = extract_quotes(a.title, delimiters, QuoteSource::headline);
  a.body_quotes = extract_quotes(a.body, delimiters, QuoteSource::body);
  return a;
}

// Quotes whose position in a source text is unknown (labeled examples,
// triplet records) are given the span they would have as a standalone
// delimited string.
inline Quote standalone_quote(std::string text, QuoteSource source, std::size_t index) {
  const std::size_t n = text::codepoint_length(text);
  return Quote{std::move(text), Span{0, n + 2}, source, index};
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing required field '") + key + "'", line);
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto& v = require_field(obj, key, line);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string", line);
  return v.get<std::string>();
}

inline std::vector<Quote> parse_quotes(const nlohmann::json& arr, QuoteSource source, std::size_t text_len,
                                       std::size_t line) {
  if (!arr.is_array()) throw DataError("quote list must be an array", line);
  std::vector<Quote> out;
  for (const auto& item : arr) {
    if (!item.is_object()) throw DataError("quote must be an object", line);
    Quote q;
    q.text = text::nfc(require_string(item, "text", line));
    const auto& span = require_field(item, "span", line);
    if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() || !span[1].is_number_unsigned())
      throw DataError("quote span must be [start, end] with non-negative integers", line);
    q.span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
    if (q.span.start >= q.span.end || q.span.end > text_len)
      throw DataError("quote span out of range", line);
    if (!out.empty() && q.span.start < out.back().span.end)
      throw DataError("quote spans must be increasing and non-overlapping", line);
    if (text::trim(q.text).empty()) throw DataError("quote text is empty", line);
    q.source = source;
    q.index = out.size();
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace detail

// One JSONL record. `line` only labels errors.
inline Article parse_article(std::string_view json_line, std::span<const DelimiterPair> delimiters,
                             std::size_t line = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw DataError("record must be a JSON object", line);
  Article a;
  a.id = text::nfc(detail::require_string(j, "id", line));
  a.title = text::nfc(detail::require_string(j, "title", line));
  a.body = text::nfc(detail::require_string(j, "body", line));
  if (auto it = j.find("headline_quotes"); it != j.end())
    a.headline_quotes =
        detail::parse_quotes(*it, QuoteSource::headline, text::codepoint_length(a.title), line);
  else
    a.headline_quotes = extract_quotes(a.title, delimiters, QuoteSource::headline);
  if (auto it = j.find("body_quotes"); it != j.end())
    a.body_quotes = detail::parse_quotes(*it, QuoteSource::body, text::codepoint_length(a.body), line);
  else
    a.body_quotes = extract_quotes(a.body, delimiters, QuoteSource::body);
  return a;
}

template <class Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(std::string_view(line)).empty()) continue;
    fn(line, lineno);
  }
  if (in.bad()) throw IoError("read error on " + path);
}

inline std::vector<Article> load_articles(const std::string& path, std::span<const DelimiterPair> delimiters) {
  std::vector<Article> out;
  for_each_line(path, [&](const std::string& line, std::size_t n) { out.push_back(parse_article(line, delimiters, n)); });
  return out;
}

inline std::vector<Article> load_articles(const std::string& path) {
  const auto d = default_delimiters();
  return load_articles(path, d);
}

inline nlohmann::json quote_to_json(const Quote& q) {
  return {{"text", q.text}, {"span", {q.span.start, q.span.end}}};
}

inline nlohmann::json article_to_json(const Article& a) {
  nlohmann::json hq = nlohmann::json::array(), bq = nlohmann::json::array();
  for (const auto& q : a.headline_quotes) hq.push_back(quote_to_json(q));
  for (const auto& q : a.body_quotes) bq.push_back(quote_to_json(q));
  nlohmann::json j;
  j["id"] = a.id;
  j["title"] = a.title;
  j["body"] = a.body;
  j["headline_quotes"] = std::move(hq);
  j["body_quotes"] = std::move(bq);
  return j;
}

enum class Label : int { modified = 0, contextomized = 1 };

struct DetectionExample {
  std::string article_id;
  Quote headline_quote;
  std::vector<Quote> body_quotes;
  Label label = Label::modified;
};

inline nlohmann::json example_to_json(const DetectionExample& e) {
  nlohmann::json bq = nlohmann::json::array();
  for (const auto& q : e.body_quotes) bq.push_back(q.text);
  nlohmann::json j;
  j["article_id"] = e.article_id;
  j["headline_quote"] = e.headline_quote.text;
  j["body_quotes"] = std::move(bq);
  j["label"] = static_cast<int>(e.label);
  return j;
}

namespace detail {

inline nlohmann::json parse_object(std::string_view json_line, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw DataError("record must be a JSON object", line);
  return j;
}

// Example-schema record; the label is read only when `need_label` or present.
inline DetectionExample example_from_json(const nlohmann::json& j, bool need_label, std::size_t line) {
  DetectionExample ex;
  ex.article_id = text::nfc(require_string(j, "article_id", line));
  std::string head = text::trim(text::nfc(require_string(j, "headline_quote", line)));
  if (head.empty()) throw DataError("headline_quote is empty", line);
  ex.headline_quote = standalone_quote(std::move(head), QuoteSource::headline, 0);
  const auto& body = require_field(j, "body_quotes", line);
  if (!body.is_array() || body.empty()) throw DataError("body_quotes must be a non-empty array", line);
  for (const auto& b : body) {
    if (!b.is_string()) throw DataError("body_quotes entries must be strings", line);
    std::string t = text::trim(text::nfc(b.get<std::string>()));
    if (t.empty()) throw DataError("body quote is empty", line);
    ex.body_quotes.push_back(standalone_quote(std::move(t), QuoteSource::body, ex.body_quotes.size()));
  }
  if (need_label || j.contains("label")) {
    const auto& label = require_field(j, "label", line);
    if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1))
      throw DataError("label must be 0 or 1", line);
    ex.label = static_cast<Label>(label.get<int>());
  }
  return ex;
}

}  // namespace detail

// Returns nullopt when the record violates the identical-quote exclusion.
inline std::optional<DetectionExample> parse_detection_example(std::string_view json_line, std::size_t line = 0) {
  DetectionExample ex = detail::example_from_json(detail::parse_object(json_line, line), true, line);
  if (is_identical_quote(ex.headline_quote, ex.body_quotes)) return std::nullopt;
  return ex;
}

// Input to detection: an example-schema record with an optional label, or an
// article record, of which the first headline quote and the body quotes are
// used. Articles without a headline quote or body quotes give nullopt.
struct DetectionInput {
  DetectionExample example;
  bool labeled = false;
};

inline std::optional<DetectionInput> parse_detection_input(std::string_view json_line,
                                                           std::span<const DelimiterPair> delimiters,
                                                           std::size_t line = 0) {
  const nlohmann::json j = detail::parse_object(json_line, line);
  DetectionInput in;
  if (j.contains("headline_quote")) {
    in.labeled = j.contains("label");
    in.example = detail::example_from_json(j, false, line);
    return in;
  }
  const Article a = parse_article(json_line, delimiters, line);
  if (a.headline_quotes.empty() || a.body_quotes.empty()) return std::nullopt;
  const auto first = std::min_element(a.headline_quotes.begin(), a.headline_quotes.end(),
                                      [](const Quote& x, const Quote& y) { return x.span.start < y.span.start; });
  in.example.article_id = a.id;
  in.example.headline_quote = *first;
  in.example.body_quotes = a.body_quotes;
  return in;
}

struct LabeledLoad {
  std::vector<DetectionExample> examples;
  std::size_t excluded_identical = 0;
};

inline LabeledLoad load_detection_examples(const std::string& path) {
  LabeledLoad out;
  for_each_line(path, [&](const std::string& line, std::size_t n) {
    if (auto ex = parse_detection_example(line, n))
      out.examples.push_back(std::move(*ex));
    else
      ++out.excluded_identical;
  });
  return out;
}

// Seeded shuffle of indices 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
  double train_contextomized_fraction = 0.0;
  double test_contextomized_fraction = 0.0;
};

inline std::size_t train_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

// Index-level split: the first round(ratio * n) shuffled indices train.
struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline IndexSplit split_indices(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split: ratio must be in (0, 1)");
  if (n == 0) throw std::invalid_argument("split: no examples");
  const auto order = shuffled_indices(n, seed);
  const std::size_t n_train = train_count(n, ratio);
  IndexSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

inline Split<DetectionExample> split_labeled(std::span<const DetectionExample> examples, double ratio,
                                             std::uint64_t seed) {
  const IndexSplit idx = split_indices(examples.size(), ratio, seed);
  Split<DetectionExample> s;
  for (auto i : idx.train) s.train.push_back(examples[i]);
  for (auto i : idx.test) s.test.push_back(examples[i]);
  auto frac = [](const std::vector<DetectionExample>& v) {
    if (v.empty()) return 0.0;
    const auto pos = std::count_if(v.begin(), v.end(), [](const auto& e) { return e.label == Label::contextomized; });
    return static_cast<double>(pos) / static_cast<double>(v.size());
  };
  s.train_contextomized_fraction = frac(s.train);
  s.test_contextomized_fraction = frac(s.test);
  return s;
}

}  // namespace quotecse
