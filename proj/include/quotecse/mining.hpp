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

// Anchor / positive / hard-negative assignment from a single article.
//
// The anchor is the headline quote. Among the body quotes, the one most
// similar to the anchor under the assigning encoder is the positive and one
// of the rest, drawn uniformly, is the hard negative. Articles with fewer than
// two body quotes, or whose headline quote appears verbatim in the body, carry
// no training signal and are skipped.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/corpus.hpp"
#include "quotecse/encoder.hpp"
#include "quotecse/errors.hpp"
#include "quotecse/rng.hpp"

namespace quotecse {

inline constexpr double kDefaultSimilarityThreshold = 0.75;

struct MinedTriplet {
  std::string article_id;
  Quote anchor;
  Quote positive;
  Quote negative;
  double anchor_positive_sim = 0.0;
  std::string assigner;
};

enum class MiningOutcome { kept, no_headline_quote, no_body_pair, identical, below_threshold };

// The first headline quote by span order.
inline const Quote* anchor_quote(const Article& a) {
  if (a.headline_quotes.empty()) return nullptr;
  return &*std::min_element(a.headline_quotes.begin(), a.headline_quotes.end(),
                            [](const Quote& x, const Quote& y) { return x.span.start < y.span.start; });
}

// Rule check that does not need an encoder.
inline MiningOutcome precheck(const Article& a) {
  const Quote* anchor = anchor_quote(a);
  if (!anchor) return MiningOutcome::no_headline_quote;
  if (a.body_quotes.size() < 2) return MiningOutcome::no_body_pair;
  if (is_identical_quote(*anchor, a.body_quotes)) return MiningOutcome::identical;
  return MiningOutcome::kept;
}

// Index of the maximum, ties to the lowest index.
inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// `fixed_negative`, when given and still distinct from the new positive, is
// kept instead of drawing a fresh negative.
template <TextEncoder E>
std::optional<MinedTriplet> assign_samples(const Article& article, const E& enc, std::uint64_t rng_seed,
                                           std::optional<std::size_t> fixed_negative = std::nullopt) {
  if (precheck(article) != MiningOutcome::kept) return std::nullopt;
  const Quote& anchor = *anchor_quote(article);
  const Embedding a = enc.encode(anchor.text);
  std::vector<double> sims;
  sims.reserve(article.body_quotes.size());
  for (const auto& q : article.body_quotes) sims.push_back(cosine_sim(a, enc.encode(q.text)));
  const std::size_t pos = argmax_first(sims);
  std::size_t neg;
  if (fixed_negative && *fixed_negative != pos && *fixed_negative < article.body_quotes.size()) {
    neg = *fixed_negative;
  } else {
    Rng rng(rng_seed);
    neg = rng.uniform_index(article.body_quotes.size() - 1);
    if (neg >= pos) ++neg;
  }
  return MinedTriplet{article.id, anchor, article.body_quotes[pos], article.body_quotes[neg], sims[pos],
                      enc.identifier()};
}

inline bool filter_by_threshold(const MinedTriplet& t, double threshold = kDefaultSimilarityThreshold) {
  return t.anchor_positive_sim >= threshold;
}

// A mined triplet and its source article.
struct TrainingItem {
  Article article;
  MinedTriplet triplet;
};

inline std::uint64_t article_seed(std::uint64_t seed, const std::string& article_id) {
  return mix_seed({seed, fnv1a64(article_id)});
}

inline std::uint64_t reassignment_seed(std::uint64_t seed, const std::string& article_id, std::uint64_t step) {
  return mix_seed({seed, fnv1a64(article_id), step});
}

// Recomputes every assignment in the batch with the current encoder. The
// similarity threshold is not re-applied. Articles that no longer qualify are
// skipped for this step.
template <TextEncoder E>
std::vector<MinedTriplet> reassign_batch(std::span<const TrainingItem> batch, const E& current, std::uint64_t step,
                                         std::uint64_t seed = 0, bool freeze_negatives = false) {
  std::vector<MinedTriplet> out;
  out.reserve(batch.size());
  for (const auto& item : batch) {
    std::optional<std::size_t> fixed;
    if (freeze_negatives) fixed = item.triplet.negative.index;
    if (auto t = assign_samples(item.article, current, reassignment_seed(seed, item.article.id, step), fixed))
      out.push_back(std::move(*t));
  }
  return out;
}

struct MiningStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t no_headline_quote = 0;
  std::size_t no_body_pair = 0;
  std::size_t identical = 0;
  std::size_t below_threshold = 0;

  std::size_t dropped() const noexcept { return no_headline_quote + no_body_pair + identical + below_threshold; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["total"] = total;
    j["kept"] = kept;
    j["dropped"] = {{"no_headline_quote", no_headline_quote},
                    {"no_body_pair", no_body_pair},
                    {"identical", identical},
                    {"below_threshold", below_threshold}};
    return j;
  }
};

struct MiningResult {
  std::vector<TrainingItem> kept;  // input order
  MiningStats stats;
  std::vector<TrainingItem> train, val, test;
};

// Fractions of the kept set going to train and validation; the rest is test.
inline constexpr double kMiningTrainFraction = 0.8;
inline constexpr double kMiningValFraction = 0.1;

template <TextEncoder E>
MiningResult mine_corpus(std::span<const Article> articles, const E& enc, double threshold = kDefaultSimilarityThreshold,
                         std::uint64_t seed = 0) {
  MiningResult r;
  r.stats.total = articles.size();
  for (const auto& a : articles) {
    switch (precheck(a)) {
      case MiningOutcome::no_headline_quote: ++r.stats.no_headline_quote; continue;
      case MiningOutcome::no_body_pair: ++r.stats.no_body_pair; continue;
      case MiningOutcome::identical: ++r.stats.identical; continue;
      default: break;
    }
    std::optional<MinedTriplet> t;
    try {
      t = assign_samples(a, enc, article_seed(seed, a.id));
    } catch (const std::exception& e) {
      throw DataError("article " + a.id + ": " + e.what());
    }
    if (!filter_by_threshold(*t, threshold)) {
      ++r.stats.below_threshold;
      continue;
    }
    ++r.stats.kept;
    r.kept.push_back({a, std::move(*t)});
  }
  const std::size_t n = r.kept.size();
  const auto order = shuffled_indices(n, mix_seed({seed, 0x53504c4954ULL}));
  const std::size_t n_train = train_count(n, kMiningTrainFraction);
  const std::size_t n_val = std::min(n - n_train, train_count(n, kMiningValFraction));
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = k < n_train ? r.train : (k < n_train + n_val ? r.val : r.test);
    dst.push_back(r.kept[order[k]]);
  }
  return r;
}

// Triplet JSONL. Besides the documented fields each record carries the
// article's body quotes and the chosen indices so training can re-run the
// assignment without the article file.
inline nlohmann::json triplet_to_json(const TrainingItem& item) {
  const auto& t = item.triplet;
  nlohmann::json body = nlohmann::json::array();
  for (const auto& q : item.article.body_quotes) body.push_back(q.text);
  nlohmann::json j;
  j["article_id"] = t.article_id;
  j["anchor"] = t.anchor.text;
  j["positive"] = t.positive.text;
  j["negative"] = t.negative.text;
  j["anchor_positive_sim"] = t.anchor_positive_sim;
  j["assigner"] = t.assigner;
  j["positive_index"] = t.positive.index;
  j["negative_index"] = t.negative.index;
  j["body_quotes"] = std::move(body);
  return j;
}

inline TrainingItem parse_triplet(std::string_view json_line, std::size_t line = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw DataError("record must be a JSON object", line);
  TrainingItem item;
  auto& t = item.triplet;
  t.article_id = detail::require_string(j, "article_id", line);
  const std::string anchor = detail::require_string(j, "anchor", line);
  const std::string positive = detail::require_string(j, "positive", line);
  const std::string negative = detail::require_string(j, "negative", line);
  const auto& sim = detail::require_field(j, "anchor_positive_sim", line);
  if (!sim.is_number()) throw DataError("anchor_positive_sim must be a number", line);
  t.anchor_positive_sim = sim.get<double>();
  t.assigner = j.value("assigner", std::string());

  item.article.id = t.article_id;
  item.article.headline_quotes.push_back(standalone_quote(anchor, QuoteSource::headline, 0));
  t.anchor = item.article.headline_quotes.front();
  if (auto it = j.find("body_quotes"); it != j.end() && it->is_array() && it->size() >= 2) {
    for (const auto& b : *it) {
      if (!b.is_string()) throw DataError("body_quotes entries must be strings", line);
      item.article.body_quotes.push_back(
          standalone_quote(b.get<std::string>(), QuoteSource::body, item.article.body_quotes.size()));
    }
    const auto& bq = item.article.body_quotes;
    auto pick = [&](const char* key, const std::string& txt) {
      std::size_t idx = j.value(key, bq.size());
      if (idx >= bq.size() || bq[idx].text != txt) {
        auto it2 = std::find_if(bq.begin(), bq.end(), [&](const Quote& q) { return q.text == txt; });
        if (it2 == bq.end()) throw DataError(std::string(key) + " text not found among body_quotes", line);
        idx = static_cast<std::size_t>(it2 - bq.begin());
      }
      return bq[idx];
    };
    t.positive = pick("positive_index", positive);
    t.negative = pick("negative_index", negative);
  } else {
    // Bare record: the article is reduced to its positive and negative.
    item.article.body_quotes.push_back(standalone_quote(positive, QuoteSource::body, 0));
    item.article.body_quotes.push_back(standalone_quote(negative, QuoteSource::body, 1));
    t.positive = item.article.body_quotes[0];
    t.negative = item.article.body_quotes[1];
  }
  return item;
}

inline std::vector<TrainingItem> load_triplets(const std::string& path) {
  std::vector<TrainingItem> out;
  for_each_line(path, [&](const std::string& line, std::size_t n) { out.push_back(parse_triplet(line, n)); });
  return out;
}

}  // namespace quotecse
