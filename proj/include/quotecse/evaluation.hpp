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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/corpus.hpp"
#include "quotecse/detection.hpp"
#include "quotecse/encoder.hpp"
#include "quotecse/mining.hpp"
#include "quotecse/rng.hpp"

namespace quotecse {

namespace detail {
inline void check_binary(std::span<const int> v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1) throw std::invalid_argument(std::string(what) + ": values must be 0 or 1");
}
}  // namespace detail

// F1 of `positive_class`; 0 when precision + recall is 0.
inline double f1_score(std::span<const int> predictions, std::span<const int> labels, int positive_class = 1) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("f1_score: length mismatch");
  if (labels.empty()) throw std::invalid_argument("f1_score: empty input");
  detail::check_binary(predictions, "f1_score");
  detail::check_binary(labels, "f1_score");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive_class, y = labels[i] == positive_class;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// Mann-Whitney statistic: P(score of random positive > random negative), ties
// counting one half. Computed from average ranks.
inline double auc_score(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_score: length mismatch");
  detail::check_binary(labels, "auc_score");
  const std::size_t n = scores.size();
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc_score: both classes must be present");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]] == 1) rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// Mean squared distance over positive pairs.
inline double alignment(std::span<const std::pair<Vector, Vector>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("alignment: no pairs");
  double s = 0.0;
  for (const auto& [x, y] : pairs) s += squared_distance(x, y);
  return s / static_cast<double>(pairs.size());
}

struct UniformitySampling {
  std::size_t pairs = 0;
  std::uint64_t seed = 0;
};

// log mean exp(-2 |x - y|^2) over all unordered distinct pairs, or over
// `sampling.pairs` random distinct pairs when sampling is requested.
inline double uniformity(std::span<const Vector> points, std::optional<UniformitySampling> sampling = std::nullopt) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("uniformity: need at least two points");
  std::vector<double> terms;
  if (sampling && sampling->pairs > 0) {
    Rng rng(sampling->seed);
    terms.reserve(sampling->pairs);
    for (std::size_t s = 0; s < sampling->pairs; ++s) {
      const std::size_t i = rng.uniform_index(n);
      std::size_t j = rng.uniform_index(n - 1);
      if (j >= i) ++j;
      terms.push_back(-2.0 * squared_distance(points[i], points[j]));
    }
  } else {
    terms.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) terms.push_back(-2.0 * squared_distance(points[i], points[j]));
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double z = 0.0;
  for (double t : terms) z += std::exp(t - mx);
  return mx + std::log(z / static_cast<double>(terms.size()));
}

// Descending by score; equal scores keep input order.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

inline double precision_at_k(std::span<const double> scores, std::span<const int> labels, std::size_t k) {
  if (scores.size() != labels.size()) throw std::invalid_argument("precision_at_k: length mismatch");
  if (k < 1 || k > scores.size()) throw std::invalid_argument("precision_at_k: k out of range");
  detail::check_binary(labels, "precision_at_k");
  const auto idx = rank_by_score(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += labels[idx[r]] == 1;
  return static_cast<double>(hits) / static_cast<double>(k);
}

// precision@k for k = 1..k_max.
inline std::vector<double> precision_at_k_curve(std::span<const double> scores, std::span<const int> labels,
                                                std::size_t k_max) {
  if (scores.size() != labels.size()) throw std::invalid_argument("precision_at_k: length mismatch");
  if (k_max < 1 || k_max > scores.size()) throw std::invalid_argument("precision_at_k: k out of range");
  detail::check_binary(labels, "precision_at_k");
  const auto idx = rank_by_score(scores);
  std::vector<double> out;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k_max; ++r) {
    hits += labels[idx[r]] == 1;
    out.push_back(static_cast<double>(hits) / static_cast<double>(r + 1));
  }
  return out;
}

struct MetricSummary {
  std::vector<double> per_seed;
  double mean = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(#seeds)

  static MetricSummary of(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("MetricSummary: no values");
    MetricSummary m;
    m.per_seed = std::move(values);
    const double n = static_cast<double>(m.per_seed.size());
    m.mean = std::accumulate(m.per_seed.begin(), m.per_seed.end(), 0.0) / n;
    if (m.per_seed.size() > 1) {
      double ss = 0.0;
      for (double v : m.per_seed) ss += (v - m.mean) * (v - m.mean);
      m.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return m;
  }

  nlohmann::json to_json() const { return {{"per_seed", per_seed}, {"mean", mean}, {"stderr", stderr_}}; }
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricSummary> metrics;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& [name, m] : metrics) j[name] = m.to_json();
    j["seeds"] = seeds;
    j["config"] = config;
    return j;
  }
};

inline std::vector<std::uint64_t> default_eval_seeds() {
  std::vector<std::uint64_t> s;
  for (std::uint64_t v = 0; v <= 140; v += 10) s.push_back(v);
  return s;
}

inline constexpr double kEvalTrainRatio = 0.8;

struct SeedOutcome {
  double f1 = 0.0;
  double auc = 0.0;
  std::vector<double> test_scores;
  std::vector<int> test_labels;
};

// Train on one split of precomputed features and score the held-out part.
inline SeedOutcome evaluate_split(std::span<const Vector> features, std::span<const int> labels,
                                  const ClassifierConfig& base, std::uint64_t seed, double ratio = kEvalTrainRatio) {
  const IndexSplit split = split_indices(features.size(), ratio, seed);
  std::vector<Vector> xtr;
  std::vector<int> ytr;
  for (auto i : split.train) {
    xtr.push_back(features[i]);
    ytr.push_back(labels[i]);
  }
  ClassifierConfig cfg = base;
  cfg.seed = seed;
  const ClassifierParams params = train_classifier(xtr, ytr, cfg);
  SeedOutcome out;
  std::vector<int> preds;
  for (auto i : split.test) {
    const double p = classify(features[i], params);
    out.test_scores.push_back(p);
    out.test_labels.push_back(labels[i]);
    preds.push_back(static_cast<int>(decide(p)));
  }
  out.f1 = f1_score(preds, out.test_labels);
  out.auc = auc_score(out.test_scores, out.test_labels);
  return out;
}

// For each seed: 8:2 split, fit the detection head on the training part with
// the encoder frozen, report F1 and AUC on the test part.
template <TextEncoder E>
EvalReport repeated_split_eval(std::span<const DetectionExample> examples, const E& enc, const ClassifierConfig& cfg,
                               std::span<const std::uint64_t> seeds, double ratio = kEvalTrainRatio) {
  if (seeds.empty()) throw std::invalid_argument("repeated_split_eval: no seeds");
  if (examples.empty()) throw std::invalid_argument("repeated_split_eval: no examples");
  std::vector<Vector> features;
  std::vector<int> labels;
  features.reserve(examples.size());
  for (const auto& ex : examples) {
    features.push_back(example_features(ex, enc));
    labels.push_back(static_cast<int>(ex.label));
  }
  std::vector<double> f1s, aucs;
  for (auto s : seeds) {
    const SeedOutcome o = evaluate_split(features, labels, cfg, s, ratio);
    f1s.push_back(o.f1);
    aucs.push_back(o.auc);
  }
  EvalReport r;
  r.seeds.assign(seeds.begin(), seeds.end());
  r.metrics["f1"] = MetricSummary::of(std::move(f1s));
  r.metrics["auc"] = MetricSummary::of(std::move(aucs));
  r.config = {{"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"max_epochs", cfg.max_epochs},
              {"validation_fraction", cfg.validation_fraction},
              {"train_ratio", ratio},
              {"examples", examples.size()}};
  return r;
}

struct EmbeddingQuality {
  double alignment_title_title = 0.0;
  double alignment_title_body = 0.0;
  double uniformity = 0.0;
};

// Embeddings are L2-normalized before measuring. Title-title pairs are two
// dropout passes over the headline quote; title-body pairs are the headline
// quote and its mined positive; uniformity is over headline quotes.
inline EmbeddingQuality embedding_quality(std::span<const TrainingItem> items, const Encoder& enc,
                                          std::uint64_t seed = 0) {
  if (items.size() < 2) throw std::invalid_argument("embedding_quality: need at least two items");
  std::vector<std::pair<Vector, Vector>> tt, tb;
  std::vector<Vector> anchors;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = items[i].triplet;
    const Embedding a = normalized(enc.encode(t.anchor.text));
    tt.emplace_back(normalized(enc.encode(t.anchor.text, mix_seed({seed, i, 1}))).values,
                    normalized(enc.encode(t.anchor.text, mix_seed({seed, i, 2}))).values);
    tb.emplace_back(a.values, normalized(enc.encode(t.positive.text)).values);
    anchors.push_back(a.values);
  }
  return {alignment(tt), alignment(tb), uniformity(anchors)};
}

}  // namespace quotecse
