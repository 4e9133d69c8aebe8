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

// Contextomized-quote detection: pair the headline quote u with its most
// similar body quote v and classify concat(u, v, |u - v|, u * v) with a
// one-hidden-layer MLP. The encoder is frozen here.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/contrastive.hpp"
#include "quotecse/corpus.hpp"
#include "quotecse/encoder.hpp"
#include "quotecse/errors.hpp"
#include "quotecse/mining.hpp"
#include "quotecse/rng.hpp"

namespace quotecse {

inline constexpr std::size_t kClassifierHiddenDim = 64;
inline constexpr double kDecisionThreshold = 0.5;

struct BodyMatch {
  std::size_t index = 0;
  Embedding embedding;
  double similarity = 0.0;
};

template <TextEncoder E>
BodyMatch select_body_quote(const Embedding& u, std::span<const Quote> body_quotes, const E& enc) {
  if (body_quotes.empty()) throw std::invalid_argument("select_body_quote: no body quotes");
  BodyMatch best;
  for (std::size_t i = 0; i < body_quotes.size(); ++i) {
    Embedding v = enc.encode(body_quotes[i].text);
    const double s = cosine_sim(u, v);
    if (i == 0 || s > best.similarity) best = {i, std::move(v), s};
  }
  return best;
}

template <TextEncoder E>
BodyMatch select_body_quote(const Quote& u_quote, std::span<const Quote> body_quotes, const E& enc) {
  if (body_quotes.empty()) throw std::invalid_argument("select_body_quote: no body quotes");
  return select_body_quote(enc.encode(u_quote.text), body_quotes, enc);
}

// (u, v, |u - v|, u * v)
inline Vector build_features(const Embedding& u, const Embedding& v) {
  if (u.dim() != v.dim()) throw std::invalid_argument("build_features: dimension mismatch");
  const std::size_t d = u.dim();
  Vector f(4 * d);
  for (std::size_t k = 0; k < d; ++k) {
    f[k] = u.values[k];
    f[d + k] = v.values[k];
    f[2 * d + k] = std::abs(u.values[k] - v.values[k]);
    f[3 * d + k] = u.values[k] * v.values[k];
  }
  return f;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// input -> hidden (ReLU) -> 1 (sigmoid). w1 is hidden x input, row-major.
struct ClassifierParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = kClassifierHiddenDim;
  Vector w1, b1, w2, b2;

  static ClassifierParams zeros(std::size_t in, std::size_t hidden = kClassifierHiddenDim) {
    return {in, hidden, Vector(hidden * in, 0.0), Vector(hidden, 0.0), Vector(hidden, 0.0), Vector(1, 0.0)};
  }

  static ClassifierParams init(std::size_t in, std::uint64_t seed, std::size_t hidden = kClassifierHiddenDim) {
    auto p = zeros(in, hidden);
    Rng rng(mix_seed({seed, 0x434c4601ULL}));
    const double l1 = std::sqrt(6.0 / static_cast<double>(in));
    const double l2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (auto& w : p.w1) w = rng.uniform(-l1, l1);
    for (auto& w : p.w2) w = rng.uniform(-l2, l2);
    return p;
  }

  std::array<std::span<double>, 4> groups() { return {w1, b1, w2, b2}; }
  std::array<std::span<const double>, 4> groups() const { return {w1, b1, w2, b2}; }
  bool operator==(const ClassifierParams&) const = default;
};

// Probability of the contextomized class.
inline double classify(std::span<const double> features, const ClassifierParams& p) {
  if (features.size() != p.input_dim) throw std::invalid_argument("classify: feature length does not match classifier");
  double logit = p.b2[0];
  for (std::size_t r = 0; r < p.hidden_dim; ++r) {
    const double* row = p.w1.data() + r * p.input_dim;
    double z = p.b1[r];
    for (std::size_t k = 0; k < p.input_dim; ++k) z += row[k] * features[k];
    if (z > 0.0) logit += p.w2[r] * z;
  }
  return sigmoid(logit);
}

inline Label decide(double probability) {
  return probability > kDecisionThreshold ? Label::contextomized : Label::modified;
}

struct ClassifierConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

namespace detail {

inline double bce(double p, int y) {
  constexpr double eps = 1e-12;
  return y ? -std::log(std::max(p, eps)) : -std::log(std::max(1.0 - p, eps));
}

// Accumulates d(BCE)/d(params) for one example; returns its loss.
inline double classifier_backward(std::span<const double> x, int y, const ClassifierParams& p, ClassifierParams& g) {
  std::vector<double> hidden(p.hidden_dim);
  double logit = p.b2[0];
  for (std::size_t r = 0; r < p.hidden_dim; ++r) {
    const double* row = p.w1.data() + r * p.input_dim;
    double z = p.b1[r];
    for (std::size_t k = 0; k < p.input_dim; ++k) z += row[k] * x[k];
    hidden[r] = z > 0.0 ? z : 0.0;
    logit += p.w2[r] * hidden[r];
  }
  const double prob = sigmoid(logit);
  const double dlogit = prob - static_cast<double>(y);
  g.b2[0] += dlogit;
  for (std::size_t r = 0; r < p.hidden_dim; ++r) {
    if (hidden[r] <= 0.0) continue;
    g.w2[r] += dlogit * hidden[r];
    const double dz = dlogit * p.w2[r];
    g.b1[r] += dz;
    double* grow = g.w1.data() + r * p.input_dim;
    for (std::size_t k = 0; k < p.input_dim; ++k) grow[k] += dz * x[k];
  }
  return bce(prob, y);
}

}  // namespace detail

inline double mean_bce(std::span<const Vector> features, std::span<const int> labels, std::span<const std::size_t> idx,
                       const ClassifierParams& p) {
  double s = 0.0;
  for (auto i : idx) s += detail::bce(classify(features[i], p), labels[i]);
  return s / static_cast<double>(idx.size());
}

// Mini-batch Adam on binary cross-entropy. A seeded fraction of the data is
// held out and the parameters with the lowest held-out loss are returned.
inline ClassifierParams train_classifier(std::span<const Vector> features, std::span<const int> labels,
                                         const ClassifierConfig& cfg) {
  if (features.size() != labels.size()) throw std::invalid_argument("train_classifier: features/labels size mismatch");
  if (features.empty()) throw std::invalid_argument("train_classifier: no examples");
  const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("train_classifier: labels must be 0 or 1");
  if (positives == 0 || positives == labels.size())
    throw std::invalid_argument("train_classifier: need at least one example of each class");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_classifier: batch_size must be positive");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
    throw std::invalid_argument("train_classifier: validation_fraction must be in [0, 1)");
  const std::size_t dim = features.front().size();
  for (const auto& f : features)
    if (f.size() != dim) throw std::invalid_argument("train_classifier: inconsistent feature length");

  const auto order = shuffled_indices(features.size(), mix_seed({cfg.seed, 0x5641ULL}));
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  ClassifierParams p = ClassifierParams::init(dim, cfg.seed);
  ClassifierParams best = p;
  double best_loss = std::numeric_limits<double>::infinity();
  const std::size_t sizes[] = {p.w1.size(), p.b1.size(), p.w2.size(), p.b2.size()};
  Adam opt(AdamConfig{cfg.learning_rate}, sizes);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(mix_seed({cfg.seed, 0x4550ULL, epoch}));
    rng.shuffle(fit);
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(fit.size(), start + cfg.batch_size);
      ClassifierParams g = ClassifierParams::zeros(dim, p.hidden_dim);
      for (std::size_t k = start; k < stop; ++k) detail::classifier_backward(features[fit[k]], labels[fit[k]], p, g);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto grp : g.groups())
        for (auto& x : grp) x *= scale;
      opt.step(p.groups(), g.groups());
    }
    if (!val.empty()) {
      const double l = mean_bce(features, labels, val, p);
      if (l < best_loss) {
        best_loss = l;
        best = p;
      }
    }
  }
  return val.empty() || cfg.max_epochs == 0 ? p : best;
}

struct Detection {
  Label label = Label::modified;
  double probability = 0.5;
  std::size_t matched_index = 0;
  std::string matched_quote;
  double similarity = 0.0;
};

template <TextEncoder E>
Vector example_features(const DetectionExample& ex, const E& enc, BodyMatch* match = nullptr) {
  const Embedding u = enc.encode(ex.headline_quote.text);
  BodyMatch m = select_body_quote(u, ex.body_quotes, enc);
  Vector f = build_features(u, m.embedding);
  if (match) *match = std::move(m);
  return f;
}

template <TextEncoder E>
Detection detect(const DetectionExample& ex, const E& enc, const ClassifierParams& params) {
  BodyMatch m;
  const Vector f = example_features(ex, enc, &m);
  Detection d;
  d.probability = classify(f, params);
  d.label = decide(d.probability);
  d.matched_index = m.index;
  d.matched_quote = ex.body_quotes[m.index].text;
  d.similarity = m.similarity;
  return d;
}

inline nlohmann::json detection_to_json(const std::string& article_id, const Detection& d) {
  nlohmann::json j;
  j["article_id"] = article_id;
  j["label"] = static_cast<int>(d.label);
  j["probability"] = d.probability;
  j["matched_quote"] = d.matched_quote;
  j["similarity"] = d.similarity;
  return j;
}

inline constexpr char kClassifierMagic[8] = {'Q', 'C', 'S', 'E', 'C', 'L', 'F', '1'};

inline void save_classifier(const ClassifierParams& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  binio::put_bytes(os, kClassifierMagic, sizeof kClassifierMagic);
  binio::put_u64(os, p.input_dim);
  binio::put_u64(os, p.hidden_dim);
  for (auto grp : p.groups()) binio::put_vec(os, grp);
  if (!os) throw IoError("write failed: " + path);
}

inline ClassifierParams load_classifier(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  binio::get_bytes(is, magic, sizeof magic);
  if (std::memcmp(magic, kClassifierMagic, sizeof magic) != 0) throw DataError(path + " is not a classifier checkpoint");
  ClassifierParams p;
  p.input_dim = binio::get_u64(is);
  p.hidden_dim = binio::get_u64(is);
  if (p.input_dim == 0 || p.hidden_dim == 0) throw DataError("classifier checkpoint has zero dimensions");
  p.w1 = binio::get_vec(is, p.hidden_dim * p.input_dim);
  p.b1 = binio::get_vec(is, p.hidden_dim);
  p.w2 = binio::get_vec(is, p.hidden_dim);
  p.b2 = binio::get_vec(is, 1);
  return p;
}

}  // namespace quotecse
