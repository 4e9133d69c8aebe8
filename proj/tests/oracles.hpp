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


// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. They favour the most literal computation over speed or
// numerical care.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "quotecse/contrastive.hpp"
#include "quotecse/rng.hpp"

namespace quotecse::oracle {

inline double cos(const Vector& a, const Vector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// mean_i -log( e^{s(h_i,p_i)/t} / sum_j e^{s(h_i,p_j)/t} )
inline double simcse(const std::vector<Vector>& h, const std::vector<Vector>& p, double t,
                     const std::vector<Vector>& queue = {}) {
  double total = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double num = std::exp(cos(h[i], p[i]) / t);
    double den = 0;
    for (std::size_t j = 0; j < h.size(); ++j) den += std::exp(cos(h[i], p[j]) / t);
    for (const auto& q : queue) den += std::exp(cos(h[i], q) / t);
    total += -std::log(num / den);
  }
  return total / static_cast<double>(h.size());
}

// mean_i -log( e^{s(h_i,p_i)/t} / sum_j [e^{s(h_i,p_j)/t} + e^{s(h_i,n_j)/t}] )
inline double quotecse(const std::vector<Vector>& h, const std::vector<Vector>& p, const std::vector<Vector>& n,
                       double t, const std::vector<Vector>& queue = {}) {
  double total = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double num = std::exp(cos(h[i], p[i]) / t);
    double den = 0;
    for (std::size_t j = 0; j < h.size(); ++j) {
      den += std::exp(cos(h[i], p[j]) / t);
      den += std::exp(cos(h[i], n[j]) / t);
    }
    for (const auto& q : queue) den += std::exp(cos(h[i], q) / t);
    total += -std::log(num / den);
  }
  return total / static_cast<double>(h.size());
}

inline std::vector<Vector> random_vectors(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<Vector> out(n, Vector(d));
  for (auto& v : out)
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return out;
}

inline ContrastiveBatch random_batch(Rng& rng, std::size_t n, std::size_t d, double tau, bool negatives) {
  ContrastiveBatch b;
  b.anchors = random_vectors(rng, n, d);
  b.positives = random_vectors(rng, n, d);
  if (negatives) b.negatives = random_vectors(rng, n, d);
  b.temperature = tau;
  return b;
}

// Central differences of `f` with respect to every coordinate of `x`.
inline Vector finite_difference(std::vector<Vector>& x, std::size_t row, const std::function<double()>& f,
                                double step = 1e-5) {
  Vector g(x[row].size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double keep = x[row][k];
    x[row][k] = keep + step;
    const double up = f();
    x[row][k] = keep - step;
    const double down = f();
    x[row][k] = keep;
    g[k] = (up - down) / (2 * step);
  }
  return g;
}

// |a - b| / max(|a|, |b|, 1): relative for sizeable entries, absolute near 0.
inline double gradient_error(const Vector& a, const Vector& b) {
  double worst = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a[k] - b[k]) / std::max({std::abs(a[k]), std::abs(b[k]), 1.0}));
  return worst;
}

// Fraction of (positive, negative) pairs ordered correctly, ties one half.
inline double auc_pairwise(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / static_cast<double>(pairs);
}

inline double f1_confusion(const std::vector<int>& pred, const std::vector<int>& y) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (pred[i] == 1 && y[i] == 1) ++tp;
    if (pred[i] == 1 && y[i] == 0) ++fp;
    if (pred[i] == 0 && y[i] == 1) ++fn;
  }
  if (2 * tp + fp + fn == 0 || tp == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

// Sort (score desc, position asc) and count positives in the first k.
inline double precision_sorted(const std::vector<double>& s, const std::vector<int>& y, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < s.size(); ++i) v.emplace_back(-s[i], i);
  std::sort(v.begin(), v.end());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += y[v[r].second] == 1;
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace quotecse::oracle
