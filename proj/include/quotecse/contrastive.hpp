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

// Contrastive objectives over cosine similarity and the training loop.
//
// Every loss here is an InfoNCE term per anchor i,
//
//   l_i = -log( exp(s(h_i, c_i) / tau) / sum_{c in C_i} exp(s(h_i, c) / tau) )
//
// and differs only in the candidate set C_i:
//
//   simcse    C_i = { h~_j : j = 1..N }                 (dropout pairs)
//   quotecse  C_i = { h+_j : j } u { h-_j : j }         (mined positive / hard negative)
//
// A MoCo queue appends its entries to every C_i. The batch loss is the mean
// of l_i.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "quotecse/encoder.hpp"
#include "quotecse/mining.hpp"
#include "quotecse/rng.hpp"

namespace quotecse {

inline constexpr double kDefaultTemperature = 0.05;

struct ContrastiveBatch {
  std::vector<Vector> anchors;
  std::vector<Vector> positives;
  std::optional<std::vector<Vector>> negatives;
  double temperature = kDefaultTemperature;
};

struct LossResult {
  double loss = 0.0;
  Vector per_sample;
  std::vector<Vector> grad_anchors;
  std::vector<Vector> grad_positives;
  std::vector<Vector> grad_negatives;  // empty unless the batch has negatives
};

namespace detail {

// d cos(a, b) / da, scaled by `coef` and accumulated into `out`.
inline void add_cosine_grad(std::span<const double> a, std::span<const double> b, double na, double nb,
                            double sim, double coef, std::span<double> out) {
  const double inv = 1.0 / (na * nb);
  const double self = sim / (na * na);
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += coef * (b[k] * inv - self * a[k]);
}

inline void validate(const ContrastiveBatch& b, bool need_negatives) {
  if (!(b.temperature > 0.0)) throw std::invalid_argument("contrastive loss: temperature must be positive");
  if (b.anchors.empty()) throw std::invalid_argument("contrastive loss: empty batch");
  if (b.positives.size() != b.anchors.size()) throw std::invalid_argument("contrastive loss: positives/anchors size mismatch");
  if (need_negatives && !b.negatives) throw std::invalid_argument("contrastive loss: negatives required");
  if (b.negatives && b.negatives->size() != b.anchors.size())
    throw std::invalid_argument("contrastive loss: negatives/anchors size mismatch");
  const std::size_t d = b.anchors.front().size();
  auto check = [d](const std::vector<Vector>& vs) {
    for (const auto& v : vs)
      if (v.size() != d) throw std::invalid_argument("contrastive loss: embedding dimension mismatch");
  };
  check(b.anchors);
  check(b.positives);
  if (b.negatives) check(*b.negatives);
}

// Core evaluator. Candidates for anchor i: all of `groups[0]`, then all of
// `groups[1]` (if any), then `extra`. The target is groups[0][i]. `extra`
// entries receive no gradient.
inline LossResult info_nce(const std::vector<Vector>& anchors, std::span<const std::vector<Vector>* const> groups,
                           std::span<const Vector> extra, double tau) {
  const std::size_t n = anchors.size();
  const std::size_t d = anchors.front().size();
  for (const auto& e : extra)
    if (e.size() != d) throw std::invalid_argument("contrastive loss: queue dimension mismatch");

  struct Cand {
    const Vector* v;
    Vector* grad;
    double norm;
  };
  LossResult r;
  r.per_sample.assign(n, 0.0);
  r.grad_anchors.assign(n, Vector(d, 0.0));
  std::vector<std::vector<Vector>*> grad_groups;
  r.grad_positives.assign(n, Vector(d, 0.0));
  grad_groups.push_back(&r.grad_positives);
  if (groups.size() > 1) {
    r.grad_negatives.assign(n, Vector(d, 0.0));
    grad_groups.push_back(&r.grad_negatives);
  }

  std::vector<Cand> cands;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t j = 0; j < n; ++j) {
      const Vector& v = (*groups[g])[j];
      const double nv = norm(v);
      if (nv == 0.0) throw std::domain_error("contrastive loss: zero embedding");
      cands.push_back({&v, &(*grad_groups[g])[j], nv});
    }
  for (const auto& e : extra) {
    const double ne = norm(e);
    if (ne == 0.0) throw std::domain_error("contrastive loss: zero embedding in queue");
    cands.push_back({&e, nullptr, ne});
  }

  std::vector<double> sims(cands.size()), logits(cands.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& a = anchors[i];
    const double na = norm(a);
    if (na == 0.0) throw std::domain_error("contrastive loss: zero embedding");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands.size(); ++c) {
      sims[c] = std::clamp(dot(a, *cands[c].v) / (na * cands[c].norm), -1.0, 1.0);
      logits[c] = sims[c] / tau;
      mx = std::max(mx, logits[c]);
    }
    const std::size_t target = i;  // groups[0][i] sits at position i
    double z_other = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c)
      if (c != target) z_other += std::exp(logits[c] - mx);
    const double z_target = std::exp(logits[target] - mx);
    const double lse = mx + std::log(z_target + z_other);
    // log1p form when the target is the largest logit.
    r.per_sample[i] = logits[target] == mx ? std::log1p(z_other) : lse - logits[target];
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double p = std::exp(logits[c] - lse);
      const double coef = (p - (c == target ? 1.0 : 0.0)) * inv_n / tau;
      if (coef == 0.0) continue;
      add_cosine_grad(a, *cands[c].v, na, cands[c].norm, sims[c], coef, r.grad_anchors[i]);
      if (cands[c].grad) add_cosine_grad(*cands[c].v, a, cands[c].norm, na, sims[c], coef, *cands[c].grad);
    }
  }
  double total = 0.0;
  for (double l : r.per_sample) total += l;
  r.loss = total * inv_n;
  return r;
}

}  // namespace detail

// Dropout-pair InfoNCE with in-batch negatives. `extra_negatives` (a MoCo
// queue) are appended to every denominator.
inline LossResult simcse_loss(const ContrastiveBatch& batch, std::span<const Vector> extra_negatives = {}) {
  detail::validate(batch, false);
  const std::vector<Vector>* groups[] = {&batch.positives};
  return detail::info_nce(batch.anchors, groups, extra_negatives, batch.temperature);
}

// Mined positive plus hard negative. The denominator of anchor i holds the
// positive and the negative of every sample in the batch, its own included.
inline LossResult quotecse_loss(const ContrastiveBatch& batch, std::span<const Vector> extra_negatives = {}) {
  detail::validate(batch, true);
  const std::vector<Vector>* groups[] = {&batch.positives, &*batch.negatives};
  return detail::info_nce(batch.anchors, groups, extra_negatives, batch.temperature);
}

enum class AblationVariant {
  simcse_positive_with_hard_negative,  // positives are dropout pairs, negatives mined
  quotecse_positive_no_hard_negative,  // positives mined, no negatives
};

inline LossResult ablation_loss(const ContrastiveBatch& batch, AblationVariant variant,
                                std::span<const Vector> extra_negatives = {}) {
  switch (variant) {
    case AblationVariant::simcse_positive_with_hard_negative:
      return quotecse_loss(batch, extra_negatives);
    case AblationVariant::quotecse_positive_no_hard_negative:
      if (batch.negatives) throw std::invalid_argument("ablation_loss: this variant takes no negatives");
      return simcse_loss(batch, extra_negatives);
  }
  throw std::invalid_argument("ablation_loss: unknown variant");
}

enum class LossKind { simcse, quotecse, ablation1, ablation2 };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::simcse: return "simcse";
    case LossKind::quotecse: return "quotecse";
    case LossKind::ablation1: return "ablation1";
    case LossKind::ablation2: return "ablation2";
  }
  return "?";
}

inline std::optional<LossKind> parse_loss_kind(std::string_view s) {
  for (auto k : {LossKind::simcse, LossKind::quotecse, LossKind::ablation1, LossKind::ablation2})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline bool uses_dropout_positive(LossKind k) { return k == LossKind::simcse || k == LossKind::ablation1; }
inline bool uses_hard_negative(LossKind k) { return k == LossKind::quotecse || k == LossKind::ablation1; }
inline bool uses_mined_positive(LossKind k) { return k == LossKind::quotecse || k == LossKind::ablation2; }

inline LossResult compute_loss(const ContrastiveBatch& b, LossKind kind, std::span<const Vector> extra = {}) {
  switch (kind) {
    case LossKind::simcse: return simcse_loss(b, extra);
    case LossKind::quotecse: return quotecse_loss(b, extra);
    case LossKind::ablation1: return ablation_loss(b, AblationVariant::simcse_positive_with_hard_negative, extra);
    case LossKind::ablation2: return ablation_loss(b, AblationVariant::quotecse_positive_no_hard_negative, extra);
  }
  throw std::invalid_argument("unknown loss kind");
}

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed list of parameter tensors.
class Adam {
 public:
  Adam(AdamConfig cfg, std::span<const std::size_t> sizes) : cfg_(cfg) {
    for (auto n : sizes) {
      m_.emplace_back(n, 0.0);
      v_.emplace_back(n, 0.0);
    }
  }

  template <std::size_t K>
  void step(const std::array<std::span<double>, K>& params, const std::array<std::span<double>, K>& grads) {
    if (K != m_.size()) throw std::invalid_argument("Adam: parameter group count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t g = 0; g < K; ++g) {
      auto p = params[g];
      auto gr = grads[g];
      auto& m = m_[g];
      auto& v = v_[g];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gr[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gr[i] * gr[i];
        p[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      }
    }
  }

  std::uint64_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Vector> m_, v_;
  std::uint64_t t_ = 0;
};

inline Adam make_adam(const ProjectionHead& head, AdamConfig cfg) {
  const std::size_t sizes[] = {head.w1.size(), head.b1.size(), head.w2.size(), head.b2.size()};
  return Adam(cfg, sizes);
}

inline constexpr std::size_t kDefaultQueueSize = 40;
inline constexpr double kDefaultMomentum = 0.999;

// Momentum-contrast state: a key projection head tracking the query head as
// an exponential moving average, and a FIFO of detached key embeddings.
struct MocoState {
  ProjectionHead key_head;
  std::deque<Vector> queue;
  std::size_t capacity = kDefaultQueueSize;
  double momentum = kDefaultMomentum;

  static MocoState init(const ProjectionHead& query, std::size_t capacity = kDefaultQueueSize,
                        double momentum = kDefaultMomentum) {
    if (capacity == 0) throw std::invalid_argument("MocoState: capacity must be positive");
    if (!(momentum > 0.0 && momentum <= 1.0)) throw std::invalid_argument("MocoState: momentum must be in (0, 1]");
    return MocoState{query, {}, capacity, momentum};
  }

  void enqueue(std::span<const Vector> keys) {
    for (const auto& k : keys) {
      queue.push_back(k);
      if (queue.size() > capacity) queue.pop_front();
    }
  }

  void momentum_update(const ProjectionHead& query) {
    if (momentum == 1.0) return;
    auto dst = key_head.groups();
    const auto src = query.groups();
    for (std::size_t g = 0; g < dst.size(); ++g)
      for (std::size_t i = 0; i < dst[g].size(); ++i) dst[g][i] = momentum * dst[g][i] + (1.0 - momentum) * src[g][i];
  }

  std::vector<Vector> queued() const { return {queue.begin(), queue.end()}; }
};

enum class Role : std::uint64_t { anchor = 1, positive = 2, negative = 3 };

inline std::uint64_t dropout_seed(std::uint64_t base, std::size_t sample, Role role) {
  return mix_seed({base, sample, static_cast<std::uint64_t>(role)});
}

// Embeddings for one batch under a loss kind. Anchors always come from the
// query head; positives and negatives from `key_head` (the query head itself
// unless MoCo is on). Traces are kept only for the roles that ask for them.
struct BatchEmbeddings {
  ContrastiveBatch batch;
  std::vector<ForwardTrace> anchor_traces, positive_traces, negative_traces;
};

inline BatchEmbeddings embed_batch(std::span<const MinedTriplet> triplets, const Encoder& enc,
                                   const ProjectionHead& key_head, LossKind kind, double tau,
                                   std::uint64_t dropout_base, bool trace_anchors, bool trace_keys) {
  BatchEmbeddings out;
  out.batch.temperature = tau;
  const std::size_t n = triplets.size();
  if (trace_anchors) out.anchor_traces.resize(n);
  if (trace_keys) out.positive_traces.resize(n);
  if (trace_keys && uses_hard_negative(kind)) out.negative_traces.resize(n);
  if (uses_hard_negative(kind)) out.batch.negatives.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = triplets[i];
    out.batch.anchors.push_back(
        enc.forward(t.anchor.text, dropout_seed(dropout_base, i, Role::anchor), trace_anchors ? &out.anchor_traces[i] : nullptr)
            .values);
    const std::string& pos_text = uses_dropout_positive(kind) ? t.anchor.text : t.positive.text;
    out.batch.positives.push_back(enc.forward_with(key_head, pos_text, dropout_seed(dropout_base, i, Role::positive),
                                                   trace_keys ? &out.positive_traces[i] : nullptr)
                                      .values);
    if (uses_hard_negative(kind))
      out.batch.negatives->push_back(enc.forward_with(key_head, t.negative.text,
                                                      dropout_seed(dropout_base, i, Role::negative),
                                                      trace_keys ? &out.negative_traces[i] : nullptr)
                                         .values);
  }
  return out;
}

// Loss of one batch under the current weights, without updating anything.
inline double batch_loss(std::span<const MinedTriplet> triplets, const Encoder& enc, LossKind kind, double tau,
                         std::uint64_t dropout_base) {
  auto e = embed_batch(triplets, enc, enc.head(), kind, tau, dropout_base, false, false);
  return compute_loss(e.batch, kind).loss;
}

// One optimizer step without MoCo. Returns the loss before the update.
inline double contrastive_step(std::span<const MinedTriplet> triplets, Encoder& enc, Adam& opt, LossKind kind,
                               double tau, std::uint64_t dropout_base) {
  auto e = embed_batch(triplets, enc, enc.head(), kind, tau, dropout_base, true, true);
  const LossResult r = compute_loss(e.batch, kind);
  HeadGradients g = enc.head().zero_gradients();
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    enc.backward(e.anchor_traces[i], r.grad_anchors[i], g);
    enc.backward(e.positive_traces[i], r.grad_positives[i], g);
    if (!e.negative_traces.empty()) enc.backward(e.negative_traces[i], r.grad_negatives[i], g);
  }
  opt.step(enc.head().groups(), g.groups());
  return r.loss;
}

// One MoCo step: keys from the momentum head, queue entries as extra
// negatives, gradient through the anchors only. Afterwards the key head moves
// toward the query head and this batch's keys are enqueued.
inline double moco_step(MocoState& state, std::span<const MinedTriplet> triplets, Encoder& query, Adam& opt,
                        LossKind kind, double tau, std::uint64_t dropout_base) {
  auto e = embed_batch(triplets, query, state.key_head, kind, tau, dropout_base, true, false);
  const std::vector<Vector> extra = state.queued();
  const LossResult r = compute_loss(e.batch, kind, extra);
  HeadGradients g = query.head().zero_gradients();
  for (std::size_t i = 0; i < triplets.size(); ++i) query.backward(e.anchor_traces[i], r.grad_anchors[i], g);
  opt.step(query.head().groups(), g.groups());
  state.momentum_update(query.head());
  state.enqueue(e.batch.positives);
  if (e.batch.negatives) state.enqueue(*e.batch.negatives);
  return r.loss;
}

struct TrainConfig {
  double temperature = kDefaultTemperature;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  std::size_t max_epochs = 10;
  std::size_t queue_size = kDefaultQueueSize;
  double momentum = kDefaultMomentum;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::quotecse;
  bool moco = false;
  bool reassign = true;
  bool freeze_negatives = false;
};

struct LossPoint {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;  // set on the last step of each epoch
};

struct TrainResult {
  Encoder encoder;
  std::vector<LossPoint> curve;
  std::optional<std::size_t> best_epoch;  // 1-based; empty if no validation ran
  double best_val_loss = std::numeric_limits<double>::infinity();
};

inline double validation_loss(std::span<const TrainingItem> val, const Encoder& enc, const TrainConfig& cfg) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<MinedTriplet> batch;
  for (std::size_t start = 0, b = 0; start < val.size(); start += cfg.batch_size, ++b) {
    batch.clear();
    for (std::size_t k = start; k < std::min(val.size(), start + cfg.batch_size); ++k) batch.push_back(val[k].triplet);
    const double l = batch_loss(batch, enc, cfg.loss, cfg.temperature, mix_seed({cfg.seed, 0x56414cULL, b}));
    total += l * static_cast<double>(batch.size());
    count += batch.size();
  }
  return total / static_cast<double>(count);
}

// Epochs of shuffled mini-batches. Before each step the batch's assignments
// are recomputed with the encoder being trained (unless disabled or the loss
// ignores them). The returned encoder carries the weights with the lowest
// validation loss.
inline TrainResult train(std::span<const TrainingItem> train_set, std::span<const TrainingItem> val_set,
                         const Encoder& init, const TrainConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("train: no training triplets");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("train: temperature must be positive");
  if (!init.initialized()) throw std::logic_error("train: encoder is not initialized");

  TrainResult res;
  res.encoder = init;
  Encoder& enc = res.encoder;
  Adam opt = make_adam(enc.head(), AdamConfig{cfg.learning_rate});
  std::optional<MocoState> moco;
  if (cfg.moco) moco = MocoState::init(enc.head(), cfg.queue_size, cfg.momentum);
  const bool reassign = cfg.reassign && cfg.loss != LossKind::simcse;

  ProjectionHead best = enc.head();
  std::size_t step = 0;
  std::vector<TrainingItem> batch_items;
  std::vector<MinedTriplet> triplets;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffled_indices(train_set.size(), mix_seed({cfg.seed, 0x45504f4348ULL, epoch}));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      triplets.clear();
      if (reassign) {
        batch_items.clear();
        for (std::size_t k = start; k < stop; ++k) batch_items.push_back(train_set[order[k]]);
        triplets = reassign_batch(std::span<const TrainingItem>(batch_items), enc, step, cfg.seed, cfg.freeze_negatives);
      } else {
        for (std::size_t k = start; k < stop; ++k) triplets.push_back(train_set[order[k]].triplet);
      }
      ++step;
      if (triplets.empty()) continue;
      const std::uint64_t base = mix_seed({cfg.seed, 0x5354455050ULL, step});
      const double loss = moco ? moco_step(*moco, triplets, enc, opt, cfg.loss, cfg.temperature, base)
                               : contrastive_step(triplets, enc, opt, cfg.loss, cfg.temperature, base);
      res.curve.push_back({step, loss, std::nullopt});
    }
    if (!val_set.empty()) {
      const double vl = validation_loss(val_set, enc, cfg);
      if (!res.curve.empty()) res.curve.back().val_loss = vl;
      if (vl < res.best_val_loss) {
        res.best_val_loss = vl;
        res.best_epoch = epoch;
        best = enc.head();
      }
    }
  }
  if (res.best_epoch) enc.head() = best;
  return res;
}

}  // namespace quotecse
