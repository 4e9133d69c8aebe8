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

// Text encoders: a backbone producing a sentence representation followed by a
// two-layer projection head (affine, tanh, affine). The projection head is
// the trainable part; backbones are frozen.
//
// Two backbones are provided:
//  * HashedNgramBackbone: hashed character n-gram counts. Deterministic and
//    platform independent, used for all exact tests.
//  * FeatureTableBackbone: sentence vectors computed offline by an external
//    transformer (e.g. the [CLS] state of a BERT model), looked up by text.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "quotecse/errors.hpp"
#include "quotecse/rng.hpp"
#include "quotecse/text.hpp"

namespace quotecse {

using Vector = std::vector<double>;

struct Embedding {
  Vector values;
  bool normalized = false;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Embedding normalized(const Embedding& e) {
  const double n = norm(e.values);
  if (n == 0.0) throw std::domain_error("cannot normalize the zero vector");
  Embedding out{e.values, true};
  for (auto& v : out.values) v /= n;
  return out;
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine_sim: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine_sim(const Embedding& a, const Embedding& b) { return cosine_sim(a.values, b.values); }

// Sparse non-negative feature vector, indices strictly increasing.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::size_t dim = 0;

  Vector dense() const {
    Vector v(dim, 0.0);
    for (auto [i, x] : entries) v[i] = x;
    return v;
  }
};

enum class BackboneKind : std::uint8_t { toy = 0, external_transformer = 1 };

struct EncoderConfig {
  BackboneKind backbone = BackboneKind::toy;
  std::size_t input_dim = 768;
  std::size_t projection_hidden_dim = 100;
  std::size_t projection_output_dim = 100;
  double dropout_rate = 0.1;
  std::size_t ngram_min = 2;
  std::size_t ngram_max = 4;
  std::uint64_t hash_seed = 0;
  std::uint64_t init_seed = 0;

  void validate() const {
    std::vector<std::string> bad;
    if (input_dim == 0) bad.push_back("input_dim must be positive");
    if (projection_hidden_dim == 0) bad.push_back("projection_hidden_dim must be positive");
    if (projection_output_dim == 0) bad.push_back("projection_output_dim must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad.push_back("dropout_rate must be in [0, 1)");
    if (ngram_min == 0 || ngram_min > ngram_max) bad.push_back("ngram range must satisfy 1 <= ngram_min <= ngram_max");
    if (!bad.empty()) throw ConfigError(std::move(bad));
  }
};

class HashedNgramBackbone {
 public:
  HashedNgramBackbone() = default;
  HashedNgramBackbone(std::size_t dim, std::size_t ngram_min, std::size_t ngram_max, std::uint64_t hash_seed)
      : dim_(dim), ngram_min_(ngram_min), ngram_max_(ngram_max), hash_seed_(hash_seed) {}

  std::size_t dim() const noexcept { return dim_; }

  // Each whitespace token is wrapped as <token>; every code point n-gram of
  // the wrapped token with ngram_min <= n <= ngram_max adds 1 to bucket
  // fnv1a64(utf8(ngram), hash_seed) % dim.
  SparseFeatures featurize(std::string_view text_in) const {
    const std::u32string cps = text::decode_utf8(text::canonicalize_whitespace(text_in));
    std::map<std::uint32_t, double> counts;
    std::size_t pos = 0;
    while (pos < cps.size()) {
      std::size_t end = cps.find(U' ', pos);
      if (end == std::u32string::npos) end = cps.size();
      std::u32string word = U"<" + cps.substr(pos, end - pos) + U">";
      for (std::size_t n = ngram_min_; n <= ngram_max_ && n <= word.size(); ++n) {
        for (std::size_t s = 0; s + n <= word.size(); ++s) {
          const std::string gram = text::encode_utf8(std::u32string_view(word).substr(s, n));
          counts[bucket(gram)] += 1.0;
        }
      }
      pos = end + 1;
    }
    SparseFeatures f;
    f.dim = dim_;
    f.entries.assign(counts.begin(), counts.end());
    return f;
  }

  std::uint32_t bucket(std::string_view gram) const {
    return static_cast<std::uint32_t>(fnv1a64(gram, hash_seed_) % dim_);
  }

 private:
  std::size_t dim_ = 0;
  std::size_t ngram_min_ = 2;
  std::size_t ngram_max_ = 4;
  std::uint64_t hash_seed_ = 0;
};

// Sentence vectors keyed by whitespace-canonicalized text.
class FeatureTableBackbone {
 public:
  FeatureTableBackbone() = default;
  explicit FeatureTableBackbone(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return table_.size(); }
  const std::map<std::string, Vector>& entries() const noexcept { return table_; }

  void add(std::string_view text_in, Vector v) {
    if (v.size() != dim_) throw std::invalid_argument("feature table: vector dimension mismatch");
    table_[text::canonicalize_whitespace(text_in)] = std::move(v);
  }

  SparseFeatures featurize(std::string_view text_in) const {
    auto it = table_.find(text::canonicalize_whitespace(text_in));
    if (it == table_.end())
      throw std::out_of_range("feature table has no entry for text: " + std::string(text_in.substr(0, 80)));
    SparseFeatures f;
    f.dim = dim_;
    for (std::size_t i = 0; i < dim_; ++i)
      if (it->second[i] != 0.0) f.entries.emplace_back(static_cast<std::uint32_t>(i), it->second[i]);
    return f;
  }

  // JSONL, one {"text": str, "vector": [float, ...]} per line.
  static FeatureTableBackbone load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    FeatureTableBackbone t;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (text::trim(std::string_view(line)).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("malformed JSON: ") + e.what(), n);
      }
      if (!j.contains("text") || !j["text"].is_string() || !j.contains("vector") || !j["vector"].is_array())
        throw DataError("feature record needs 'text' and 'vector'", n);
      Vector v = j["vector"].get<Vector>();
      if (t.dim_ == 0) t.dim_ = v.size();
      if (v.size() != t.dim_ || v.empty()) throw DataError("inconsistent feature dimension", n);
      t.add(j["text"].get<std::string>(), std::move(v));
    }
    return t;
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, Vector> table_;
};

struct HeadGradients {
  Vector w1, b1, w2, b2;

  void zero() {
    std::fill(w1.begin(), w1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
  }
  std::array<std::span<double>, 4> groups() { return {w1, b1, w2, b2}; }
};

// input -> hidden (tanh) -> output. Weights are row-major: w1 is hidden x input.
struct ProjectionHead {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  Vector w1, b1, w2, b2;

  static ProjectionHead glorot(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed) {
    ProjectionHead h{in, hidden, out, Vector(hidden * in), Vector(hidden, 0.0), Vector(out * hidden),
                     Vector(out, 0.0)};
    Rng rng(mix_seed({seed, 0x50524f4aULL}));
    const double l1 = std::sqrt(6.0 / static_cast<double>(in + hidden));
    const double l2 = std::sqrt(6.0 / static_cast<double>(hidden + out));
    for (auto& w : h.w1) w = rng.uniform(-l1, l1);
    for (auto& w : h.w2) w = rng.uniform(-l2, l2);
    return h;
  }

  std::size_t parameter_count() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size(); }

  HeadGradients zero_gradients() const {
    return {Vector(w1.size(), 0.0), Vector(b1.size(), 0.0), Vector(w2.size(), 0.0), Vector(b2.size(), 0.0)};
  }

  std::array<std::span<double>, 4> groups() { return {w1, b1, w2, b2}; }
  std::array<std::span<const double>, 4> groups() const { return {w1, b1, w2, b2}; }

  bool operator==(const ProjectionHead&) const = default;
};

// Everything backward() needs from a forward pass.
struct ForwardTrace {
  SparseFeatures input;  // after input dropout
  Vector hidden;         // tanh activations, before hidden dropout
  Vector hidden_mask;    // multiplicative dropout mask (1 when inactive)
};

class Encoder {
 public:
  Encoder() = default;

  static Encoder create(const EncoderConfig& cfg) {
    cfg.validate();
    if (cfg.backbone != BackboneKind::toy)
      throw std::invalid_argument("Encoder::create: use with_feature_table for external transformer features");
    Encoder e;
    e.config_ = cfg;
    e.backbone_ = HashedNgramBackbone(cfg.input_dim, cfg.ngram_min, cfg.ngram_max, cfg.hash_seed);
    e.head_ = ProjectionHead::glorot(cfg.input_dim, cfg.projection_hidden_dim, cfg.projection_output_dim,
                                     cfg.init_seed);
    e.initialized_ = true;
    return e;
  }

  static Encoder with_feature_table(EncoderConfig cfg, FeatureTableBackbone table) {
    cfg.backbone = BackboneKind::external_transformer;
    cfg.input_dim = table.dim();
    cfg.validate();
    Encoder e;
    e.config_ = cfg;
    e.backbone_ = std::move(table);
    e.head_ = ProjectionHead::glorot(cfg.input_dim, cfg.projection_hidden_dim, cfg.projection_output_dim,
                                     cfg.init_seed);
    e.initialized_ = true;
    return e;
  }

  bool initialized() const noexcept { return initialized_; }
  const EncoderConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return head_.output_dim; }
  ProjectionHead& head() noexcept { return head_; }
  const ProjectionHead& head() const noexcept { return head_; }
  const std::string& tag() const noexcept { return tag_; }
  void set_tag(std::string t) { tag_ = std::move(t); }

  SparseFeatures features(std::string_view text_in) const {
    require_initialized();
    return std::visit([&](const auto& b) { return b.featurize(text_in); }, backbone_);
  }

  // Dropout is active iff a seed is given; the masks are a pure function of it.
  Embedding encode(std::string_view text_in, std::optional<std::uint64_t> dropout_seed = std::nullopt) const {
    return forward(text_in, dropout_seed, nullptr);
  }

  Embedding forward(std::string_view text_in, std::optional<std::uint64_t> dropout_seed, ForwardTrace* trace) const {
    return forward_with(head_, text_in, dropout_seed, trace);
  }

  // Same backbone, different projection weights (e.g. a momentum key head).
  Embedding forward_with(const ProjectionHead& head, std::string_view text_in,
                         std::optional<std::uint64_t> dropout_seed, ForwardTrace* trace) const {
    require_initialized();
    if (head.input_dim != head_.input_dim) throw std::invalid_argument("forward_with: head input dimension mismatch");
    if (text::trim(text_in).empty()) throw std::invalid_argument("encode: empty text");
    SparseFeatures x = features(text_in);
    const double p = config_.dropout_rate;
    std::optional<Rng> rng;
    if (dropout_seed && p > 0.0) rng.emplace(*dropout_seed);
    if (rng) {
      const double keep = 1.0 / (1.0 - p);
      std::erase_if(x.entries, [&](auto& e) {
        if (rng->bernoulli(p)) return true;
        e.second *= keep;
        return false;
      });
    }
    const std::size_t H = head.hidden_dim, O = head.output_dim, D = head.input_dim;
    Vector hidden(head.b1);
    for (std::size_t r = 0; r < H; ++r) {
      const double* row = head.w1.data() + r * D;
      double s = 0.0;
      for (auto [k, v] : x.entries) s += row[k] * v;
      hidden[r] = std::tanh(hidden[r] + s);
    }
    Vector mask(H, 1.0);
    if (rng) {
      const double keep = 1.0 / (1.0 - p);
      for (auto& m : mask) m = rng->bernoulli(p) ? 0.0 : keep;
    }
    Embedding out{Vector(head.b2), false};
    for (std::size_t o = 0; o < O; ++o) {
      const double* row = head.w2.data() + o * H;
      double s = 0.0;
      for (std::size_t r = 0; r < H; ++r) s += row[r] * hidden[r] * mask[r];
      out.values[o] += s;
    }
    if (trace) {
      trace->input = std::move(x);
      trace->hidden = std::move(hidden);
      trace->hidden_mask = std::move(mask);
    }
    return out;
  }

  // Accumulates d(loss)/d(params) given d(loss)/d(output) for one traced pass.
  void backward(const ForwardTrace& t, std::span<const double> grad_out, HeadGradients& g) const {
    const std::size_t H = head_.hidden_dim, O = head_.output_dim, D = head_.input_dim;
    if (grad_out.size() != O) throw std::invalid_argument("backward: gradient dimension mismatch");
    Vector grad_hidden(H, 0.0);
    for (std::size_t o = 0; o < O; ++o) {
      const double go = grad_out[o];
      if (go == 0.0) continue;
      g.b2[o] += go;
      double* gw = g.w2.data() + o * H;
      const double* w = head_.w2.data() + o * H;
      for (std::size_t r = 0; r < H; ++r) {
        const double a = t.hidden[r] * t.hidden_mask[r];
        gw[r] += go * a;
        grad_hidden[r] += go * w[r];
      }
    }
    for (std::size_t r = 0; r < H; ++r) {
      const double a = t.hidden[r];
      const double gpre = grad_hidden[r] * t.hidden_mask[r] * (1.0 - a * a);
      if (gpre == 0.0) continue;
      g.b1[r] += gpre;
      double* gw = g.w1.data() + r * D;
      for (auto [k, v] : t.input.entries) gw[k] += gpre * v;
    }
  }

  // Short stable identifier of backbone + current weights.
  std::string identifier() const {
    require_initialized();
    std::uint64_t h = fnv1a64(config_.backbone == BackboneKind::toy ? "toy" : "external-transformer");
    for (auto grp : head_.groups())
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(grp.data()), grp.size() * sizeof(double)), h);
    return std::string(config_.backbone == BackboneKind::toy ? "toy:" : "ext:") + text::hex64(h);
  }

  void save(const std::string& path) const;
  static Encoder load(const std::string& path);

 private:
  void require_initialized() const {
    if (!initialized_) throw std::logic_error("encoder is not initialized");
  }

  EncoderConfig config_{};
  std::variant<HashedNgramBackbone, FeatureTableBackbone> backbone_;
  ProjectionHead head_{};
  std::string tag_;
  bool initialized_ = false;
};

template <class E>
concept TextEncoder = requires(const E& e, std::string_view s) {
  { e.encode(s) } -> std::convertible_to<Embedding>;
  { e.identifier() } -> std::convertible_to<std::string>;
};

namespace binio {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, &v, sizeof v); }
inline void put_f64(std::ostream& os, double v) { put_bytes(os, &v, sizeof v); }
inline void put_str(std::ostream& os, std::string_view s) {
  put_u64(os, s.size());
  put_bytes(os, s.data(), s.size());
}
inline void put_vec(std::ostream& os, std::span<const double> v) {
  put_u64(os, v.size());
  put_bytes(os, v.data(), v.size() * sizeof(double));
}

inline void get_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw DataError("checkpoint is truncated");
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v;
  get_bytes(is, &v, sizeof v);
  return v;
}
inline double get_f64(std::istream& is) {
  double v;
  get_bytes(is, &v, sizeof v);
  return v;
}
inline std::string get_str(std::istream& is) {
  const auto n = get_u64(is);
  if (n > (1ULL << 32)) throw DataError("checkpoint string length is implausible");
  std::string s(n, '\0');
  get_bytes(is, s.data(), n);
  return s;
}
inline Vector get_vec(std::istream& is, std::size_t expected) {
  const auto n = get_u64(is);
  if (n != expected) throw DataError("checkpoint tensor has unexpected size");
  Vector v(n);
  get_bytes(is, v.data(), n * sizeof(double));
  return v;
}

}  // namespace binio

inline constexpr char kEncoderMagic[8] = {'Q', 'C', 'S', 'E', 'E', 'N', 'C', '1'};

inline void Encoder::save(const std::string& path) const {
  require_initialized();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  binio::put_bytes(os, kEncoderMagic, sizeof kEncoderMagic);
  binio::put_u64(os, static_cast<std::uint64_t>(config_.backbone));
  binio::put_u64(os, config_.input_dim);
  binio::put_u64(os, config_.projection_hidden_dim);
  binio::put_u64(os, config_.projection_output_dim);
  binio::put_f64(os, config_.dropout_rate);
  binio::put_u64(os, config_.ngram_min);
  binio::put_u64(os, config_.ngram_max);
  binio::put_u64(os, config_.hash_seed);
  binio::put_u64(os, config_.init_seed);
  binio::put_str(os, tag_);
  for (auto grp : head_.groups()) binio::put_vec(os, grp);
  if (const auto* table = std::get_if<FeatureTableBackbone>(&backbone_)) {
    binio::put_u64(os, table->size());
    for (const auto& [t, v] : table->entries()) {
      binio::put_str(os, t);
      binio::put_vec(os, v);
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

inline Encoder Encoder::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  binio::get_bytes(is, magic, sizeof magic);
  if (std::memcmp(magic, kEncoderMagic, sizeof magic) != 0) throw DataError(path + " is not an encoder checkpoint");
  EncoderConfig cfg;
  const auto kind = binio::get_u64(is);
  if (kind > 1) throw DataError("unknown backbone kind in " + path);
  cfg.backbone = static_cast<BackboneKind>(kind);
  cfg.input_dim = binio::get_u64(is);
  cfg.projection_hidden_dim = binio::get_u64(is);
  cfg.projection_output_dim = binio::get_u64(is);
  cfg.dropout_rate = binio::get_f64(is);
  cfg.ngram_min = binio::get_u64(is);
  cfg.ngram_max = binio::get_u64(is);
  cfg.hash_seed = binio::get_u64(is);
  cfg.init_seed = binio::get_u64(is);
  cfg.validate();
  Encoder e;
  e.config_ = cfg;
  e.tag_ = binio::get_str(is);
  auto& h = e.head_;
  h.input_dim = cfg.input_dim;
  h.hidden_dim = cfg.projection_hidden_dim;
  h.output_dim = cfg.projection_output_dim;
  h.w1 = binio::get_vec(is, h.hidden_dim * h.input_dim);
  h.b1 = binio::get_vec(is, h.hidden_dim);
  h.w2 = binio::get_vec(is, h.output_dim * h.hidden_dim);
  h.b2 = binio::get_vec(is, h.output_dim);
  if (cfg.backbone == BackboneKind::toy) {
    e.backbone_ = HashedNgramBackbone(cfg.input_dim, cfg.ngram_min, cfg.ngram_max, cfg.hash_seed);
  } else {
    FeatureTableBackbone table(cfg.input_dim);
    const auto n = binio::get_u64(is);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string t = binio::get_str(is);
      table.add(t, binio::get_vec(is, cfg.input_dim));
    }
    e.backbone_ = std::move(table);
  }
  e.initialized_ = true;
  return e;
}

}  // namespace quotecse
