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

// Synthetic news generator with known ground truth.
//
// Meaning is carried by concepts drawn from a global pool; each concept has
// several interchangeable surface forms (synonyms). Every article also owns a
// few entity words (names) that all of its quotes mention. Body quotes of an
// article use disjoint concepts.
//
// Headline quotes are derived from one body quote (the source):
//  * modified: each concept rewritten with another synonym with probability
//    `synonym_rate` (at least one always changes), then `drifted_concepts`
//    concepts replaced by concepts the article never mentions;
//  * contextomized: as above with `flipped_concepts` replacements.
//
// Entity words make all quotes of an article look alike and synonyms share
// no structure, so the two kinds differ only in which concepts they carry.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "quotecse/corpus.hpp"
#include "quotecse/rng.hpp"

namespace quotecse::synthetic {

struct Config {
  std::size_t concepts = 24;
  std::size_t synonyms = 2;
  std::size_t entities = 120;
  std::size_t entities_per_article = 4;
  std::size_t entities_per_quote = 3;
  std::size_t concepts_per_quote = 3;
  std::size_t min_body_quotes = 2;
  std::size_t max_body_quotes = 4;
  double synonym_rate = 0.5;
  std::size_t drifted_concepts = 0;
  std::size_t flipped_concepts = 2;
  // Unlabeled corpus composition.
  double contextomized_rate = 0.1;
  double single_body_rate = 0.05;
  double identical_rate = 0.05;
  std::uint64_t vocabulary_seed = 7;
};

struct QuoteSpec {
  std::vector<std::size_t> concepts;
  std::vector<std::size_t> forms;  // chosen synonym per concept
};

class Generator {
 public:
  explicit Generator(Config cfg) : cfg_(cfg) {
    if (cfg_.synonyms == 0 || cfg_.concepts_per_quote == 0 || cfg_.min_body_quotes == 0 ||
        cfg_.min_body_quotes > cfg_.max_body_quotes)
      throw std::invalid_argument("synthetic: degenerate configuration");
    if (cfg_.drifted_concepts >= cfg_.flipped_concepts)
      throw std::invalid_argument("synthetic: contextomized headlines must replace more concepts than modified ones");
    if (cfg_.concepts < cfg_.max_body_quotes * cfg_.concepts_per_quote + cfg_.flipped_concepts)
      throw std::invalid_argument("synthetic: concept pool too small for the largest article");
    if (cfg_.entities < cfg_.entities_per_article || cfg_.entities_per_article < cfg_.entities_per_quote)
      throw std::invalid_argument("synthetic: entity pool too small");
    Rng rng(mix_seed({cfg_.vocabulary_seed, 0x564f43ULL}));
    std::set<std::string> used;
    auto fresh = [&](std::size_t syllables) {
      static constexpr const char* kOnsets[] = {"b", "d", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "ch", "sh", "tr", "pl"};
      static constexpr const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ei"};
      for (;;) {
        std::string w;
        for (std::size_t s = 0; s < syllables; ++s) {
          w += kOnsets[rng.uniform_index(std::size(kOnsets))];
          w += kNuclei[rng.uniform_index(std::size(kNuclei))];
        }
        if (used.insert(w).second) return w;
      }
    };
    for (std::size_t e = 0; e < cfg_.entities; ++e) entities_.push_back(fresh(2));
    concepts_.resize(cfg_.concepts);
    for (auto& c : concepts_)
      for (std::size_t s = 0; s < cfg_.synonyms; ++s) c.push_back(fresh(3));
  }

  const Config& config() const noexcept { return cfg_; }

  // Concept number of a surface form; empty for entity words and unknown
  // tokens.
  std::optional<std::size_t> concept_of(std::string_view word) const {
    for (std::size_t c = 0; c < concepts_.size(); ++c)
      for (const auto& form : concepts_[c])
        if (form == word) return c;
    return std::nullopt;
  }

  std::string render(const QuoteSpec& q, const std::vector<std::size_t>& entities, Rng& rng) const {
    std::vector<std::size_t> pick = entities;
    rng.shuffle(pick);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < std::min(cfg_.entities_per_quote, pick.size()); ++k) words.push_back(entities_[pick[k]]);
    for (std::size_t c = 0; c < q.concepts.size(); ++c) words.push_back(concepts_[q.concepts[c]][q.forms[c]]);
    rng.shuffle(words);
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  QuoteSpec reword(const QuoteSpec& src, Rng& rng) const {
    QuoteSpec out = src;
    if (cfg_.synonyms < 2 || out.forms.empty()) return out;
    bool changed = false;
    for (auto& f : out.forms) {
      if (rng.bernoulli(cfg_.synonym_rate)) {
        f = other_form(f, rng);
        changed = true;
      }
    }
    if (!changed) {
      auto& f = out.forms[rng.uniform_index(out.forms.size())];
      f = other_form(f, rng);
    }
    return out;
  }

  QuoteSpec replace(QuoteSpec q, std::size_t n, const std::vector<std::size_t>& unused, Rng& rng) const {
    std::vector<std::size_t> slots(q.concepts.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    rng.shuffle(slots);
    std::vector<std::size_t> pool = unused;
    rng.shuffle(pool);
    n = std::min({n, slots.size(), pool.size()});
    for (std::size_t k = 0; k < n; ++k) {
      q.concepts[slots[k]] = pool[k];
      q.forms[slots[k]] = rng.uniform_index(cfg_.synonyms);
    }
    return q;
  }

  QuoteSpec paraphrase(const QuoteSpec& src, const std::vector<std::size_t>& unused, Rng& rng) const {
    return replace(reword(src, rng), cfg_.drifted_concepts, unused, rng);
  }

  QuoteSpec flip(const QuoteSpec& src, const std::vector<std::size_t>& unused, Rng& rng) const {
    return replace(reword(src, rng), cfg_.flipped_concepts, unused, rng);
  }

  struct Draft {
    std::vector<QuoteSpec> body;
    std::vector<std::size_t> entities;
    std::vector<std::size_t> unused_concepts;
  };

  Draft draft(std::size_t n_body, Rng& rng) const {
    Draft d;
    std::vector<std::size_t> ents(cfg_.entities);
    for (std::size_t i = 0; i < ents.size(); ++i) ents[i] = i;
    rng.shuffle(ents);
    d.entities.assign(ents.begin(), ents.begin() + static_cast<std::ptrdiff_t>(cfg_.entities_per_article));
    std::vector<std::size_t> pool(cfg_.concepts);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    rng.shuffle(pool);
    std::size_t next = 0;
    for (std::size_t q = 0; q < n_body; ++q) {
      QuoteSpec s;
      for (std::size_t c = 0; c < cfg_.concepts_per_quote; ++c) {
        s.concepts.push_back(pool[next++]);
        s.forms.push_back(rng.uniform_index(cfg_.synonyms));
      }
      d.body.push_back(std::move(s));
    }
    d.unused_concepts.assign(pool.begin() + static_cast<std::ptrdiff_t>(next), pool.end());
    return d;
  }

  static std::string compose_title(const std::string& headline) { return "Official says “" + headline + "”"; }

  static std::string compose_body(const std::vector<std::string>& quotes) {
    std::string body = "The briefing opened with remarks.";
    for (std::size_t i = 0; i < quotes.size(); ++i) {
      body += i % 2 == 0 ? " The official said \"" : " Later a spokesperson added \"";
      body += quotes[i];
      body += "\".";
    }
    return body;
  }

  // Unlabeled article mix per the configured rates. Text goes through the
  // regular quote extractor.
  Article article(const std::string& id, Rng& rng) const {
    const double r = rng.uniform01();
    const bool single = r < cfg_.single_body_rate;
    const bool identical = !single && r < cfg_.single_body_rate + cfg_.identical_rate;
    const bool flipped = !single && !identical && r < cfg_.single_body_rate + cfg_.identical_rate + cfg_.contextomized_rate;
    const std::size_t n_body =
        single ? 1 : cfg_.min_body_quotes + rng.uniform_index(cfg_.max_body_quotes - cfg_.min_body_quotes + 1);
    Draft d = draft(n_body, rng);
    std::vector<std::string> body;
    for (const auto& q : d.body) body.push_back(render(q, d.entities, rng));
    const std::size_t src = rng.uniform_index(d.body.size());
    std::string headline;
    if (identical)
      headline = body[src];
    else if (flipped)
      headline = render(flip(d.body[src], d.unused_concepts, rng), d.entities, rng);
    else
      headline = render(paraphrase(d.body[src], d.unused_concepts, rng), d.entities, rng);
    return make_article(id, compose_title(headline), compose_body(body), default_delimiters());
  }

  std::vector<Article> unlabeled(std::size_t n, std::uint64_t seed) const {
    Rng rng(mix_seed({seed, 0x554e4cULL}));
    std::vector<Article> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(article("u" + std::to_string(i), rng));
    return out;
  }

  // Balanced labeled set: exactly n/2 contextomized (rounded down), in
  // shuffled order. Identical headlines never occur.
  std::vector<DetectionExample> labeled(std::size_t n, std::uint64_t seed) const {
    Rng rng(mix_seed({seed, 0x4c4142ULL}));
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n / 2; ++i) labels[i] = 1;
    rng.shuffle(labels);
    std::vector<DetectionExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t n_body =
          cfg_.min_body_quotes + rng.uniform_index(cfg_.max_body_quotes - cfg_.min_body_quotes + 1);
      Draft d = draft(n_body, rng);
      DetectionExample ex;
      ex.article_id = "l" + std::to_string(i);
      for (const auto& q : d.body)
        ex.body_quotes.push_back(standalone_quote(render(q, d.entities, rng), QuoteSource::body, ex.body_quotes.size()));
      const std::size_t src = rng.uniform_index(d.body.size());
      const QuoteSpec head = labels[i] ? flip(d.body[src], d.unused_concepts, rng) : paraphrase(d.body[src], d.unused_concepts, rng);
      ex.headline_quote = standalone_quote(render(head, d.entities, rng), QuoteSource::headline, 0);
      ex.label = labels[i] ? Label::contextomized : Label::modified;
      out.push_back(std::move(ex));
    }
    return out;
  }

 private:
  std::size_t other_form(std::size_t f, Rng& rng) const {
    std::size_t g = rng.uniform_index(cfg_.synonyms - 1);
    return g >= f ? g + 1 : g;
  }

  Config cfg_;
  std::vector<std::string> entities_;
  std::vector<std::vector<std::string>> concepts_;
};

}  // namespace quotecse::synthetic
