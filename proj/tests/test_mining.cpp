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


#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "quotecse/mining.hpp"

namespace quotecse {
namespace {

using testing::at_cosine;
using testing::PlantedEncoder;

// Article whose headline quote is `id`/h and body quotes `id`/b<k>, with the
// given anchor cosines planted in `enc`.
Article planted_article(PlantedEncoder& enc, const std::string& id, const std::vector<double>& sims) {
  Article a;
  a.id = id;
  a.headline_quotes.push_back(standalone_quote(id + "/h", QuoteSource::headline, 0));
  enc.set(id + "/h", {1.0, 0.0});
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const std::string t = id + "/b" + std::to_string(k);
    a.body_quotes.push_back(standalone_quote(t, QuoteSource::body, k));
    enc.set(t, at_cosine(sims[k]));
  }
  return a;
}

TEST(AssignSamples, ArgmaxPositiveSeededNegative) {
  PlantedEncoder enc;
  const auto a = planted_article(enc, "x", {0.9, 0.3, 0.5});
  std::set<std::size_t> negatives;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto t = assign_samples(a, enc, seed);
    ASSERT_TRUE(t.has_value());
    EXPECT_EQ(t->positive.index, 0u);
    EXPECT_NEAR(t->anchor_positive_sim, 0.9, 1e-12);
    EXPECT_NE(t->negative.index, 0u);
    negatives.insert(t->negative.index);
    // The draw is uniform over the remaining quotes in index order.
    Rng rng(seed);
    EXPECT_EQ(t->negative.index, 1 + rng.uniform_index(2));
  }
  EXPECT_EQ(negatives, (std::set<std::size_t>{1, 2}));
}

TEST(AssignSamples, SingleBodyQuoteYieldsNone) {
  PlantedEncoder enc;
  EXPECT_FALSE(assign_samples(planted_article(enc, "x", {0.9}), enc, 0).has_value());
}

TEST(AssignSamples, TieGoesToLowestIndex) {
  PlantedEncoder enc;
  const auto t = assign_samples(planted_article(enc, "x", {0.8, 0.8}), enc, 3);
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(t->positive.index, 0u);
  EXPECT_EQ(t->negative.index, 1u);
}

TEST(AssignSamples, IdenticalHeadlineExcluded) {
  PlantedEncoder enc;
  auto a = planted_article(enc, "x", {0.8, 0.3});
  a.body_quotes.push_back(standalone_quote("x/h", QuoteSource::body, 2));
  EXPECT_FALSE(assign_samples(a, enc, 0).has_value());
  EXPECT_EQ(precheck(a), MiningOutcome::identical);
}

TEST(AssignSamples, FirstHeadlineQuoteBySpanIsAnchor) {
  PlantedEncoder enc;
  auto a = planted_article(enc, "x", {0.8, 0.3});
  Quote later = standalone_quote("later", QuoteSource::headline, 1);
  later.span = {20, 27};
  a.headline_quotes.insert(a.headline_quotes.begin(), later);
  EXPECT_EQ(anchor_quote(a)->text, "x/h");
}

TEST(AssignSamples, Properties) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    PlantedEncoder enc;
    std::vector<double> sims(2 + rng.uniform_index(6));
    for (auto& s : sims) s = rng.uniform(-1, 1);
    const auto a = planted_article(enc, "a" + std::to_string(trial), sims);
    const auto t = assign_samples(a, enc, static_cast<std::uint64_t>(trial));
    ASSERT_TRUE(t.has_value());
    for (double s : sims) EXPECT_GE(t->anchor_positive_sim, s - 1e-12);
    EXPECT_NE(t->positive.index, t->negative.index);
    const auto again = assign_samples(a, enc, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(again->positive.index, t->positive.index);
    EXPECT_EQ(again->negative.index, t->negative.index);
  }
}

TEST(FilterByThreshold, Boundary) {
  MinedTriplet t;
  t.anchor_positive_sim = 0.80;
  EXPECT_TRUE(filter_by_threshold(t));
  t.anchor_positive_sim = 0.74;
  EXPECT_FALSE(filter_by_threshold(t));
  t.anchor_positive_sim = 0.75;
  EXPECT_TRUE(filter_by_threshold(t));
}

TEST(ReassignBatch, UnchangedEncoderIsIdempotent) {
  PlantedEncoder enc;
  std::vector<TrainingItem> batch;
  for (int i = 0; i < 5; ++i) {
    auto a = planted_article(enc, "r" + std::to_string(i), {0.1 * i, 0.95, 0.3});
    auto t = *assign_samples(a, enc, 0);
    batch.push_back({a, t});
  }
  const auto out = reassign_batch(std::span<const TrainingItem>(batch), enc, 7);
  ASSERT_EQ(out.size(), batch.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].positive.index, batch[i].triplet.positive.index);
}

TEST(ReassignBatch, PositiveFlipsWithEncoder) {
  PlantedEncoder enc;
  const auto a = planted_article(enc, "f", {0.9, 0.2});
  std::vector<TrainingItem> batch = {{a, *assign_samples(a, enc, 0)}};
  EXPECT_EQ(batch[0].triplet.positive.index, 0u);
  enc.set("f/b0", at_cosine(0.2));
  enc.set("f/b1", at_cosine(0.9));
  enc.bump();
  const auto out = reassign_batch(std::span<const TrainingItem>(batch), enc, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].positive.index, 1u);
  EXPECT_EQ(out[0].negative.index, 0u);
  EXPECT_EQ(out[0].assigner, "planted:1");
}

TEST(ReassignBatch, ThresholdNotReapplied) {
  PlantedEncoder enc;
  const auto a = planted_article(enc, "t", {0.9, 0.2});
  std::vector<TrainingItem> batch = {{a, *assign_samples(a, enc, 0)}};
  enc.set("t/b0", at_cosine(0.1));
  const auto out = reassign_batch(std::span<const TrainingItem>(batch), enc, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT(out[0].anchor_positive_sim, kDefaultSimilarityThreshold);
}

TEST(ReassignBatch, DegenerateArticleSkipped) {
  PlantedEncoder enc;
  auto a = planted_article(enc, "d", {0.9, 0.2});
  std::vector<TrainingItem> batch = {{a, *assign_samples(a, enc, 0)}};
  batch[0].article.body_quotes.pop_back();
  EXPECT_TRUE(reassign_batch(std::span<const TrainingItem>(batch), enc, 1).empty());
}

TEST(ReassignBatch, NegativesVaryAcrossStepsUnlessFrozen) {
  PlantedEncoder enc;
  const auto a = planted_article(enc, "n", {0.9, 0.1, 0.2, 0.3, 0.4, 0.5});
  std::vector<TrainingItem> batch = {{a, *assign_samples(a, enc, 0)}};
  std::set<std::size_t> drawn, frozen;
  for (std::uint64_t step = 0; step < 40; ++step) {
    drawn.insert(reassign_batch(std::span<const TrainingItem>(batch), enc, step)[0].negative.index);
    frozen.insert(reassign_batch(std::span<const TrainingItem>(batch), enc, step, 0, true)[0].negative.index);
  }
  EXPECT_GT(drawn.size(), 1u);
  EXPECT_EQ(frozen, (std::set<std::size_t>{batch[0].triplet.negative.index}));
  EXPECT_EQ(reassignment_seed(0, "n", 3), reassignment_seed(0, "n", 3));
  EXPECT_NE(reassignment_seed(0, "n", 3), reassignment_seed(0, "n", 4));
}

TEST(MineCorpus, TenArticleStats) {
  PlantedEncoder enc;
  std::vector<Article> arts;
  for (int i = 0; i < 4; ++i) arts.push_back(planted_article(enc, "k" + std::to_string(i), {0.9, 0.1}));
  arts.push_back(planted_article(enc, "s0", {0.9}));
  arts.push_back(planted_article(enc, "s1", {0.9}));
  for (int i = 0; i < 2; ++i) {
    auto a = planted_article(enc, "i" + std::to_string(i), {0.9, 0.1});
    a.body_quotes[1].text = a.headline_quotes[0].text;
    arts.push_back(a);
  }
  arts.push_back(planted_article(enc, "b0", {0.74, 0.1}));
  arts.push_back(planted_article(enc, "b1", {0.5, 0.6}));
  const auto r = mine_corpus(std::span<const Article>(arts), enc, 0.75, 1);
  EXPECT_EQ(r.stats.total, 10u);
  EXPECT_EQ(r.stats.kept, 4u);
  EXPECT_EQ(r.kept.size(), 4u);
  EXPECT_EQ(r.stats.no_body_pair, 2u);
  EXPECT_EQ(r.stats.identical, 2u);
  EXPECT_EQ(r.stats.below_threshold, 2u);
  EXPECT_EQ(r.stats.dropped(), 6u);
  const auto j = r.stats.to_json();
  EXPECT_EQ(j["dropped"]["below_threshold"], 2);
  EXPECT_EQ(r.train.size() + r.val.size() + r.test.size(), 4u);
}

TEST(MineCorpus, EmptyStream) {
  PlantedEncoder enc;
  const auto r = mine_corpus(std::span<const Article>(), enc);
  EXPECT_TRUE(r.kept.empty());
  EXPECT_TRUE(r.train.empty() && r.val.empty() && r.test.empty());
}

TEST(MineCorpus, SplitEightyTenTen) {
  PlantedEncoder enc;
  std::vector<Article> arts;
  for (int i = 0; i < 100; ++i) arts.push_back(planted_article(enc, "p" + std::to_string(i), {0.9, 0.1}));
  const auto r = mine_corpus(std::span<const Article>(arts), enc, 0.75, 3);
  EXPECT_EQ(r.train.size(), 80u);
  EXPECT_EQ(r.val.size(), 10u);
  EXPECT_EQ(r.test.size(), 10u);
  std::set<std::string> ids;
  for (const auto* part : {&r.train, &r.val, &r.test})
    for (const auto& item : *part) EXPECT_TRUE(ids.insert(item.article.id).second);
}

TEST(MineCorpus, MonotoneInThreshold) {
  PlantedEncoder enc;
  Rng rng(23);
  std::vector<Article> arts;
  for (int i = 0; i < 200; ++i)
    arts.push_back(planted_article(enc, "m" + std::to_string(i), {rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  std::size_t prev = arts.size() + 1;
  for (double th = -1.0; th <= 1.0; th += 0.05) {
    const auto r = mine_corpus(std::span<const Article>(arts), enc, th, 0);
    EXPECT_LE(r.stats.kept, prev);
    prev = r.stats.kept;
    for (const auto& item : r.kept) EXPECT_GE(item.triplet.anchor_positive_sim, th);
  }
}

TEST(MineCorpus, EncoderFailureNamesArticle) {
  PlantedEncoder enc;
  auto a = planted_article(enc, "ok", {0.9, 0.1});
  a.body_quotes.push_back(standalone_quote("unknown text", QuoteSource::body, 2));
  a.id = "broken-7";
  const std::vector<Article> arts = {a};
  try {
    mine_corpus(std::span<const Article>(arts), enc);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("broken-7"), std::string::npos);
  }
}

TEST(TripletJson, RoundTrip) {
  PlantedEncoder enc;
  const auto a = planted_article(enc, "j", {0.3, 0.9, 0.1});
  const TrainingItem item{a, *assign_samples(a, enc, 5)};
  const auto back = parse_triplet(triplet_to_json(item).dump());
  EXPECT_EQ(back.triplet.article_id, "j");
  EXPECT_EQ(back.triplet.anchor.text, "j/h");
  EXPECT_EQ(back.triplet.positive.index, 1u);
  EXPECT_EQ(back.triplet.negative.index, item.triplet.negative.index);
  EXPECT_EQ(back.article.body_quotes.size(), 3u);
  EXPECT_DOUBLE_EQ(back.triplet.anchor_positive_sim, item.triplet.anchor_positive_sim);
}

TEST(TripletJson, BareRecord) {
  const auto item =
      parse_triplet(R"({"article_id":"z","anchor":"a","positive":"p","negative":"n","anchor_positive_sim":0.8})");
  EXPECT_EQ(item.article.body_quotes.size(), 2u);
  EXPECT_EQ(item.triplet.positive.text, "p");
  EXPECT_EQ(item.triplet.negative.index, 1u);
  EXPECT_THROW(parse_triplet(R"({"article_id":"z","anchor":"a","positive":"p","negative":"n"})", 3), DataError);
}

}  // namespace
}  // namespace quotecse
