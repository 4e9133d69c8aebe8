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

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "quotecse/detection.hpp"

namespace quotecse {
namespace {

using testing::at_cosine;
using testing::PlantedEncoder;

std::vector<Quote> body_of(PlantedEncoder& enc, const std::string& tag, const std::vector<double>& sims) {
  std::vector<Quote> out;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const std::string t = tag + std::to_string(k);
    enc.set(t, at_cosine(sims[k]));
    out.push_back(standalone_quote(t, QuoteSource::body, k));
  }
  return out;
}

TEST(SelectBodyQuote, Examples) {
  PlantedEncoder enc;
  enc.set("u", {1, 0});
  const auto u = standalone_quote("u", QuoteSource::headline, 0);
  auto m = select_body_quote(u, body_of(enc, "a", {0.2, 0.9, 0.4}), enc);
  EXPECT_EQ(m.index, 1u);
  EXPECT_NEAR(m.similarity, 0.9, 1e-12);
  EXPECT_EQ(select_body_quote(u, body_of(enc, "b", {-0.7}), enc).index, 0u);
  EXPECT_EQ(select_body_quote(u, body_of(enc, "c", {0.5, 0.5}), enc).index, 0u);
  EXPECT_THROW(select_body_quote(u, std::vector<Quote>{}, enc), std::invalid_argument);
}

TEST(SelectBodyQuote, AttainsMaximum) {
  Rng rng(31);
  PlantedEncoder enc;
  enc.set("u", {1, 0});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> sims(1 + rng.uniform_index(6));
    for (auto& s : sims) s = rng.uniform(-1, 1);
    const auto m = select_body_quote(enc.encode("u"), body_of(enc, "t" + std::to_string(trial) + "_", sims), enc);
    for (double s : sims) EXPECT_GE(m.similarity, s - 1e-12);
  }
}

TEST(BuildFeatures, Examples) {
  EXPECT_EQ(build_features({{1, 0}}, {{0, 1}}), (Vector{1, 0, 0, 1, 1, 1, 0, 0}));
  EXPECT_EQ(build_features({{2, -1}}, {{-1, 3}}), (Vector{2, -1, -1, 3, 3, 4, -2, -3}));
  EXPECT_EQ(build_features({{3, -2}}, {{3, -2}}), (Vector{3, -2, 3, -2, 0, 0, 9, 4}));
  EXPECT_THROW(build_features({{1}}, {{1, 2}}), std::invalid_argument);
}

TEST(BuildFeatures, SymmetricSegments) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Embedding u{Vector(5)}, v{Vector(5)};
    for (auto& x : u.values) x = rng.uniform(-2, 2);
    for (auto& x : v.values) x = rng.uniform(-2, 2);
    const auto a = build_features(u, v), b = build_features(v, u);
    ASSERT_EQ(a.size(), 20u);
    for (std::size_t k = 10; k < 20; ++k) EXPECT_EQ(a[k], b[k]);
  }
}

TEST(Classify, ZeroParamsGiveHalf) {
  const auto p = ClassifierParams::zeros(8);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(8);
    for (auto& v : x) v = rng.uniform(-100, 100);
    EXPECT_EQ(classify(x, p), 0.5);
  }
  EXPECT_EQ(decide(0.5), Label::modified);
  EXPECT_EQ(decide(std::nextafter(0.5, 1.0)), Label::contextomized);
  EXPECT_THROW(classify(Vector(7), p), std::invalid_argument);
}

TEST(Classify, HandForwardPass) {
  auto p = ClassifierParams::zeros(4, 1);
  p.w1 = {0.5, -1.0, 0.25, 2.0};
  p.b1 = {0.1};
  p.w2 = {-1.5};
  p.b2 = {0.3};
  const Vector x = {1.0, 0.5, 2.0, 0.25};
  const double hidden = std::max(0.0, 0.1 + 0.5 - 0.5 + 0.5 + 0.5);
  EXPECT_NEAR(classify(x, p), 1.0 / (1.0 + std::exp(-(0.3 - 1.5 * hidden))), 1e-9);
  const Vector off = {-1.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(classify(off, p), 1.0 / (1.0 + std::exp(-0.3)), 1e-9);
}

TEST(Classify, SigmoidStable) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(-800.0), -1e-300);
  EXPECT_LE(sigmoid(800.0), 1.0);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(ClassifierBackward, MatchesFiniteDifferences) {
  Rng rng(6);
  auto p = ClassifierParams::init(6, 3, 5);
  Vector x(6);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (int y : {0, 1}) {
    auto g = ClassifierParams::zeros(6, 5);
    detail::classifier_backward(x, y, p, g);
    auto params = p.groups();
    auto grads = g.groups();
    for (std::size_t grp = 0; grp < 4; ++grp)
      for (std::size_t k = 0; k < params[grp].size(); ++k) {
        const double keep = params[grp][k];
        params[grp][k] = keep + 1e-6;
        const double up = detail::bce(classify(x, p), y);
        params[grp][k] = keep - 1e-6;
        const double down = detail::bce(classify(x, p), y);
        params[grp][k] = keep;
        EXPECT_NEAR(grads[grp][k], (up - down) / 2e-6, 1e-6);
      }
  }
}

struct Toy {
  std::vector<Vector> x;
  std::vector<int> y;
};

Toy separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double a = rng.uniform(0.5, 2.0) * (y ? 1 : -1);
    t.x.push_back({a + rng.uniform(-0.2, 0.2), rng.uniform(-1, 1)});
    t.y.push_back(y);
  }
  return t;
}

TEST(TrainClassifier, SeparableReachesPerfectAccuracy) {
  const auto t = separable(64, 1);
  ClassifierConfig cfg;
  cfg.validation_fraction = 0.0;
  cfg.max_epochs = 50;  // 4 steps per epoch
  const auto p = train_classifier(t.x, t.y, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < t.x.size(); ++i) correct += static_cast<int>(decide(classify(t.x[i], p))) == t.y[i];
  EXPECT_EQ(correct, t.x.size());
}

TEST(TrainClassifier, ZeroLearningRateKeepsInit) {
  const auto t = separable(32, 2);
  ClassifierConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.seed = 9;
  EXPECT_EQ(train_classifier(t.x, t.y, cfg), ClassifierParams::init(2, 9));
}

TEST(TrainClassifier, Deterministic) {
  const auto t = separable(40, 3);
  ClassifierConfig cfg;
  cfg.seed = 4;
  EXPECT_EQ(train_classifier(t.x, t.y, cfg), train_classifier(t.x, t.y, cfg));
  cfg.seed = 5;
  EXPECT_NE(train_classifier(t.x, t.y, cfg), train_classifier(t.x, t.y, ClassifierConfig{}));
}

TEST(TrainClassifier, Errors) {
  const std::vector<Vector> x = {{1}, {2}};
  EXPECT_THROW(train_classifier(x, std::vector<int>{1, 1}, ClassifierConfig{}), std::invalid_argument);
  EXPECT_THROW(train_classifier(x, std::vector<int>{0, 2}, ClassifierConfig{}), std::invalid_argument);
  EXPECT_THROW(train_classifier(x, std::vector<int>{0}, ClassifierConfig{}), std::invalid_argument);
  EXPECT_THROW(train_classifier({}, {}, ClassifierConfig{}), std::invalid_argument);
}

TEST(Detect, IdenticalMatchIsModified) {
  PlantedEncoder enc;
  Rng rng(8);
  std::vector<DetectionExample> train;
  std::vector<Vector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) {
    DetectionExample ex;
    ex.article_id = "t" + std::to_string(i);
    const std::string h = ex.article_id + "h", b = ex.article_id + "b";
    const double ang = rng.uniform(0, 6.28);
    const Vector u = {std::cos(ang), std::sin(ang)};
    enc.set(h, u);
    ex.label = i % 2 ? Label::contextomized : Label::modified;
    enc.set(b, ex.label == Label::modified ? u : Vector{-u[1] * 2, u[0] * 2});
    ex.headline_quote = standalone_quote(h, QuoteSource::headline, 0);
    ex.body_quotes = {standalone_quote(b, QuoteSource::body, 0)};
    feats.push_back(example_features(ex, enc));
    labels.push_back(static_cast<int>(ex.label));
  }
  ClassifierConfig cfg;
  cfg.max_epochs = 60;
  const auto params = train_classifier(feats, labels, cfg);

  DetectionExample probe;
  probe.article_id = "probe";
  enc.set("ph", {0.6, 0.8});
  enc.set("pb", {0.6, 0.8});
  enc.set("px", {-0.8, 0.6});
  probe.headline_quote = standalone_quote("ph", QuoteSource::headline, 0);
  probe.body_quotes = {standalone_quote("px", QuoteSource::body, 0), standalone_quote("pb", QuoteSource::body, 1)};
  const auto d = detect(probe, enc, params);
  EXPECT_EQ(d.label, Label::modified);
  EXPECT_EQ(d.matched_index, 1u);
  EXPECT_EQ(d.matched_quote, "pb");
  EXPECT_NEAR(d.similarity, 1.0, 1e-12);
  const auto again = detect(probe, enc, params);
  EXPECT_EQ(again.probability, d.probability);
  const auto j = detection_to_json(probe.article_id, d);
  EXPECT_EQ(j["label"], 0);
  EXPECT_EQ(j["matched_quote"], "pb");

  probe.body_quotes.clear();
  EXPECT_THROW(detect(probe, enc, params), std::invalid_argument);
}

TEST(ClassifierCheckpoint, RoundTrip) {
  testing::TempDir dir;
  const auto p = ClassifierParams::init(12, 3);
  save_classifier(p, dir.file("c.bin"));
  EXPECT_EQ(load_classifier(dir.file("c.bin")), p);
  testing::write_file(dir.file("bad.bin"), "QCSEENC1garbage");
  EXPECT_THROW(load_classifier(dir.file("bad.bin")), DataError);
}

}  // namespace
}  // namespace quotecse
