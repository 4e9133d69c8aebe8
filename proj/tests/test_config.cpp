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

#include <sstream>

#include "fixtures.hpp"
#include "quotecse/config.hpp"

namespace quotecse {
namespace {

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  std::istringstream in("# header\n loss = simcse \n\ntemperature=0.1 # trailing\n");
  const auto kv = parse_key_values(in);
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("loss"), "simcse");
  EXPECT_EQ(kv.at("temperature"), "0.1");
}

TEST(KeyValues, MalformedLinesAllReported) {
  std::istringstream in("loss simcse\nok = 1\nalso bad\n");
  try {
    parse_key_values(in, "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.problems().size(), 2u);
    EXPECT_NE(e.problems()[0].find("run.cfg:1"), std::string::npos);
    EXPECT_NE(e.problems()[1].find("run.cfg:3"), std::string::npos);
  }
}

TEST(KeyValues, MissingFile) { EXPECT_THROW(load_key_values("/nonexistent/run.cfg"), ConfigError); }

TEST(RunConfig, DefaultsMatchTrainingSetup) {
  const RunConfig c;
  EXPECT_EQ(c.train.temperature, 0.05);
  EXPECT_EQ(c.train.batch_size, 16u);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.max_epochs, 10u);
  EXPECT_EQ(c.train.queue_size, 40u);
  EXPECT_EQ(c.train.loss, LossKind::quotecse);
  EXPECT_FALSE(c.train.moco);
  EXPECT_EQ(c.encoder.projection_hidden_dim, 100u);
  EXPECT_EQ(c.encoder.projection_output_dim, 100u);
}

TEST(RunConfig, AppliesEveryKey) {
  const KeyValues kv = {{"temperature", "0.1"}, {"batch_size", "8"}, {"learning_rate", "0.001"},
                        {"max_epochs", "3"}, {"queue_size", "20"}, {"momentum", "0.99"},
                        {"seed", "7"}, {"loss", "ablation2"}, {"moco", "on"},
                        {"reassign", "off"}, {"freeze_negatives", "true"}, {"input_dim", "128"},
                        {"projection_hidden_dim", "32"}, {"projection_output_dim", "16"}, {"dropout_rate", "0.2"},
                        {"ngram_min", "3"}, {"ngram_max", "5"}, {"hash_seed", "4"},
                        {"init_seed", "5"}, {"classifier_learning_rate", "0.02"}, {"classifier_batch_size", "32"},
                        {"classifier_max_epochs", "20"}, {"classifier_validation_fraction", "0.2"}};
  EXPECT_EQ(kv.size(), config_keys().size());
  const auto c = apply_key_values(RunConfig{}, kv);
  EXPECT_EQ(c.train.temperature, 0.1);
  EXPECT_EQ(c.train.batch_size, 8u);
  EXPECT_EQ(c.train.loss, LossKind::ablation2);
  EXPECT_TRUE(c.train.moco);
  EXPECT_FALSE(c.train.reassign);
  EXPECT_TRUE(c.train.freeze_negatives);
  EXPECT_EQ(c.encoder.input_dim, 128u);
  EXPECT_EQ(c.encoder.ngram_max, 5u);
  EXPECT_EQ(c.classifier.max_epochs, 20u);
  EXPECT_EQ(c.classifier.validation_fraction, 0.2);
  const auto j = to_json(c);
  for (const auto& k : config_keys()) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(RunConfig, EnumeratesEveryBadKey) {
  const KeyValues kv = {{"temprature", "0.1"}, {"batch_size", "zero"}, {"loss", "triplet"},
                        {"momentum", "1.5"}, {"moco", "maybe"}, {"seed", "3"}};
  try {
    apply_key_values(RunConfig{}, kv);
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.problems().size(), 5u);
    const std::string msg = e.what();
    for (const char* k : {"temprature", "batch_size", "loss", "momentum", "moco"})
      EXPECT_NE(msg.find(k), std::string::npos) << k;
  }
}

TEST(RunConfig, RejectsInvertedNgramRange) {
  EXPECT_THROW(apply_key_values(RunConfig{}, {{"ngram_min", "5"}, {"ngram_max", "3"}}), ConfigError);
}

TEST(RunConfig, HashTracksContent) {
  const RunConfig a;
  const auto b = apply_key_values(a, {{"loss", "simcse"}});
  EXPECT_EQ(config_hash(to_json(a)), config_hash(to_json(RunConfig{})));
  EXPECT_NE(config_hash(to_json(a)), config_hash(to_json(b)));
  EXPECT_EQ(config_hash(to_json(a)).size(), 16u);
}

}  // namespace
}  // namespace quotecse
