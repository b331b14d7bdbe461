// Copyright 2026 The storyeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "storyeval/diversity.hpp"
#include "support.hpp"

namespace storyeval {
namespace {

using testing::oracle_bleu;
using testing::random_tokens;

TokenList toks(std::string_view s) { return tokenize_for_diversity(s); }

BleuConfig plain(int order) {
  BleuConfig c;
  c.max_order = order;
  c.smoothing = Smoothing::none;
  return c;
}

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(toks("\"Hi,\" said Sam."), (TokenList{"\"", "hi", ",", "\"", "said", "sam", "."}));
  EXPECT_EQ(toks("don't stop"), (TokenList{"don't", "stop"}));
  EXPECT_TRUE(toks("   ").empty());
}

TEST(Bleu, IdentityIsOne) {
  BleuConfig cfg;
  auto h = toks("the cat sat on the mat");
  EXPECT_DOUBLE_EQ(bleu(h, {toks("a dog"), h}, cfg), 1.0);
  auto short_h = toks("hi there");
  EXPECT_DOUBLE_EQ(bleu(short_h, {short_h}, cfg), 1.0);
}

TEST(Bleu, ZeroUnigramOverlapWithoutSmoothing) {
  EXPECT_DOUBLE_EQ(bleu(toks("a b c"), {toks("x y z")}, plain(4)), 0.0);
}

TEST(Bleu, HandCountedBigram) {
  double b = bleu(toks("the cat sat"), {toks("the cat ran")}, plain(2));
  EXPECT_NEAR(b, std::sqrt(2.0 / 3.0 * 1.0 / 2.0), 1e-12);
}

TEST(Bleu, ClippingAndBrevity) {
  // "the the the" vs "the cat": clipped unigram 1/3
  EXPECT_NEAR(bleu(toks("the the the"), {toks("the cat")}, plain(1)), 1.0 / 3.0, 1e-12);
  // hypothesis shorter than the closest reference
  BleuConfig cfg = plain(1);
  EXPECT_NEAR(bleu(toks("the cat"), {toks("the cat sat on")}, cfg), std::exp(1.0 - 2.0), 1e-12);
  cfg.brevity_penalty = false;
  EXPECT_DOUBLE_EQ(bleu(toks("the cat"), {toks("the cat sat on")}, cfg), 1.0);
}

TEST(Bleu, EpsilonSmoothingOnMissingOrders) {
  BleuConfig cfg;
  cfg.max_order = 2;
  cfg.epsilon = 0.1;
  // unigram 2/2, bigram 0/1 -> sqrt(1 * 0.1)
  EXPECT_NEAR(bleu(toks("cat sat"), {toks("sat cat")}, cfg), std::sqrt(0.1), 1e-12);
}

TEST(Bleu, InvalidInputs) {
  BleuConfig cfg;
  EXPECT_THROW(bleu({}, {toks("a")}, cfg), ValidationError);
  EXPECT_THROW(bleu(toks("a"), {}, cfg), ValidationError);
  EXPECT_THROW(bleu(toks("a"), {TokenList{}}, cfg), ValidationError);
  cfg.max_order = 10;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.max_order = 4;
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Bleu, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  for (const auto& cfg : testing::all_bleu_modes()) {
    for (int i = 0; i < 150; ++i) {
      auto hyp = random_tokens(rng, 1, 12, 6);
      std::vector<TokenList> refs;
      for (int r = 0, n = 1 + static_cast<int>(rng() % 3); r < n; ++r) refs.push_back(random_tokens(rng, 1, 12, 6));
      double got = bleu(hyp, refs, cfg);
      double want = oracle_bleu(hyp, refs, cfg);
      EXPECT_EQ(got, want);
      EXPECT_GE(got, 0.0);
      EXPECT_LE(got, 1.0 + 1e-15);
    }
  }
}

// ---------------------------------------------------------------------------
// Self-BLEU

StorySet story_set(const std::vector<std::string>& bodies) {
  StorySet set;
  for (std::size_t i = 0; i < bodies.size(); ++i) set.push_back({"s" + std::to_string(i), toks(bodies[i])});
  return set;
}

TEST(SelfBleu, IdenticalStoriesScoreOne) {
  auto set = story_set({"the cat sat on the mat", "the cat sat on the mat", "the cat sat on the mat"});
  BleuConfig cfg;
  auto lesson = self_bleu_lesson(set, cfg);
  ASSERT_TRUE(lesson.mean);
  EXPECT_DOUBLE_EQ(*lesson.mean, 1.0);
  for (const auto& s : lesson.per_story) EXPECT_DOUBLE_EQ(s.score, 1.0);
  EXPECT_DOUBLE_EQ(global_self_bleu(set, cfg).mean, 1.0);
}

TEST(SelfBleu, SingleStoryLessonIsAbsent) {
  auto lesson = self_bleu_lesson(story_set({"the cat"}), BleuConfig{});
  EXPECT_FALSE(lesson.mean);
  EXPECT_TRUE(lesson.per_story.empty());
}

TEST(SelfBleu, TwoStoriesEqualPairwiseBleu) {
  auto set = story_set({"the cat sat on the mat", "the dog sat on a log"});
  BleuConfig cfg;
  auto lesson = self_bleu_lesson(set, cfg);
  EXPECT_EQ(lesson.per_story[0].score, oracle_bleu(set[0].tokens, {set[1].tokens}, cfg));
  EXPECT_EQ(lesson.per_story[1].score, oracle_bleu(set[1].tokens, {set[0].tokens}, cfg));
}

TEST(SelfBleu, DisjointStoriesWithoutSmoothing) {
  EXPECT_DOUBLE_EQ(global_self_bleu(story_set({"a b c", "x y z"}), plain(4)).mean, 0.0);
}

TEST(SelfBleu, GlobalMatchesSequentialOracle) {
  std::mt19937_64 rng(17);
  for (const auto& cfg : testing::all_bleu_modes()) {
    for (int trial = 0; trial < 10; ++trial) {
      StorySet set;
      for (int i = 0; i < 5; ++i) set.push_back({"s" + std::to_string(i), random_tokens(rng, 10, 10, 8)});
      auto got = global_self_bleu(set, cfg);
      auto want = testing::oracle_global_self_bleu(set, cfg);
      double sum = 0.0;
      for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_EQ(got.per_story[i].score, want[i]);
        sum += want[i];
      }
      EXPECT_EQ(got.mean, sum / 5.0);
    }
  }
}

TEST(SelfBleu, ParallelIsBitIdentical) {
  std::mt19937_64 rng(23);
  StorySet set;
  for (int i = 0; i < 60; ++i) set.push_back({"s" + std::to_string(i), random_tokens(rng, 5, 40, 16)});
  BleuConfig cfg;
  auto seq = global_self_bleu(set, cfg, 1);
  for (std::size_t workers : {2u, 3u, 8u}) {
    auto par = global_self_bleu(set, cfg, workers);
    EXPECT_EQ(par.mean, seq.mean);
    EXPECT_EQ(par.per_story, seq.per_story);
  }
}

TEST(SelfBleu, PermutationInvariantPerStory) {
  std::mt19937_64 rng(29);
  StorySet set;
  for (int i = 0; i < 8; ++i) set.push_back({"s" + std::to_string(i), random_tokens(rng, 3, 15, 10)});
  BleuConfig cfg;
  auto base = global_self_bleu(set, cfg);
  auto shuffled = set;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto perm = global_self_bleu(shuffled, cfg);
  auto lesson_base = self_bleu_lesson(set, cfg);
  auto lesson_perm = self_bleu_lesson(shuffled, cfg);
  for (const auto& s : perm.per_story) {
    auto it = std::find_if(base.per_story.begin(), base.per_story.end(), [&](const StoryScore& x) { return x.story_id == s.story_id; });
    EXPECT_EQ(it->score, s.score);
  }
  for (const auto& s : lesson_perm.per_story) {
    auto it = std::find_if(lesson_base.per_story.begin(), lesson_base.per_story.end(),
                           [&](const StoryScore& x) { return x.story_id == s.story_id; });
    EXPECT_EQ(it->score, s.score);
  }
  EXPECT_NEAR(perm.mean, base.mean, 1e-12);
}

TEST(SelfBleu, GlobalNeedsTwoNonEmptyStories) {
  EXPECT_THROW(global_self_bleu(story_set({"a"}), BleuConfig{}), ValidationError);
  StorySet set = story_set({"a b", "c d"});
  set[1].tokens.clear();
  EXPECT_THROW(global_self_bleu(set, BleuConfig{}), ValidationError);
}

TEST(Diversity, GroupsByExperimentAndModel) {
  std::vector<Story> stories = {
      make_story("a1", 1, {"m", "base"}, "the cat sat"), make_story("a2", 1, {"m", "base"}, "the cat sat"),
      make_story("a3", 2, {"m", "base"}, "a dog ran"),   make_story("b1", 1, {"m", "rew"}, "the pig dug"),
      make_story("b2", 1, {"m", "rew"}, "a hen hid")};
  auto groups = compute_diversity(stories, BleuConfig{});
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].experiment, "base");
  EXPECT_DOUBLE_EQ(*groups[0].lessons.at(1).mean, 1.0);
  EXPECT_FALSE(groups[0].lessons.at(2).mean);
  EXPECT_EQ(groups[0].global.per_story.size(), 3u);

  auto jsonl = serialize_diversity(groups, BleuConfig{});
  int group_records = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j["record"] == "group") {
      ++group_records;
      EXPECT_TRUE(j.contains("bleu_config"));
    }
  }
  EXPECT_EQ(group_records, 2);
}

}  // namespace
}  // namespace storyeval
