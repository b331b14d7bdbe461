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

#include <atomic>
#include <mutex>
#include <random>

#include <gtest/gtest.h>

#include "storyeval/genclient.hpp"
#include "support.hpp"

namespace storyeval {
namespace {

using testing::MockChatServer;

GenerationConfig config_for(const MockChatServer& server) {
  GenerationConfig c;
  c.endpoint = server.url();
  c.model = "mock-model";
  c.retry.base_delay = std::chrono::milliseconds(5);
  c.retry.max_delay = std::chrono::milliseconds(20);
  c.timeout_seconds = 10;
  return c;
}

Lesson lesson30() { return {30, "1", {"/ʃ/", "/ɪ/"}, std::nullopt}; }

std::string words(int n, const std::string& w = "cat") {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += w;
    if (i % 10 == 9) out += '.';
  }
  if (n % 10 != 0) out += '.';
  return out;
}

TEST(Retry, BackoffDoublesUpToCap) {
  RetryPolicy p;
  p.base_delay = std::chrono::milliseconds(100);
  p.max_delay = std::chrono::milliseconds(350);
  EXPECT_EQ(p.delay_after(1).count(), 100);
  EXPECT_EQ(p.delay_after(2).count(), 200);
  EXPECT_EQ(p.delay_after(3).count(), 350);
  EXPECT_EQ(p.delay_after(9).count(), 350);
}

TEST(Config, ValidatesRanges) {
  GenerationConfig c;
  c.model = "m";
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.top_p, 0.9);
  EXPECT_DOUBLE_EQ(c.temperature, 0.8);
  auto bad = c;
  bad.top_p = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.temperature = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.stories_per_lesson = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.api_key = "secret";
  EXPECT_EQ(bad.stamp().dump().find("secret"), std::string::npos);
}

TEST(Generate, RequestBodiesAreDeterministic) {
  GenerationConfig cfg;
  cfg.model = "m";
  EXPECT_EQ(build_story_request(lesson30(), cfg), build_story_request(lesson30(), cfg));
  auto story = make_story("s", 1, {"m", "e"}, "Sam sat.");
  std::vector<FewShotExample> fs{{"Pam hid.", {"/æ/", "/ɪ/", "/d/"}}};
  EXPECT_EQ(build_error_request(story, fs, cfg), build_error_request(story, fs, cfg));
}

TEST(Generate, DefaultsProduceTenRequestsWithSamplingParameters) {
  MockChatServer server([](const nlohmann::json&, int n) { return std::make_pair(200, MockChatServer::completion("Story " + std::to_string(n))); });
  auto cfg = config_for(server);
  cfg.api_key = "k3y";
  auto res = generate_stories(lesson30(), cfg, *std::make_unique<HttplibTransport>(cfg.endpoint, 10));
  ASSERT_EQ(res.outputs.size(), 10u);
  for (const auto& o : res.outputs) EXPECT_TRUE(o.starts_with("Story "));
  auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 10u);
  for (const auto& b : bodies) {
    EXPECT_DOUBLE_EQ(b["top_p"].get<double>(), 0.9);
    EXPECT_DOUBLE_EQ(b["temperature"].get<double>(), 0.8);
    EXPECT_EQ(b["model"], "mock-model");
    EXPECT_NE(b["messages"][1]["content"].get<std::string>().find("/ʃ/, /ɪ/"), std::string::npos);
  }
  for (const auto& h : server.auth_headers()) EXPECT_EQ(h, "Bearer k3y");
}

TEST(Generate, ConcurrencyCapIsRespected) {
  MockChatServer server([](const nlohmann::json&, int) { return std::make_pair(200, MockChatServer::completion("ok")); },
                        std::chrono::milliseconds(40));
  auto cfg = config_for(server);
  cfg.stories_per_lesson = 12;
  cfg.max_concurrency = 3;
  HttplibTransport transport(cfg.endpoint, 10);
  auto res = generate_stories(lesson30(), cfg, transport);
  EXPECT_EQ(res.outputs.size(), 12u);
  EXPECT_LE(server.max_in_flight(), 3);
  EXPECT_GE(server.max_in_flight(), 2);
}

TEST(Generate, RateLimitIsRetried) {
  MockChatServer server([](const nlohmann::json&, int n) {
    if (n <= 2) return std::make_pair(429, std::string(R"({"error":"slow down"})"));
    return std::make_pair(200, MockChatServer::completion("fine"));
  });
  auto cfg = config_for(server);
  cfg.stories_per_lesson = 1;
  HttplibTransport transport(cfg.endpoint, 10);
  std::vector<std::string> logged;
  std::mutex mu;
  auto res = generate_stories(lesson30(), cfg, transport, {}, [&](const std::string& m) {
    std::lock_guard lock(mu);
    logged.push_back(m);
  });
  EXPECT_EQ(res.outputs[0], "fine");
  EXPECT_EQ(res.attempts[0], 3);
  EXPECT_EQ(server.requests(), 3);
  ASSERT_FALSE(logged.empty());
  EXPECT_NE(logged.back().find("after 3 attempts"), std::string::npos);
}

TEST(Generate, ClientErrorsAreNotRetried) {
  MockChatServer server([](const nlohmann::json&, int) { return std::make_pair(400, std::string("{}")); });
  auto cfg = config_for(server);
  cfg.stories_per_lesson = 1;
  HttplibTransport transport(cfg.endpoint, 10);
  try {
    generate_stories(lesson30(), cfg, transport);
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(server.requests(), 1);
}

TEST(Generate, ServerErrorsExhaustRetries) {
  MockChatServer server([](const nlohmann::json&, int) { return std::make_pair(503, std::string("{}")); });
  auto cfg = config_for(server);
  cfg.stories_per_lesson = 1;
  cfg.retry.max_attempts = 3;
  HttplibTransport transport(cfg.endpoint, 10);
  EXPECT_THROW(generate_stories(lesson30(), cfg, transport), NetworkError);
  EXPECT_EQ(server.requests(), 3);
}

TEST(Generate, UnreachableEndpointFailsAfterRetries) {
  GenerationConfig cfg;
  cfg.model = "m";
  cfg.endpoint = "http://127.0.0.1:1";
  cfg.stories_per_lesson = 1;
  cfg.retry.max_attempts = 2;
  cfg.retry.base_delay = std::chrono::milliseconds(1);
  HttplibTransport transport(cfg.endpoint, 2);
  try {
    generate_stories(lesson30(), cfg, transport);
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.status(), 0);
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(Generate, MalformedResponseNamesTheLesson) {
  MockChatServer server([](const nlohmann::json&, int) { return std::make_pair(200, std::string(R"({"choices":[{"message":{}}]})")); });
  auto cfg = config_for(server);
  cfg.stories_per_lesson = 1;
  HttplibTransport transport(cfg.endpoint, 10);
  try {
    generate_stories(lesson30(), cfg, transport);
    FAIL();
  } catch (const MalformedResponse& e) {
    EXPECT_NE(std::string(e.what()).find("lesson 30"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Simulated errors

Story sample_story() { return make_story("s1", 1, {"m", "e"}, "Sam sat on a mat."); }
std::vector<FewShotExample> fewshot() { return {{"Pam hid the pig.", {"/æ/", "/ɪ/", "/g/"}}}; }

TEST(Errors, PhonemeListParsing) {
  EXPECT_EQ(parse_phoneme_list(R"(["/θ/", "/ð/", "/r/"])").size(), 3u);
  EXPECT_EQ(parse_phoneme_list("Here you go: [\"/θ/\", \"/r/\"]").size(), 2u);
  EXPECT_EQ(parse_phoneme_list("- /θ/\n- /r/\n- /l/\n"), (std::vector<std::string>{"/θ/", "/r/", "/l/"}));
  EXPECT_EQ(parse_phoneme_list("/θ/, /r/, /l/, /s/"), (std::vector<std::string>{"/θ/", "/r/", "/l/", "/s/"}));
}

TEST(Errors, FivePhonemesAccepted) {
  MockChatServer server([](const nlohmann::json&, int) {
    return std::make_pair(200, MockChatServer::completion(R"(["/θ/","/ð/","/r/","/l/","/v/"])"));
  });
  auto cfg = config_for(server);
  HttplibTransport transport(cfg.endpoint, 10);
  auto got = simulate_errors(sample_story(), fewshot(), cfg, transport);
  EXPECT_EQ(got.size(), 5u);
  auto body = server.bodies().at(0);
  // system, few-shot question and answer, then the story question
  EXPECT_EQ(body["messages"].size(), 4u);
}

TEST(Errors, TwoPhonemesRejectedAfterReprompts) {
  MockChatServer server([](const nlohmann::json&, int) { return std::make_pair(200, MockChatServer::completion(R"(["/θ/","/ð/"])")); });
  auto cfg = config_for(server);
  cfg.error_reprompts = 2;
  HttplibTransport transport(cfg.endpoint, 10);
  EXPECT_THROW(simulate_errors(sample_story(), fewshot(), cfg, transport), ValidationError);
  EXPECT_EQ(server.requests(), 3);
}

TEST(Errors, NineThenFourSucceedsWithFour) {
  MockChatServer server([](const nlohmann::json&, int n) {
    if (n == 1) return std::make_pair(200, MockChatServer::completion(R"(["a","b","c","d","e","f","g","h","i"])"));
    return std::make_pair(200, MockChatServer::completion(R"(["/θ/","/ð/","/r/","/l/"])"));
  });
  auto cfg = config_for(server);
  HttplibTransport transport(cfg.endpoint, 10);
  auto got = simulate_errors(sample_story(), fewshot(), cfg, transport);
  EXPECT_EQ(got, (std::vector<std::string>{"/θ/", "/ð/", "/r/", "/l/"}));
}

TEST(Errors, BatchRecordsFailuresAndContinues) {
  MockChatServer server([](const nlohmann::json& body, int) {
    auto q = body["messages"].back()["content"].get<std::string>();
    if (q.find("bad story") != std::string::npos) return std::make_pair(200, MockChatServer::completion(R"(["x"])"));
    return std::make_pair(200, MockChatServer::completion(R"(["/a/","/b/","/c/"])"));
  });
  auto cfg = config_for(server);
  cfg.error_reprompts = 0;
  HttplibTransport transport(cfg.endpoint, 10);
  std::vector<Story> stories = {make_story("good", 1, {"m", "e"}, "good story."), make_story("bad", 1, {"m", "e"}, "bad story.")};
  auto res = simulate_errors_batch(stories, fewshot(), cfg, transport);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_TRUE(res[0].phonemes);
  EXPECT_FALSE(res[1].phonemes);
  EXPECT_FALSE(res[1].error.empty());
}

// ---------------------------------------------------------------------------
// Sanitizer

Lesson lesson() { return {1, "K", {"/æ/", "/t/"}, std::nullopt}; }

TEST(Sanitize, BlankRunsCollapse) {
  std::string raw = words(30) + "\n\n\n" + words(30, "sat");
  auto r = sanitize(raw, lesson());
  EXPECT_EQ(r.text, words(30) + "\n\n" + words(30, "sat"));
  EXPECT_TRUE(r.flags.empty());
}

TEST(Sanitize, WordCountBoundsAreFlags) {
  auto low = sanitize(words(40), lesson());
  EXPECT_TRUE(low.flags.contains("word_count_low"));
  EXPECT_EQ(low.text, words(40));
  auto high = sanitize(words(351), lesson());
  EXPECT_TRUE(high.flags.contains("word_count_high"));
  EXPECT_FALSE(sanitize(words(50), lesson()).flags.contains("word_count_low"));
  EXPECT_FALSE(sanitize(words(350), lesson()).flags.contains("word_count_high"));
}

TEST(Sanitize, CleanStoryUnchanged) {
  auto r = sanitize(words(120), lesson());
  EXPECT_EQ(r.text, words(120));
  EXPECT_TRUE(r.flags.empty());
}

TEST(Sanitize, StripsSpecialCharactersAndPreamble) {
  std::string raw = "Sure! Here is a short story about Sam:\n\n\x01" + words(60) + "\xE2\x80\x8B\r\n```\n";
  auto r = sanitize(raw, lesson());
  EXPECT_EQ(r.text, words(60));
  EXPECT_EQ(r.flags, (std::set<std::string>{"meta_preamble_removed"}));
}

TEST(Sanitize, PromptEchoAndNonStory) {
  auto echo = sanitize(words(60) + " Practice /æ/, /t/ today.", lesson());
  EXPECT_TRUE(echo.flags.contains("prompt_echo"));
  auto no_sentences = sanitize(std::string(60 * 4, 'a'), lesson());
  EXPECT_TRUE(no_sentences.flags.contains("non_story"));
}

TEST(Sanitize, EmptyInput) {
  auto r = sanitize("\n\n \x02", lesson());
  EXPECT_TRUE(r.text.empty());
  EXPECT_TRUE(r.flags.contains("empty_output"));
}

std::string fuzz_sample(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "cat", "Sam", " ", "  ", "\n", "\n\n\n", "\r\n", "\t", ".", "!", "**", "*", "#", "# ", "## ", "```",
      "~~~", "\xE2\x80\x8B", "\xC2\xA0", "\x01", "\x7F", "\xFF", "\xE2\x80\xA8", "Here is a story:", "Sure, here's the story",
      "\"", "æ", "/æ/, /t/", "word", "-", "\xEF\xBB\xBF", "\xC2"};
  std::string out;
  for (int i = 0, n = static_cast<int>(rng() % 60); i < n; ++i) out += pieces[rng() % pieces.size()];
  return out;
}

TEST(Sanitize, Idempotent) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 500; ++i) {
    auto raw = fuzz_sample(rng);
    auto once = sanitize(raw, lesson());
    auto twice = sanitize(once.text, lesson());
    ASSERT_EQ(twice.text, once.text) << "sample " << i;
    auto a = once.flags, b = twice.flags;
    a.erase("meta_preamble_removed");
    EXPECT_EQ(a, b) << "sample " << i;
  }
}

}  // namespace
}  // namespace storyeval
