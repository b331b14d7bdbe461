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

#pragma once

// Story generation and reading-error simulation through an OpenAI-compatible
// chat-completions endpoint, plus output sanitation.
//
// Requests:  POST <endpoint><path> with {model, messages, top_p, temperature}.
// Responses: choices[0].message.content holds the generated text.
// Auth:      bearer token taken from GenerationConfig::api_key.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/curate.hpp"
#include "storyeval/error.hpp"
#include "storyeval/parallel.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

using Logger = std::function<void(const std::string&)>;

// Response body did not have the expected shape.
class MalformedResponse : public NetworkError {
 public:
  explicit MalformedResponse(const std::string& what) : NetworkError(what) {}
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};

  // Delay before attempt `attempt + 1`, given `attempt` failures so far.
  std::chrono::milliseconds delay_after(int attempt) const {
    auto d = base_delay;
    for (int i = 1; i < attempt && d < max_delay; ++i) d *= 2;
    return std::min(d, max_delay);
  }
};

struct GenerationConfig {
  std::string endpoint = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model;
  double top_p = 0.9;
  double temperature = 0.8;
  int stories_per_lesson = 10;
  int max_concurrency = 4;
  RetryPolicy retry;
  int timeout_seconds = 120;
  int error_reprompts = 3;  // extra prompts when the error count is out of range
  std::string api_key;

  void validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("generation: top_p must be in (0, 1]");
    if (!(temperature > 0.0)) throw ValidationError("generation: temperature must be > 0");
    if (stories_per_lesson < 1) throw ValidationError("generation: stories_per_lesson must be >= 1");
    if (max_concurrency < 1) throw ValidationError("generation: max_concurrency must be >= 1");
    if (retry.max_attempts < 1) throw ValidationError("generation: max_attempts must be >= 1");
    if (error_reprompts < 0) throw ValidationError("generation: error_reprompts must be >= 0");
    if (model.empty()) throw ValidationError("generation: model name is required");
  }

  // Everything except the credential.
  nlohmann::json stamp() const {
    return {{"endpoint", endpoint},
            {"path", path},
            {"model", model},
            {"top_p", top_p},
            {"temperature", temperature},
            {"stories_per_lesson", stories_per_lesson},
            {"max_concurrency", max_concurrency},
            {"max_attempts", retry.max_attempts},
            {"backoff_base_ms", retry.base_delay.count()},
            {"backoff_max_ms", retry.max_delay.count()},
            {"timeout_seconds", timeout_seconds},
            {"error_reprompts", error_reprompts}};
  }
};

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure, timeout)
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body, const std::string& bearer) = 0;
};

// One httplib client per request, so concurrent calls share no state.
class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, int timeout_seconds)
      : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {}

  HttpResponse post_json(const std::string& path, const std::string& body, const std::string& bearer) override {
    httplib::Client cli(base_url_);
    cli.set_connection_timeout(timeout_seconds_, 0);
    cli.set_read_timeout(timeout_seconds_, 0);
    cli.set_write_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

 private:
  std::string base_url_;
  int timeout_seconds_;
};

inline bool is_retryable(int status) { return status == 0 || status == 429 || status >= 500; }

struct RequestOutcome {
  std::string body;
  int attempts = 0;
};

// 429, 5xx and transport failures are retried with exponential backoff; any
// other non-2xx status fails immediately.
inline RequestOutcome post_with_retry(HttpTransport& transport, const GenerationConfig& config, const std::string& body,
                                      const std::string& context, const Logger& log = {}) {
  for (int attempt = 1;; ++attempt) {
    auto res = transport.post_json(config.path, body, config.api_key);
    if (res.status >= 200 && res.status < 300) {
      if (log && attempt > 1) log(context + ": succeeded after " + std::to_string(attempt) + " attempts");
      return {std::move(res.body), attempt};
    }
    std::string why = res.status == 0 ? "transport error: " + res.error : "HTTP " + std::to_string(res.status);
    if (!is_retryable(res.status))
      throw NetworkError(context + ": " + why + " (not retried)", res.status, attempt);
    if (attempt >= config.retry.max_attempts)
      throw NetworkError(context + ": " + why + " after " + std::to_string(attempt) + " attempts", res.status, attempt);
    auto delay = config.retry.delay_after(attempt);
    if (log) log(context + ": " + why + ", attempt " + std::to_string(attempt) + ", retrying in " + std::to_string(delay.count()) + " ms");
    std::this_thread::sleep_for(delay);
  }
}

inline std::string parse_chat_content(const std::string& body, const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw MalformedResponse(context + ": response body is not JSON");
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw MalformedResponse(context + ": response has no choices");
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
      !choice["message"].contains("content") || !choice["message"]["content"].is_string())
    throw MalformedResponse(context + ": response is missing choices[0].message.content");
  return choice["message"]["content"].get<std::string>();
}

inline nlohmann::json chat_body(const GenerationConfig& config, nlohmann::json messages) {
  return {{"model", config.model}, {"messages", std::move(messages)}, {"top_p", config.top_p}, {"temperature", config.temperature}};
}

// ---------------------------------------------------------------------------
// Story generation

// Request body for one story slot. Identical for every slot of a lesson.
inline std::string build_story_request(const Lesson& lesson, const GenerationConfig& config,
                                       const InstructionTemplate& instruction = {}) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", instruction.system}});
  messages.push_back({{"role", "user"}, {"content", instruction.render(lesson.phonemes)}});
  return chat_body(config, std::move(messages)).dump();
}

struct GenerationResult {
  std::vector<std::string> outputs;  // slot order
  std::vector<int> attempts;
};

inline GenerationResult generate_stories(const Lesson& lesson, const GenerationConfig& config, HttpTransport& transport,
                                         const InstructionTemplate& instruction = {}, const Logger& log = {}) {
  config.validate();
  const std::string body = build_story_request(lesson, config, instruction);
  const auto n = static_cast<std::size_t>(config.stories_per_lesson);
  GenerationResult out;
  out.outputs.resize(n);
  out.attempts.resize(n);
  parallel_for(n, static_cast<std::size_t>(config.max_concurrency), [&](std::size_t slot) {
    std::string ctx = "lesson " + std::to_string(lesson.lesson_id) + " slot " + std::to_string(slot);
    auto res = post_with_retry(transport, config, body, ctx, log);
    out.outputs[slot] = parse_chat_content(res.body, ctx);
    out.attempts[slot] = res.attempts;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Simulated reading errors

struct FewShotExample {
  std::string story;
  std::vector<std::string> phonemes;
};

// JSON lines {story, phonemes[]}.
inline std::vector<FewShotExample> parse_fewshot(std::string_view content, const std::string& source = "fewshot") {
  std::vector<FewShotExample> out;
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    auto j = detail::parse_json_line(lines[i], source, i + 1);
    FewShotExample ex;
    ex.story = detail::required_string(j, "story", source, i + 1);
    if (!j.contains("phonemes") || !j["phonemes"].is_array() || j["phonemes"].empty())
      throw ParseError(source, i + 1, "phonemes must be a non-empty array");
    for (const auto& p : j["phonemes"]) {
      if (!p.is_string()) throw ParseError(source, i + 1, "phoneme entries must be strings");
      ex.phonemes.push_back(p.get<std::string>());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<FewShotExample> load_fewshot(const std::filesystem::path& path) {
  return parse_fewshot(text::read_file(path), path.string());
}

inline std::string error_question(const std::string& story) {
  return "Story:\n" + story +
         "\n\nList the phonemes a beginning reader would most likely mispronounce while reading this story. "
         "Answer with a JSON array of 3 to 8 phoneme strings and nothing else.";
}

inline std::string build_error_request(const Story& story, const std::vector<FewShotExample>& fewshot,
                                       const GenerationConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"},
                      {"content", "You simulate the phonemic reading errors of early readers in grades K-2, based on "
                                  "observed mispronunciations of real children."}});
  for (const auto& ex : fewshot) {
    messages.push_back({{"role", "user"}, {"content", error_question(ex.story)}});
    messages.push_back({{"role", "assistant"}, {"content", nlohmann::json(ex.phonemes).dump()}});
  }
  messages.push_back({{"role", "user"}, {"content", error_question(story.text)}});
  return chat_body(config, std::move(messages)).dump();
}

// Reads a phoneme list from model output: the first JSON array of strings if
// one parses, otherwise comma/newline separated items with bullets and quotes
// removed.
inline std::vector<std::string> parse_phoneme_list(const std::string& content) {
  auto open = content.find('[');
  auto close = content.rfind(']');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    try {
      auto j = nlohmann::json::parse(content.substr(open, close - open + 1));
      if (j.is_array() && std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_string(); })) {
        std::vector<std::string> out;
        for (const auto& v : j) {
          auto t = text::trim(v.template get_ref<const std::string&>());
          if (!t.empty()) out.emplace_back(t);
        }
        return out;
      }
    } catch (const nlohmann::json::parse_error&) {
    }
  }
  std::vector<std::string> out;
  std::string item;
  auto flush = [&] {
    std::string_view t = text::trim(item);
    while (!t.empty() && (t.front() == '-' || t.front() == '*' || t.front() == '"' || t.front() == '\'' ||
                          (t.front() >= '0' && t.front() <= '9' && t.size() > 1 && (t[1] == '.' || t[1] == ')')))) {
      t.remove_prefix(t.front() >= '0' && t.front() <= '9' ? 2 : 1);
      t = text::trim(t);
    }
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '.')) t.remove_suffix(1);
    if (!t.empty()) out.emplace_back(t);
    item.clear();
  };
  for (char c : content) {
    if (c == ',' || c == '\n' || c == ';') {
      flush();
    } else {
      item.push_back(c);
    }
  }
  flush();
  return out;
}

inline std::vector<std::string> simulate_errors(const Story& story, const std::vector<FewShotExample>& fewshot,
                                                const GenerationConfig& config, HttpTransport& transport,
                                                const Logger& log = {}) {
  if (fewshot.empty()) throw ValidationError("simulate_errors: few-shot examples are required");
  const std::string body = build_error_request(story, fewshot, config);
  const std::string ctx = "story " + story.story_id;
  std::size_t last = 0;
  for (int prompt = 0; prompt <= config.error_reprompts; ++prompt) {
    auto res = post_with_retry(transport, config, body, ctx, log);
    auto phonemes = parse_phoneme_list(parse_chat_content(res.body, ctx));
    last = phonemes.size();
    if (last >= kMinSimulatedErrors && last <= kMaxSimulatedErrors) return phonemes;
    if (log) log(ctx + ": got " + std::to_string(last) + " phonemes, re-prompting");
  }
  throw ValidationError(ctx + ": simulated error count " + std::to_string(last) + " outside 3-8 after " +
                        std::to_string(config.error_reprompts + 1) + " prompts");
}

struct ErrorSimulation {
  std::string story_id;
  std::optional<std::vector<std::string>> phonemes;
  std::string error;
};

// Failures are recorded per story; the batch keeps going.
inline std::vector<ErrorSimulation> simulate_errors_batch(const std::vector<Story>& stories,
                                                          const std::vector<FewShotExample>& fewshot,
                                                          const GenerationConfig& config, HttpTransport& transport,
                                                          const Logger& log = {}) {
  config.validate();
  std::vector<ErrorSimulation> out(stories.size());
  parallel_for(stories.size(), static_cast<std::size_t>(config.max_concurrency), [&](std::size_t i) {
    out[i].story_id = stories[i].story_id;
    try {
      out[i].phonemes = simulate_errors(stories[i], fewshot, config, transport, log);
    } catch (const ValidationError& e) {
      out[i].error = e.what();
    } catch (const NetworkError& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Sanitation

inline constexpr int kMinStoryWords = 50;
inline constexpr int kMaxStoryWords = 350;

struct SanitationReport {
  std::string text;
  std::set<std::string> flags;
};

namespace detail {

inline bool is_removed_code_point(char32_t cp) {
  if (cp < 0x20) return cp != '\n';
  if (cp == 0x7F) return true;
  if (cp >= 0x80 && cp <= 0x9F) return true;
  if (cp == 0x00AD || cp == 0xFFFD || cp == 0xFEFF) return true;
  if (cp >= 0x200B && cp <= 0x200F) return true;
  if (cp >= 0x202A && cp <= 0x202E) return true;
  if (cp >= 0x2060 && cp <= 0x2069) return true;
  return false;
}

// Drops control, zero-width, bidi and invalid sequences; normalizes line
// endings, tabs and non-breaking spaces.
inline std::string strip_special(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp = text::decode_utf8(raw, pos);
    if (cp == '\r') {
      if (pos < raw.size() && raw[pos] == '\n') continue;
      out.push_back('\n');
    } else if (cp == '\t' || cp == 0x00A0 || cp == 0x202F || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200A)) {
      out.push_back(' ');
    } else if (cp == 0x2028 || cp == 0x2029 || cp == '\v' || cp == '\f') {
      out.push_back('\n');
    } else if (!is_removed_code_point(cp)) {
      text::append_utf8(out, cp);
    }
  }
  return out;
}

inline std::string clean_line(std::string line) {
  replace_all(line, "**", "");
  std::string collapsed;
  for (char c : line) {
    if (c == ' ' && (collapsed.empty() || collapsed.back() == ' ')) continue;
    collapsed.push_back(c);
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  // Markdown heading markers.
  while (!collapsed.empty() && collapsed.front() == '#') {
    std::size_t i = collapsed.find_first_not_of('#');
    if (i == std::string::npos || collapsed[i] != ' ') break;
    std::size_t j = collapsed.find_first_not_of(' ', i);
    collapsed.erase(0, j == std::string::npos ? collapsed.size() : j);
  }
  return collapsed;
}

inline bool is_fence(std::string_view line) { return line.starts_with("```") || line.starts_with("~~~"); }

inline bool is_meta_preamble(const std::string& line) {
  static const std::regex re(
      R"(^(sure|certainly|okay|ok|of course|absolutely)?[,!.]?\s*(here('s| is| are)|below is|this is)\b.*\bstor(y|ies)\b.*$)",
      std::regex::icase | std::regex::ECMAScript);
  return line.size() < 300 && std::regex_match(line, re);
}

inline int sentence_boundaries(std::string_view body) {
  int n = 0;
  for (const auto& tok : text::split_whitespace(body)) n += ends_sentence(tok) ? 1 : 0;
  return n;
}

}  // namespace detail

inline SanitationReport sanitize(std::string_view raw, const Lesson& lesson, const InstructionTemplate& instruction = {}) {
  SanitationReport report;
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(detail::strip_special(raw))) {
    auto cleaned = detail::clean_line(std::move(line));
    if (detail::is_fence(cleaned)) continue;
    lines.push_back(std::move(cleaned));
  }
  // Collapse blank runs and drop blank edges.
  auto normalize_blank = [](std::vector<std::string>& ls) {
    std::vector<std::string> out;
    for (auto& l : ls) {
      if (l.empty() && (out.empty() || out.back().empty())) continue;
      out.push_back(std::move(l));
    }
    while (!out.empty() && out.back().empty()) out.pop_back();
    ls = std::move(out);
  };
  normalize_blank(lines);
  while (!lines.empty() && detail::is_meta_preamble(lines.front())) {
    lines.erase(lines.begin());
    report.flags.insert(std::string(flag::kMetaPreambleRemoved));
    while (!lines.empty() && lines.front().empty()) lines.erase(lines.begin());
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) report.text += '\n';
    report.text += lines[i];
  }

  const int words = text::word_count(report.text);
  if (words == 0) report.flags.insert(std::string(flag::kEmptyOutput));
  if (words < kMinStoryWords) report.flags.insert(std::string(flag::kWordCountLow));
  if (words > kMaxStoryWords) report.flags.insert(std::string(flag::kWordCountHigh));
  // A single phoneme such as "a" would match almost any text, so only
  // multi-item lists count as an echo.
  if (lesson.phonemes.size() >= 2 && report.text.find(render_phoneme_list(lesson.phonemes)) != std::string::npos)
    report.flags.insert(std::string(flag::kPromptEcho));
  if (!lesson.phonemes.empty() && report.text.find(instruction.render(lesson.phonemes)) != std::string::npos)
    report.flags.insert(std::string(flag::kPromptEcho));
  if (detail::sentence_boundaries(report.text) < 2) report.flags.insert(std::string(flag::kNonStory));
  return report;
}

}  // namespace storyeval
