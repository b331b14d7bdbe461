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

// Data model and ingestion: curriculum lessons, stories, CoNLL-U annotations
// and external score sidecars.
//
// File layouts:
//   lessons   JSON document, either an array of lesson objects or
//             {"lessons": [...]}. Each object: lesson_id, grade, phonemes[],
//             optional exemplar.
//   stories   JSON lines: story_id, lesson_id, source{model, experiment},
//             text, optional word_count (checked), optional flags[].
//   scores    JSON lines: story_id, optional token_logprobs[], optional toxicity.
//   CoNLL-U   documents start at a "# story_id = <id>" comment; entity spans
//             are read from Entity=B|I|S[-TYPE] markers in the MISC column.

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "storyeval/error.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

struct Lesson {
  int lesson_id = 0;
  std::string grade;
  std::vector<std::string> phonemes;
  std::optional<std::string> exemplar;

  friend bool operator==(const Lesson&, const Lesson&) = default;
};

struct Provenance {
  std::string model;
  std::string experiment;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

namespace flag {
inline constexpr std::string_view kEmptyOutput = "empty_output";
inline constexpr std::string_view kWordCountLow = "word_count_low";
inline constexpr std::string_view kWordCountHigh = "word_count_high";
inline constexpr std::string_view kPromptEcho = "prompt_echo";
inline constexpr std::string_view kNonStory = "non_story";
inline constexpr std::string_view kMetaPreambleRemoved = "meta_preamble_removed";
}  // namespace flag

struct Story {
  std::string story_id;
  int lesson_id = 0;
  Provenance source;
  std::string text;
  int word_count = 0;
  std::set<std::string> flags;

  friend bool operator==(const Story&, const Story&) = default;
};

struct Token {
  int index = 0;  // 1-based
  std::string surface;
  std::optional<int> head;  // 0 = root
  std::optional<std::string> deprel;

  friend bool operator==(const Token&, const Token&) = default;
};

struct SentenceAnnotation {
  std::vector<Token> tokens;
  std::set<std::string> entities;

  bool has_arcs() const {
    return !tokens.empty() &&
           std::all_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.head.has_value(); });
  }
};

struct AnnotatedDocument {
  std::string story_id;
  std::vector<SentenceAnnotation> sentences;
};

struct ExternalScores {
  std::string story_id;
  std::optional<std::vector<double>> token_logprobs;  // natural log, each <= 0
  std::optional<double> toxicity;                     // [0, 1]
};

struct Corpus {
  std::vector<Lesson> lessons;
  std::vector<Story> stories;
};

// ---------------------------------------------------------------------------
// Lessons and stories

namespace detail {

using nlohmann::json;

inline Lesson lesson_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": lesson record is not an object");
  Lesson l;
  if (!j.contains("lesson_id") || !j["lesson_id"].is_number_integer())
    throw ValidationError(where + ": lesson_id missing or not an integer");
  l.lesson_id = j["lesson_id"].get<int>();
  if (j.contains("grade")) {
    const auto& g = j["grade"];
    if (g.is_string()) {
      l.grade = g.get<std::string>();
    } else if (g.is_number_integer()) {
      l.grade = std::to_string(g.get<long long>());
    } else if (!g.is_null()) {
      throw ValidationError(where + ": grade must be a string label");
    }
  }
  if (!j.contains("phonemes") || !j["phonemes"].is_array() || j["phonemes"].empty())
    throw ValidationError(where + ": phonemes must be a non-empty array");
  for (const auto& p : j["phonemes"]) {
    if (!p.is_string()) throw ValidationError(where + ": phoneme entries must be strings");
    auto t = text::trim(p.get_ref<const std::string&>());
    if (t.empty()) throw ValidationError(where + ": blank phoneme entry");
    l.phonemes.emplace_back(t);
  }
  if (j.contains("exemplar") && !j["exemplar"].is_null()) {
    if (!j["exemplar"].is_string()) throw ValidationError(where + ": exemplar must be a string");
    l.exemplar = j["exemplar"].get<std::string>();
  }
  return l;
}

inline json lesson_to_json(const Lesson& l) {
  json j = {{"lesson_id", l.lesson_id}, {"grade", l.grade}, {"phonemes", l.phonemes}};
  if (l.exemplar) j["exemplar"] = *l.exemplar;
  return j;
}

inline json story_to_json(const Story& s) {
  return json{{"story_id", s.story_id},
              {"lesson_id", s.lesson_id},
              {"source", {{"model", s.source.model}, {"experiment", s.source.experiment}}},
              {"text", s.text},
              {"word_count", s.word_count},
              {"flags", s.flags}};
}

inline json parse_json_line(std::string_view line, const std::string& source, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(source, lineno, std::string("malformed JSON: ") + e.what());
  }
}

inline std::string required_string(const json& j, const char* key, const std::string& source,
                                   std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_string()) throw ParseError(source, lineno, std::string(key) + " missing or not a string");
  return j[key].get<std::string>();
}

}  // namespace detail

inline std::vector<Lesson> parse_lessons(std::string_view content, const std::string& source = "lessons") {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": malformed JSON: " + e.what());
  }
  const json* arr = &doc;
  if (doc.is_object() && doc.contains("lessons")) arr = &doc["lessons"];
  if (!arr->is_array()) throw ValidationError(source + ": expected an array of lessons");

  std::vector<Lesson> lessons;
  std::set<int> seen;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    auto where = source + ": lesson record " + std::to_string(i + 1);
    Lesson l = detail::lesson_from_json((*arr)[i], where);
    if (!seen.insert(l.lesson_id).second)
      throw ValidationError(where + ": duplicate lesson_id " + std::to_string(l.lesson_id));
    lessons.push_back(std::move(l));
  }
  return lessons;
}

inline std::vector<Lesson> load_lessons(const std::filesystem::path& path) {
  return parse_lessons(text::read_file(path), path.string());
}

inline std::string serialize_lessons(const std::vector<Lesson>& lessons) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : lessons) arr.push_back(detail::lesson_to_json(l));
  return arr.dump(2) + "\n";
}

inline Story make_story(std::string story_id, int lesson_id, Provenance source, std::string body,
                        std::set<std::string> flags = {}) {
  Story s;
  s.story_id = std::move(story_id);
  s.lesson_id = lesson_id;
  s.source = std::move(source);
  s.text = std::move(body);
  s.word_count = text::word_count(s.text);
  s.flags = std::move(flags);
  return s;
}

// Parses story records. When `lessons` is given every lesson_id must resolve.
inline std::vector<Story> parse_stories(std::string_view content, const std::string& source = "stories",
                                        const std::vector<Lesson>* lessons = nullptr) {
  std::set<int> known;
  if (lessons) {
    for (const auto& l : *lessons) known.insert(l.lesson_id);
  }
  std::vector<Story> stories;
  std::set<std::string> ids;
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    auto j = detail::parse_json_line(lines[i], source, lineno);
    if (!j.is_object()) throw ParseError(source, lineno, "record is not an object");

    Story s;
    s.story_id = detail::required_string(j, "story_id", source, lineno);
    if (s.story_id.empty()) throw ParseError(source, lineno, "empty story_id");
    if (!j.contains("lesson_id") || !j["lesson_id"].is_number_integer())
      throw ParseError(source, lineno, "lesson_id missing or not an integer");
    s.lesson_id = j["lesson_id"].get<int>();
    s.text = detail::required_string(j, "text", source, lineno);
    if (j.contains("source") && !j["source"].is_null()) {
      const auto& src = j["source"];
      if (!src.is_object()) throw ParseError(source, lineno, "source must be an object");
      s.source.model = src.value("model", "");
      s.source.experiment = src.value("experiment", "");
    }
    if (j.contains("flags") && !j["flags"].is_null()) {
      if (!j["flags"].is_array()) throw ParseError(source, lineno, "flags must be an array");
      for (const auto& f : j["flags"]) {
        if (!f.is_string()) throw ParseError(source, lineno, "flag labels must be strings");
        s.flags.insert(f.get<std::string>());
      }
    }
    s.word_count = text::word_count(s.text);
    if (j.contains("word_count") && !j["word_count"].is_null()) {
      if (!j["word_count"].is_number_integer() || j["word_count"].get<int>() != s.word_count)
        throw ParseError(source, lineno,
                         "word_count does not match the text (expected " + std::to_string(s.word_count) + ")");
    }
    if (text::trim(s.text).empty() && !s.flags.contains(std::string(flag::kEmptyOutput)))
      throw ParseError(source, lineno, "empty text without the empty_output flag");
    if (!ids.insert(s.story_id).second) throw ParseError(source, lineno, "duplicate story_id " + s.story_id);
    if (lessons && !known.contains(s.lesson_id))
      throw ParseError(source, lineno, "dangling lesson_id " + std::to_string(s.lesson_id));
    stories.push_back(std::move(s));
  }
  return stories;
}

inline std::vector<Story> load_stories(const std::filesystem::path& path,
                                       const std::vector<Lesson>* lessons = nullptr) {
  return parse_stories(text::read_file(path), path.string(), lessons);
}

inline std::string serialize_stories(const std::vector<Story>& stories) {
  std::string out;
  for (const auto& s : stories) {
    out += detail::story_to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline Corpus load_corpus(const std::filesystem::path& lessons_path, const std::filesystem::path& stories_path) {
  Corpus c;
  c.lessons = load_lessons(lessons_path);
  c.stories = load_stories(stories_path, &c.lessons);
  return c;
}

// ---------------------------------------------------------------------------
// Heuristic annotation

namespace detail {

// Function words and common sentence openers; never entities.
inline const std::unordered_set<std::string>& entity_stoplist() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at", "away",
      "back", "be", "because", "before", "big", "but", "by", "can", "come", "could", "day", "did",
      "do", "does", "down", "each", "every", "finally", "first", "for", "from", "get", "go", "good",
      "had", "has", "have", "he", "her", "here", "him", "his", "how", "i", "if", "in", "into", "is",
      "it", "its", "just", "last", "later", "let", "like", "little", "look", "maybe", "me", "my",
      "next", "no", "not", "now", "of", "off", "oh", "ok", "okay", "on", "once", "one", "or", "our",
      "out", "over", "please", "see", "she", "so", "some", "soon", "suddenly", "that", "the",
      "their", "them", "then", "there", "these", "they", "this", "those", "to", "today", "too", "two",
      "up", "us", "very", "was", "we", "well", "were", "what", "when", "where", "which", "while",
      "who", "why", "will", "with", "wow", "yes", "yay", "you", "your", "end", "hello",
      "hi", "thank", "thanks", "together", "tomorrow", "yesterday", "everyone", "everybody",
      "someone", "still", "even", "only", "sometimes", "always", "never", "let's",
  };
  return words;
}

inline bool starts_upper(std::string_view s) { return !s.empty() && s.front() >= 'A' && s.front() <= 'Z'; }

inline bool is_alphabetic(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    char32_t cp = text::decode_utf8(s, pos);
    if (cp < 0x80) {
      if (!((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z'))) return false;
    } else if (cp == 0xFFFD || text::is_punct(cp)) {
      return false;
    }
  }
  return !s.empty();
}

inline bool closes_quote(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x201D || cp == 0x2019 || cp == 0x00BB;
}

// Whether a whitespace token ends in terminal punctuation, ignoring closing
// quotes and brackets after it.
inline bool ends_sentence(std::string_view tok) {
  std::size_t end = tok.size();
  while (end > 0) {
    std::size_t start = end - 1;
    while (start > 0 && (static_cast<unsigned char>(tok[start]) & 0xC0) == 0x80) --start;
    std::size_t pos = start;
    char32_t cp = text::decode_utf8(tok, pos);
    if (cp == '.' || cp == '!' || cp == '?') return true;
    if (!closes_quote(cp)) return false;
    end = start;
  }
  return false;
}

}  // namespace detail

// Capitalized alphabetic surfaces that are not on the stoplist.
inline std::set<std::string> heuristic_entities(const std::vector<Token>& tokens) {
  std::set<std::string> out;
  const auto& stop = detail::entity_stoplist();
  for (const auto& t : tokens) {
    auto w = text::strip_punct(t.surface);
    if (detail::starts_upper(w) && detail::is_alphabetic(w) && !stop.contains(text::to_lower(w))) out.insert(w);
  }
  return out;
}

// Whitespace token groups, one per sentence. A sentence ends at a token whose
// last non-quote character is '.', '!' or '?'; a trailing unterminated
// fragment is its own sentence.
inline std::vector<std::vector<std::string>> split_sentences(std::string_view body) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  for (auto& tok : text::split_whitespace(body)) {
    bool end = detail::ends_sentence(tok);
    current.push_back(std::move(tok));
    if (end) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

inline AnnotatedDocument heuristic_annotate(const std::string& story_id, std::string_view body) {
  AnnotatedDocument doc;
  doc.story_id = story_id;
  for (const auto& raw : split_sentences(body)) {
    SentenceAnnotation sent;
    for (const auto& tok : raw) {
      auto w = text::strip_punct(tok);
      if (w.empty()) continue;
      sent.tokens.push_back(Token{static_cast<int>(sent.tokens.size()) + 1, std::move(w), std::nullopt, std::nullopt});
    }
    if (sent.tokens.empty()) continue;
    sent.entities = heuristic_entities(sent.tokens);
    doc.sentences.push_back(std::move(sent));
  }
  if (doc.sentences.empty()) doc.sentences.emplace_back();
  return doc;
}

inline AnnotatedDocument heuristic_annotate(const Story& story) {
  if (text::trim(story.text).empty()) throw ValidationError("heuristic_annotate: story " + story.story_id + " has empty text");
  return heuristic_annotate(story.story_id, story.text);
}

// ---------------------------------------------------------------------------
// CoNLL-U

namespace detail {

struct PendingSentence {
  SentenceAnnotation sentence;
  std::vector<std::size_t> token_lines;
  std::vector<std::string> entity_tags;  // raw Entity= values, "" when absent
  bool any_entity_tag = false;
};

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

inline std::optional<int> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

inline std::string entity_tag(std::string_view misc) {
  if (misc == "_") return {};
  std::size_t start = 0;
  while (start <= misc.size()) {
    std::size_t bar = misc.find('|', start);
    auto item = misc.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
    if (item.starts_with("Entity=")) return std::string(item.substr(7));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return {};
}

// Entity=B[-TYPE] opens a span, I[-TYPE] extends the open span, O or absent
// closes it; any other value is a single-token entity.
inline std::set<std::string> spans_from_tags(const std::vector<Token>& tokens, const std::vector<std::string>& tags) {
  std::set<std::string> out;
  std::string open;
  auto close = [&] {
    if (!open.empty()) out.insert(open);
    open.clear();
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tag = tags[i];
    char kind = tag.empty() ? 'O' : tag.front();
    bool prefixed = tag.size() == 1 || (tag.size() > 1 && tag[1] == '-');
    if (tag.empty() || (kind == 'O' && prefixed)) {
      close();
    } else if (kind == 'I' && prefixed) {
      if (open.empty()) {
        open = tokens[i].surface;
      } else {
        open += " " + tokens[i].surface;
      }
    } else if (kind == 'B' && prefixed) {
      close();
      open = tokens[i].surface;
    } else {
      close();
      out.insert(tokens[i].surface);
    }
  }
  close();
  return out;
}

}  // namespace detail

enum class EntitySource { annotation, heuristic };

// Parses CoNLL-U content into one document per "# story_id = <id>" block.
// Entities come from Entity= MISC markers, or from the heuristic
// capitalization rule when `entities` is heuristic.
inline std::map<std::string, AnnotatedDocument> parse_conllu(std::string_view content,
                                                             const std::string& source = "conllu",
                                                             EntitySource entities = EntitySource::annotation) {
  std::map<std::string, AnnotatedDocument> docs;
  AnnotatedDocument* current = nullptr;
  detail::PendingSentence pending;
  bool in_sentence = false;
  std::size_t sentence_start = 0;

  auto finish_sentence = [&] {
    if (!in_sentence) return;
    in_sentence = false;
    auto& s = pending.sentence;
    if (s.tokens.empty()) {
      pending = {};
      return;
    }
    if (!current) throw ParseError(source, sentence_start, "sentence before any story_id comment");
    const int n = static_cast<int>(s.tokens.size());
    std::size_t with_head = 0;
    int roots = 0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& t = s.tokens[i];
      if (!t.head) continue;
      ++with_head;
      int h = *t.head;
      if (h < 0 || h > n)
        throw ParseError(source, pending.token_lines[i],
                         "head index " + std::to_string(h) + " out of range for a " + std::to_string(n) + "-token sentence");
      if (h == t.index) throw ParseError(source, pending.token_lines[i], "token is its own head");
      if (h == 0) ++roots;
    }
    if (with_head != 0 && with_head != s.tokens.size())
      throw ParseError(source, sentence_start, "sentence mixes tokens with and without heads");
    if (with_head != 0 && roots != 1)
      throw ParseError(source, sentence_start, "expected exactly one root, found " + std::to_string(roots));
    s.entities = entities == EntitySource::heuristic ? heuristic_entities(s.tokens)
                                                     : detail::spans_from_tags(s.tokens, pending.entity_tags);
    current->sentences.push_back(std::move(s));
    pending = {};
  };

  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string_view line = lines[i];
    if (text::trim(line).empty()) {
      finish_sentence();
      continue;
    }
    if (line.front() == '#') {
      auto body = text::trim(line.substr(1));
      if (body.starts_with("story_id")) {
        auto rest = text::trim(body.substr(8));
        if (rest.empty() || rest.front() != '=') continue;
        finish_sentence();
        std::string id(text::trim(rest.substr(1)));
        if (id.empty()) throw ParseError(source, lineno, "empty story_id");
        auto [it, inserted] = docs.try_emplace(id);
        if (!inserted) throw ParseError(source, lineno, "duplicate story_id " + id);
        it->second.story_id = id;
        current = &it->second;
      }
      continue;
    }
    if (!in_sentence) {
      in_sentence = true;
      sentence_start = lineno;
    }
    auto cols = detail::split_tabs(line);
    if (cols.size() != 10) throw ParseError(source, lineno, "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    auto id = cols[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
      // Multiword ranges and empty nodes; still must be well-formed numbers.
      for (char c : id) {
        if (!(c == '-' || c == '.' || (c >= '0' && c <= '9'))) throw ParseError(source, lineno, "non-integer token index");
      }
      continue;
    }
    auto index = detail::parse_int(id);
    if (!index || *index == 0) throw ParseError(source, lineno, "non-integer token index '" + std::string(id) + "'");
    if (*index != static_cast<int>(pending.sentence.tokens.size()) + 1)
      throw ParseError(source, lineno, "token index " + std::to_string(*index) + " is not contiguous");
    Token tok;
    tok.index = *index;
    tok.surface = std::string(cols[1]);
    if (cols[6] != "_") {
      auto h = detail::parse_int(cols[6]);
      if (!h) throw ParseError(source, lineno, "non-integer head '" + std::string(cols[6]) + "'");
      tok.head = *h;
    }
    if (cols[7] != "_") tok.deprel = std::string(cols[7]);
    pending.sentence.tokens.push_back(std::move(tok));
    pending.token_lines.push_back(lineno);
    pending.entity_tags.push_back(detail::entity_tag(cols[9]));
  }
  finish_sentence();

  for (auto& [id, doc] : docs) {
    if (doc.sentences.empty()) throw ValidationError(source + ": document " + id + " has no sentences");
  }
  return docs;
}

inline std::map<std::string, AnnotatedDocument> load_conllu(const std::filesystem::path& path,
                                                            EntitySource entities = EntitySource::annotation) {
  return parse_conllu(text::read_file(path), path.string(), entities);
}

// ---------------------------------------------------------------------------
// External scores

inline std::map<std::string, ExternalScores> parse_external_scores(std::string_view content,
                                                                   const std::string& source = "scores") {
  std::map<std::string, ExternalScores> out;
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    auto j = detail::parse_json_line(lines[i], source, lineno);
    if (!j.is_object()) throw ParseError(source, lineno, "record is not an object");
    ExternalScores s;
    s.story_id = detail::required_string(j, "story_id", source, lineno);
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
      const auto& lp = j["token_logprobs"];
      if (!lp.is_array() || lp.empty()) throw ParseError(source, lineno, "token_logprobs must be a non-empty array");
      std::vector<double> values;
      values.reserve(lp.size());
      for (const auto& v : lp) {
        if (!v.is_number()) throw ParseError(source, lineno, "token_logprobs entries must be numbers");
        double x = v.get<double>();
        if (!std::isfinite(x)) throw ParseError(source, lineno, "non-finite log-probability");
        if (x > 0.0) throw ParseError(source, lineno, "positive log-probability " + v.dump());
        values.push_back(x);
      }
      s.token_logprobs = std::move(values);
    }
    if (j.contains("toxicity") && !j["toxicity"].is_null()) {
      if (!j["toxicity"].is_number()) throw ParseError(source, lineno, "toxicity must be a number");
      double t = j["toxicity"].get<double>();
      if (!(t >= 0.0 && t <= 1.0)) throw ParseError(source, lineno, "toxicity " + j["toxicity"].dump() + " outside [0,1]");
      s.toxicity = t;
    }
    auto id = s.story_id;
    if (!out.emplace(id, std::move(s)).second) throw ParseError(source, lineno, "duplicate story_id " + id);
  }
  return out;
}

inline std::map<std::string, ExternalScores> load_external_scores(const std::filesystem::path& path) {
  return parse_external_scores(text::read_file(path), path.string());
}

}  // namespace storyeval
