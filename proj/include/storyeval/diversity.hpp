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

// Repetition metrics: BLEU, per-lesson Self-BLEU and corpus-global Self-BLEU.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/error.hpp"
#include "storyeval/parallel.hpp"
#include "storyeval/stats.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

using TokenList = std::vector<std::string>;

enum class Smoothing { none, add_epsilon };

inline std::string to_string(Smoothing s) { return s == Smoothing::none ? "none" : "add_epsilon"; }

inline Smoothing parse_smoothing(std::string_view s) {
  if (s == "none") return Smoothing::none;
  if (s == "add_epsilon") return Smoothing::add_epsilon;
  throw ValidationError("unknown smoothing '" + std::string(s) + "'");
}

inline constexpr int kMaxBleuOrder = 9;

struct BleuConfig {
  int max_order = 4;
  Smoothing smoothing = Smoothing::add_epsilon;
  double epsilon = 0.1;
  bool brevity_penalty = true;

  void validate() const {
    if (max_order < 1 || max_order > kMaxBleuOrder) throw ValidationError("bleu: max_order must be in [1, 9]");
    if (smoothing == Smoothing::add_epsilon && !(epsilon > 0.0 && epsilon <= 1.0))
      throw ValidationError("bleu: epsilon must be in (0, 1]");
  }

  nlohmann::json stamp() const {
    return {{"max_order", max_order},
            {"weights", "uniform"},
            {"smoothing", to_string(smoothing)},
            {"epsilon", epsilon},
            {"brevity_penalty", brevity_penalty}};
  }
};

// Lowercased whitespace tokens with leading and trailing punctuation split
// off into single-character tokens.
inline TokenList tokenize_for_diversity(std::string_view body) {
  TokenList out;
  for (const auto& raw : text::split_whitespace(body)) {
    std::string tok = text::to_lower(raw);
    std::size_t begin = 0;
    std::size_t end = tok.size();
    std::vector<std::string> lead;
    std::vector<std::string> trail;
    while (begin < end) {
      std::size_t pos = begin;
      char32_t cp = text::decode_utf8(tok, pos);
      if (!text::is_punct(cp)) break;
      lead.push_back(tok.substr(begin, pos - begin));
      begin = pos;
    }
    while (end > begin) {
      std::size_t start = end - 1;
      while (start > begin && (static_cast<unsigned char>(tok[start]) & 0xC0) == 0x80) --start;
      std::size_t pos = start;
      char32_t cp = text::decode_utf8(tok, pos);
      if (!text::is_punct(cp)) break;
      trail.push_back(tok.substr(start, end - start));
      end = start;
    }
    for (auto& p : lead) out.push_back(std::move(p));
    if (end > begin) out.push_back(tok.substr(begin, end - begin));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

// Sufficient statistics for one hypothesis: clipped matches and hypothesis
// n-gram totals per order, hypothesis length and the closest reference length.
struct BleuStats {
  std::array<std::size_t, kMaxBleuOrder> clipped{};
  std::array<std::size_t, kMaxBleuOrder> total{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

// Geometric mean of the modified precisions over the orders the hypothesis
// actually has (min(max_order, hyp_len)), times the brevity penalty. Zero
// matches at some order give 0 without smoothing, or epsilon/total with it.
inline double bleu_from_stats(const BleuStats& s, const BleuConfig& config) {
  const std::size_t orders = std::min<std::size_t>(config.max_order, s.hyp_len);
  if (orders == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < orders; ++n) {
    const double total = static_cast<double>(s.total[n]);
    double p;
    if (s.clipped[n] == 0) {
      if (config.smoothing == Smoothing::none) return 0.0;
      p = config.epsilon / total;
    } else {
      p = static_cast<double>(s.clipped[n]) / total;
    }
    log_sum += std::log(p);
  }
  double score = std::exp(log_sum / static_cast<double>(orders));
  if (config.brevity_penalty && s.hyp_len < s.ref_len)
    score *= std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len));
  return score;
}

// Closest reference length; ties go to the shorter reference.
inline std::size_t closest_ref_length(std::size_t hyp_len, std::size_t best, std::size_t candidate) {
  auto dist = [hyp_len](std::size_t r) { return r > hyp_len ? r - hyp_len : hyp_len - r; };
  if (dist(candidate) < dist(best) || (dist(candidate) == dist(best) && candidate < best)) return candidate;
  return best;
}

namespace detail {

using NGramCounts = std::map<std::vector<std::string_view>, std::size_t>;

inline NGramCounts count_ngrams(const TokenList& toks, std::size_t n) {
  NGramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string_view> key(toks.begin() + i, toks.begin() + i + n);
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

inline double bleu(const TokenList& hypothesis, const std::vector<TokenList>& references, const BleuConfig& config) {
  config.validate();
  if (hypothesis.empty()) throw ValidationError("bleu: empty hypothesis");
  BleuStats s;
  s.hyp_len = hypothesis.size();
  bool have_ref = false;
  for (const auto& r : references) {
    if (r.empty()) continue;
    s.ref_len = have_ref ? closest_ref_length(s.hyp_len, s.ref_len, r.size()) : r.size();
    have_ref = true;
  }
  if (!have_ref) throw ValidationError("bleu: no non-empty reference");

  for (int n = 1; n <= config.max_order; ++n) {
    auto hyp_counts = detail::count_ngrams(hypothesis, n);
    detail::NGramCounts max_ref;
    for (const auto& r : references) {
      for (const auto& [g, c] : detail::count_ngrams(r, n)) {
        auto& m = max_ref[g];
        m = std::max(m, c);
      }
    }
    for (const auto& [g, c] : hyp_counts) {
      s.total[n - 1] += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) s.clipped[n - 1] += std::min(c, it->second);
    }
  }
  return bleu_from_stats(s, config);
}

// ---------------------------------------------------------------------------
// Self-BLEU

struct TokenizedStory {
  std::string story_id;
  TokenList tokens;
};

using StorySet = std::vector<TokenizedStory>;

struct StoryScore {
  std::string story_id;
  double score = 0.0;

  friend bool operator==(const StoryScore&, const StoryScore&) = default;
};

struct LessonSelfBleu {
  std::optional<double> mean;  // absent for lessons with fewer than 2 stories
  std::vector<StoryScore> per_story;
};

struct GlobalSelfBleu {
  double mean = 0.0;
  std::vector<StoryScore> per_story;
};

inline void require_tokens(const StorySet& set) {
  for (const auto& s : set) {
    if (s.tokens.empty()) throw ValidationError("self-bleu: story " + s.story_id + " has no tokens");
  }
}

inline LessonSelfBleu self_bleu_lesson(const StorySet& lesson, const BleuConfig& config) {
  config.validate();
  LessonSelfBleu out;
  if (lesson.size() < 2) return out;
  require_tokens(lesson);
  double sum = 0.0;
  for (std::size_t i = 0; i < lesson.size(); ++i) {
    std::vector<TokenList> refs;
    refs.reserve(lesson.size() - 1);
    for (std::size_t j = 0; j < lesson.size(); ++j) {
      if (j != i) refs.push_back(lesson[j].tokens);
    }
    double b = bleu(lesson[i].tokens, refs, config);
    out.per_story.push_back({lesson[i].story_id, b});
    sum += b;
  }
  out.mean = sum / static_cast<double>(lesson.size());
  return out;
}

// Read-only n-gram tables over a story set. For every n-gram it keeps the two
// largest per-story counts, which is enough to recover the clipping count
// against "all stories except i".
class ReferenceIndex {
 public:
  ReferenceIndex(const StorySet& set, int max_order) : max_order_(max_order) {
    std::unordered_map<std::string, std::uint32_t> vocab;
    std::vector<std::vector<std::uint32_t>> ids(set.size());
    for (std::size_t s = 0; s < set.size(); ++s) {
      for (const auto& t : set[s].tokens) {
        auto [it, _] = vocab.try_emplace(t, static_cast<std::uint32_t>(vocab.size()));
        ids[s].push_back(it->second);
      }
      lengths_.push_back(set[s].tokens.size());
    }
    own_.resize(set.size());
    for (std::size_t s = 0; s < set.size(); ++s) {
      own_[s].resize(max_order);
      for (int n = 1; n <= max_order; ++n) {
        std::unordered_map<std::string, std::size_t> counts;
        const auto& seq = ids[s];
        for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[key(seq, i, n)];
        auto& list = own_[s][n - 1];
        list.reserve(counts.size());
        for (auto& [k, c] : counts) {
          auto& top = top_[k];
          top.offer(static_cast<std::uint32_t>(s), c);
          list.emplace_back(k, c);
        }
      }
    }
  }

  std::size_t size() const { return lengths_.size(); }

  // Statistics for story i against every other story as references.
  BleuStats stats_excluding(std::size_t i) const {
    BleuStats s;
    s.hyp_len = lengths_[i];
    bool have_ref = false;
    for (std::size_t j = 0; j < lengths_.size(); ++j) {
      if (j == i || lengths_[j] == 0) continue;
      s.ref_len = have_ref ? closest_ref_length(s.hyp_len, s.ref_len, lengths_[j]) : lengths_[j];
      have_ref = true;
    }
    for (int n = 0; n < max_order_; ++n) {
      for (const auto& [k, c] : own_[i][n]) {
        s.total[n] += c;
        const auto& top = top_.at(k);
        std::size_t ref = top.first_story == i ? top.second_count : top.first_count;
        s.clipped[n] += std::min(c, ref);
      }
    }
    return s;
  }

 private:
  struct TopTwo {
    std::size_t first_count = 0;
    std::size_t first_story = static_cast<std::size_t>(-1);
    std::size_t second_count = 0;

    void offer(std::uint32_t story, std::size_t count) {
      if (count > first_count) {
        second_count = first_count;
        first_count = count;
        first_story = story;
      } else if (count > second_count) {
        second_count = count;
      }
    }
  };

  static std::string key(const std::vector<std::uint32_t>& seq, std::size_t i, int n) {
    std::string k(static_cast<std::size_t>(n) * sizeof(std::uint32_t), '\0');
    std::memcpy(k.data(), seq.data() + i, k.size());
    return k;
  }

  int max_order_;
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, TopTwo> top_;
  std::vector<std::vector<std::vector<std::pair<std::string, std::size_t>>>> own_;
};

// Mean over stories of BLEU(s_i, all other stories). Per-story scores are
// independent and the mean is summed in input order, so the result does not
// depend on `workers`.
inline GlobalSelfBleu global_self_bleu(const StorySet& set, const BleuConfig& config, std::size_t workers = 1) {
  config.validate();
  if (set.size() < 2) throw ValidationError("global self-bleu: need at least 2 stories");
  require_tokens(set);
  ReferenceIndex index(set, config.max_order);
  std::vector<double> scores(set.size());
  parallel_for(set.size(), workers, [&](std::size_t i) { scores[i] = bleu_from_stats(index.stats_excluding(i), config); });
  GlobalSelfBleu out;
  double sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.per_story.push_back({set[i].story_id, scores[i]});
    sum += scores[i];
  }
  out.mean = sum / static_cast<double>(set.size());
  return out;
}

// ---------------------------------------------------------------------------
// Grouped diversity report: one group per (experiment, model).

struct DiversityGroup {
  std::string experiment;
  std::string model;
  std::map<int, LessonSelfBleu> lessons;
  std::map<int, std::vector<std::string>> lesson_members;
  GlobalSelfBleu global;
};

inline std::vector<DiversityGroup> compute_diversity(const std::vector<Story>& stories, const BleuConfig& config,
                                                     std::size_t workers = 1) {
  std::map<std::pair<std::string, std::string>, std::vector<const Story*>> groups;
  for (const auto& s : stories) groups[{s.source.experiment, s.source.model}].push_back(&s);
  std::vector<DiversityGroup> out;
  for (const auto& [key, members] : groups) {
    DiversityGroup g;
    g.experiment = key.first;
    g.model = key.second;
    StorySet all;
    std::map<int, StorySet> by_lesson;
    for (const Story* s : members) {
      TokenizedStory ts{s->story_id, tokenize_for_diversity(s->text)};
      if (ts.tokens.empty()) continue;  // empty outputs carry no n-grams
      by_lesson[s->lesson_id].push_back(ts);
      g.lesson_members[s->lesson_id].push_back(s->story_id);
      all.push_back(std::move(ts));
    }
    for (const auto& [lesson_id, set] : by_lesson) g.lessons[lesson_id] = self_bleu_lesson(set, config);
    if (all.size() >= 2) g.global = global_self_bleu(all, config, workers);
    out.push_back(std::move(g));
  }
  return out;
}

inline nlohmann::json optional_number(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

// Per-story, per-lesson and per-group records. The lesson-level spread is
// reported both over individual story scores and over lesson means.
inline std::string serialize_diversity(const std::vector<DiversityGroup>& groups, const BleuConfig& config) {
  using nlohmann::json;
  std::string out;
  auto emit = [&out](const json& j) {
    out += j.dump();
    out += '\n';
  };
  for (const auto& g : groups) {
    std::map<std::string, double> global_by_id;
    for (const auto& s : g.global.per_story) global_by_id[s.story_id] = s.score;

    std::vector<double> story_scores;
    std::vector<double> lesson_means;
    for (const auto& [lesson_id, res] : g.lessons) {
      std::map<std::string, double> lesson_by_id;
      for (const auto& s : res.per_story) lesson_by_id[s.story_id] = s.score;
      for (const auto& id : g.lesson_members.at(lesson_id)) {
        auto lt = lesson_by_id.find(id);
        auto gt = global_by_id.find(id);
        emit({{"record", "story"},
              {"experiment", g.experiment},
              {"model", g.model},
              {"lesson_id", lesson_id},
              {"story_id", id},
              {"lesson_self_bleu", lt == lesson_by_id.end() ? json(nullptr) : json(lt->second)},
              {"global_self_bleu", gt == global_by_id.end() ? json(nullptr) : json(gt->second)}});
        if (lt != lesson_by_id.end()) story_scores.push_back(lt->second);
      }
      emit({{"record", "lesson"},
            {"experiment", g.experiment},
            {"model", g.model},
            {"lesson_id", lesson_id},
            {"stories", g.lesson_members.at(lesson_id).size()},
            {"mean", optional_number(res.mean)}});
      if (res.mean) lesson_means.push_back(*res.mean);
    }
    auto summary_json = [](const std::vector<double>& xs) {
      if (xs.empty()) return json{{"n", 0}, {"mean", nullptr}, {"sd", nullptr}};
      auto s = summarize(xs);
      return json{{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}};
    };
    std::vector<double> global_scores;
    for (const auto& s : g.global.per_story) global_scores.push_back(s.score);
    emit({{"record", "group"},
          {"experiment", g.experiment},
          {"model", g.model},
          {"lesson_repetition", {{"over_stories", summary_json(story_scores)}, {"over_lesson_means", summary_json(lesson_means)}}},
          {"total_repetition", summary_json(global_scores)},
          {"bleu_config", config.stamp()}});
  }
  return out;
}

}  // namespace storyeval
