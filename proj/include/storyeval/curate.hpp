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

// Reward weights, the good-story filter and SFT dataset construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/error.hpp"
#include "storyeval/metrics.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

enum class Direction { lower_better, higher_better };

inline std::string to_string(Direction d) { return d == Direction::lower_better ? "lower_better" : "higher_better"; }

struct RewardEntry {
  Direction direction = Direction::lower_better;
  double bound = 1.0;  // lower_better: value at or above which the score is 0
  // higher_better: fixed (lo, hi) range, or corpus min/max when absent.
  std::optional<std::pair<double, double>> fixed_range;
};

struct MetricRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Per-metric corpus minimum, maximum and mean.
struct CorpusStats {
  std::size_t n = 0;
  std::array<double, 5> min{};
  std::array<double, 5> max{};
  std::array<double, 5> mean{};

  MetricRange range(Metric m) const { return {min[static_cast<int>(m)], max[static_cast<int>(m)]}; }

  template <typename Vectors>
  static CorpusStats from(const Vectors& vectors) {
    CorpusStats s;
    std::array<long double, 5> sum{};
    for (const auto& v : vectors) {
      const MetricVector& mv = metric_vector_of(v);
      for (auto m : kAllMetrics) {
        int k = static_cast<int>(m);
        double x = mv.get(m);
        if (s.n == 0) {
          s.min[k] = s.max[k] = x;
        } else {
          s.min[k] = std::min(s.min[k], x);
          s.max[k] = std::max(s.max[k], x);
        }
        sum[k] += x;
      }
      ++s.n;
    }
    if (s.n == 0) throw ValidationError("corpus statistics: no metric vectors");
    // Clamping keeps a constant metric's mean equal to its value.
    for (int k = 0; k < 5; ++k) s.mean[k] = std::clamp(static_cast<double>(sum[k] / s.n), s.min[k], s.max[k]);
    return s;
  }

 private:
  static const MetricVector& metric_vector_of(const MetricVector& v) { return v; }
  template <typename K>
  static const MetricVector& metric_vector_of(const std::pair<const K, MetricVector>& kv) {
    return kv.second;
  }
};

struct RewardConfig {
  std::array<RewardEntry, 5> entries;

  const RewardEntry& operator[](Metric m) const { return entries[static_cast<int>(m)]; }
  RewardEntry& operator[](Metric m) { return entries[static_cast<int>(m)]; }

  // Spache 6.0, PPL 100, syntactic complexity 10, toxicity 1.0; coherence
  // is higher-better over the corpus range.
  static RewardConfig defaults() {
    RewardConfig c;
    c[Metric::spache] = {Direction::lower_better, 6.0, std::nullopt};
    c[Metric::ppl] = {Direction::lower_better, 100.0, std::nullopt};
    c[Metric::coherence] = {Direction::higher_better, 0.0, std::nullopt};
    c[Metric::syntactic_complexity] = {Direction::lower_better, 10.0, std::nullopt};
    c[Metric::toxicity] = {Direction::lower_better, 1.0, std::nullopt};
    return c;
  }

  void validate() const {
    for (auto m : kAllMetrics) {
      const auto& e = (*this)[m];
      if (e.direction == Direction::lower_better) {
        if (!std::isfinite(e.bound) || !(e.bound > 0.0))
          throw ValidationError("reward config: " + to_string(m) + " bound must be finite and positive");
      } else if (e.fixed_range) {
        auto [lo, hi] = *e.fixed_range;
        if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
          throw ValidationError("reward config: " + to_string(m) + " range must be finite with lo <= hi");
      }
    }
  }

  bool needs_corpus_stats() const {
    return std::any_of(entries.begin(), entries.end(),
                       [](const RewardEntry& e) { return e.direction == Direction::higher_better && !e.fixed_range; });
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (auto m : kAllMetrics) {
      const auto& e = (*this)[m];
      nlohmann::json ej = {{"direction", storyeval::to_string(e.direction)}};
      if (e.direction == Direction::lower_better) {
        ej["bound"] = e.bound;
      } else if (e.fixed_range) {
        ej["range"] = {{"lo", e.fixed_range->first}, {"hi", e.fixed_range->second}};
      } else {
        ej["range"] = "corpus";
      }
      j[storyeval::to_string(m)] = ej;
    }
    return j;
  }

  static RewardConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("reward config: expected an object");
    RewardConfig c;
    std::size_t seen = 0;
    for (auto& [key, ej] : j.items()) {
      Metric m;
      try {
        m = parse_metric(key);
      } catch (const ValidationError&) {
        throw ValidationError("reward config: unknown metric '" + key + "'");
      }
      ++seen;
      if (!ej.is_object()) throw ValidationError("reward config: entry " + key + " must be an object");
      RewardEntry e;
      auto dir = ej.value("direction", "");
      if (dir == "lower_better") {
        e.direction = Direction::lower_better;
        if (!ej.contains("bound") || !ej["bound"].is_number())
          throw ValidationError("reward config: " + key + " needs a numeric bound");
        e.bound = ej["bound"].get<double>();
      } else if (dir == "higher_better") {
        e.direction = Direction::higher_better;
        if (ej.contains("range") && ej["range"].is_object()) {
          const auto& r = ej["range"];
          if (!r.contains("lo") || !r.contains("hi") || !r["lo"].is_number() || !r["hi"].is_number())
            throw ValidationError("reward config: " + key + " range needs numeric lo and hi");
          e.fixed_range = std::make_pair(r["lo"].get<double>(), r["hi"].get<double>());
        } else if (ej.contains("range") && ej["range"] != "corpus") {
          throw ValidationError("reward config: " + key + " range must be \"corpus\" or {lo, hi}");
        }
      } else {
        throw ValidationError("reward config: " + key + " direction must be lower_better or higher_better");
      }
      c[m] = e;
    }
    if (seen != 5) throw ValidationError("reward config: expected exactly 5 metric entries, found " + std::to_string(seen));
    c.validate();
    return c;
  }

  static RewardConfig load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return from_json(j);
  }

  // Configuration plus the corpus ranges it was resolved against.
  nlohmann::json stamp(const CorpusStats* stats) const {
    nlohmann::json j = {{"config", to_json()}};
    nlohmann::json resolved = nlohmann::json::object();
    for (auto m : kAllMetrics) {
      const auto& e = (*this)[m];
      if (e.direction == Direction::higher_better && !e.fixed_range && stats) {
        auto r = stats->range(m);
        resolved[storyeval::to_string(m)] = {{"lo", r.lo}, {"hi", r.hi}};
      }
    }
    j["resolved_ranges"] = resolved;
    return j;
  }
};

// Maps a raw metric value into [0, 1], 1 being best. Lower-better metrics use
// clamp((b - v) / b); higher-better ones use min-max over the fixed range or
// the supplied corpus range, with a degenerate range mapping to 0.5.
inline double normalize_metric(double value, const RewardEntry& entry, std::optional<MetricRange> corpus_range = std::nullopt) {
  if (entry.direction == Direction::lower_better) {
    return std::clamp((entry.bound - value) / entry.bound, 0.0, 1.0);
  }
  MetricRange r;
  if (entry.fixed_range) {
    r = {entry.fixed_range->first, entry.fixed_range->second};
  } else if (corpus_range) {
    r = *corpus_range;
  } else {
    throw ValidationError("normalize_metric: corpus range required for a higher-better entry");
  }
  if (r.hi == r.lo) return 0.5;
  return std::clamp((value - r.lo) / (r.hi - r.lo), 0.0, 1.0);
}

// Unweighted mean of the five normalized metrics.
inline double reward(const MetricVector& v, const RewardConfig& config, const CorpusStats* stats = nullptr) {
  double sum = 0.0;
  for (auto m : kAllMetrics) {
    std::optional<MetricRange> range;
    if (stats) range = stats->range(m);
    sum += normalize_metric(v.get(m), config[m], range);
  }
  return sum / 5.0;
}

// Stories not worse than the corpus mean on every metric (ties kept).
inline std::set<std::string> filter_good_stories(const std::map<std::string, MetricVector>& vectors) {
  if (vectors.empty()) throw ValidationError("filter_good_stories: no metric vectors");
  auto stats = CorpusStats::from(vectors);
  std::set<std::string> kept;
  for (const auto& [id, v] : vectors) {
    bool good = true;
    for (auto m : kAllMetrics) {
      double mean = stats.mean[static_cast<int>(m)];
      double x = v.get(m);
      if (higher_is_better(m) ? x < mean : x > mean) {
        good = false;
        break;
      }
    }
    if (good) kept.insert(id);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// SFT datasets

enum class DatasetDesign { baseline, good_stories, rewarded, error_augmented };

inline std::string to_string(DatasetDesign d) {
  switch (d) {
    case DatasetDesign::baseline: return "baseline";
    case DatasetDesign::good_stories: return "good_stories";
    case DatasetDesign::rewarded: return "rewarded";
    case DatasetDesign::error_augmented: return "error_augmented";
  }
  return "?";
}

inline DatasetDesign parse_design(std::string_view s) {
  for (auto d : {DatasetDesign::baseline, DatasetDesign::good_stories, DatasetDesign::rewarded, DatasetDesign::error_augmented}) {
    if (to_string(d) == s) return d;
  }
  throw ValidationError("unknown dataset design '" + std::string(s) + "'");
}

inline std::string render_phoneme_list(const std::vector<std::string>& phonemes) {
  std::string out;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    if (i) out += ", ";
    out += phonemes[i];
  }
  return out;
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Versioned instruction prompt with {phonemes} and {errors} placeholders.
struct InstructionTemplate {
  std::string version = "1";
  std::string system =
      "You are a children's author who writes short decodable stories for K-2 readers.";
  std::string base =
      "Write a short story for a child who is learning to read. Use simple, decodable words that "
      "practice these target phonemes: {phonemes}. Keep sentences short and the plot easy to follow. "
      "Only output the story.";
  std::string error_augmented =
      "Write a short story for a child who is learning to read. Use simple, decodable words that "
      "practice these target phonemes: {phonemes}. The child often mispronounces these phonemes: "
      "{errors}. Give extra practice with them. Keep sentences short and the plot easy to follow. "
      "Only output the story.";

  std::string render(const std::vector<std::string>& phonemes, const std::vector<std::string>* errors = nullptr) const {
    std::string out = errors ? error_augmented : base;
    replace_all(out, "{phonemes}", render_phoneme_list(phonemes));
    if (errors) replace_all(out, "{errors}", render_phoneme_list(*errors));
    return out;
  }

  static InstructionTemplate from_json(const nlohmann::json& j) {
    InstructionTemplate t;
    if (!j.is_object()) throw ValidationError("instruction template: expected an object");
    if (!j.contains("template_version") || !j.contains("base") || !j.contains("error_augmented"))
      throw ValidationError("instruction template: needs template_version, base and error_augmented");
    const auto& v = j["template_version"];
    t.version = v.is_string() ? v.get<std::string>() : v.dump();
    t.base = j["base"].get<std::string>();
    t.error_augmented = j["error_augmented"].get<std::string>();
    if (j.contains("system")) t.system = j["system"].get<std::string>();
    if (t.base.find("{phonemes}") == std::string::npos || t.error_augmented.find("{phonemes}") == std::string::npos ||
        t.error_augmented.find("{errors}") == std::string::npos)
      throw ValidationError("instruction template: missing {phonemes} or {errors} placeholder");
    return t;
  }

  static InstructionTemplate load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
};

struct SftExample {
  std::string input;
  std::string target;
  std::optional<double> weight;
  int lesson_id = 0;
  std::string story_id;
  DatasetDesign design = DatasetDesign::baseline;
  std::string template_version;
  nlohmann::json reward_config_stamp;

  friend bool operator==(const SftExample& a, const SftExample& b) {
    return a.input == b.input && a.target == b.target && a.weight == b.weight && a.lesson_id == b.lesson_id &&
           a.story_id == b.story_id && a.design == b.design && a.template_version == b.template_version &&
           a.reward_config_stamp == b.reward_config_stamp;
  }
};

// story_id -> simulated mispronounced phonemes
using ErrorMap = std::map<std::string, std::vector<std::string>>;

inline constexpr std::size_t kMinSimulatedErrors = 3;
inline constexpr std::size_t kMaxSimulatedErrors = 8;

// JSON lines {story_id, phonemes[]}; records whose phonemes are null (failed
// simulations) are skipped.
inline ErrorMap parse_error_map(std::string_view content, const std::string& source = "errors") {
  ErrorMap out;
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    auto j = detail::parse_json_line(lines[i], source, lineno);
    auto id = detail::required_string(j, "story_id", source, lineno);
    if (!j.contains("phonemes") || j["phonemes"].is_null()) continue;
    if (!j["phonemes"].is_array()) throw ParseError(source, lineno, "phonemes must be an array");
    std::vector<std::string> ph;
    for (const auto& p : j["phonemes"]) {
      if (!p.is_string()) throw ParseError(source, lineno, "phoneme entries must be strings");
      ph.push_back(p.get<std::string>());
    }
    if (!out.emplace(id, std::move(ph)).second) throw ParseError(source, lineno, "duplicate story_id " + id);
  }
  return out;
}

inline ErrorMap load_error_map(const std::filesystem::path& path) { return parse_error_map(text::read_file(path), path.string()); }

struct DatasetInputs {
  const std::vector<Lesson>* lessons = nullptr;
  const std::vector<Story>* stories = nullptr;
  const std::map<std::string, MetricVector>* vectors = nullptr;  // good_stories, rewarded
  const ErrorMap* errors = nullptr;                              // error_augmented
  const RewardConfig* reward_config = nullptr;                   // rewarded
  InstructionTemplate instruction;
};

inline std::vector<SftExample> build_sft_dataset(DatasetDesign design, const DatasetInputs& in) {
  if (!in.lessons || !in.stories) throw ValidationError("build_sft_dataset: lessons and stories are required");
  std::map<int, const Lesson*> lessons;
  for (const auto& l : *in.lessons) lessons[l.lesson_id] = &l;

  std::set<std::string> kept;
  std::optional<CorpusStats> stats;
  nlohmann::json stamp = nullptr;
  switch (design) {
    case DatasetDesign::baseline:
      break;
    case DatasetDesign::good_stories:
      if (!in.vectors) throw ValidationError("good_stories design needs metric vectors");
      kept = filter_good_stories(*in.vectors);
      break;
    case DatasetDesign::rewarded:
      if (!in.reward_config) throw ValidationError("rewarded design needs a reward config");
      if (!in.vectors) throw ValidationError("rewarded design needs metric vectors");
      in.reward_config->validate();
      if (in.reward_config->needs_corpus_stats()) stats = CorpusStats::from(*in.vectors);
      stamp = in.reward_config->stamp(stats ? &*stats : nullptr);
      break;
    case DatasetDesign::error_augmented:
      if (!in.errors) throw ValidationError("error_augmented design needs an error map");
      break;
  }

  std::vector<const Story*> order;
  for (const auto& s : *in.stories) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const Story* a, const Story* b) {
    return std::tie(a->lesson_id, a->story_id) < std::tie(b->lesson_id, b->story_id);
  });

  std::vector<SftExample> out;
  for (const Story* s : order) {
    if (design == DatasetDesign::good_stories && !kept.contains(s->story_id)) continue;
    auto lt = lessons.find(s->lesson_id);
    if (lt == lessons.end()) throw ValidationError("story " + s->story_id + " references unknown lesson " + std::to_string(s->lesson_id));
    if (text::trim(s->text).empty()) throw ValidationError("story " + s->story_id + " has empty text");

    SftExample ex;
    ex.target = s->text;
    ex.lesson_id = s->lesson_id;
    ex.story_id = s->story_id;
    ex.design = design;
    ex.template_version = in.instruction.version;
    ex.reward_config_stamp = stamp;
    if (design == DatasetDesign::error_augmented) {
      auto et = in.errors->find(s->story_id);
      if (et == in.errors->end()) throw ValidationError("story " + s->story_id + " has no simulated errors");
      const auto n = et->second.size();
      if (n < kMinSimulatedErrors || n > kMaxSimulatedErrors)
        throw ValidationError("story " + s->story_id + " has " + std::to_string(n) + " simulated errors; expected 3-8");
      ex.input = in.instruction.render(lt->second->phonemes, &et->second);
    } else {
      ex.input = in.instruction.render(lt->second->phonemes);
    }
    if (design == DatasetDesign::rewarded) {
      auto vt = in.vectors->find(s->story_id);
      if (vt == in.vectors->end()) throw ValidationError("story " + s->story_id + " has no metric vector");
      ex.weight = reward(vt->second, *in.reward_config, stats ? &*stats : nullptr);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline nlohmann::json to_json(const SftExample& ex) {
  nlohmann::json j = {{"input", ex.input},
                      {"target", ex.target},
                      {"lesson_id", ex.lesson_id},
                      {"story_id", ex.story_id},
                      {"design", to_string(ex.design)},
                      {"template_version", ex.template_version},
                      {"reward_config_stamp", ex.reward_config_stamp}};
  if (ex.weight) j["weight"] = *ex.weight;
  return j;
}

inline std::string serialize_dataset(const std::vector<SftExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

}  // namespace storyeval
