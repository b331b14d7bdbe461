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

// Per-story quality metrics: Spache readability, perplexity (external
// log-probabilities or an add-k n-gram fallback), entity coherence,
// dependency-based syntactic complexity and toxicity.

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/error.hpp"
#include "storyeval/text.hpp"

namespace storyeval {

using WordSet = std::unordered_set<std::string>;

// ---------------------------------------------------------------------------
// Spache

enum class UnfamiliarCounting { unique_types, all_tokens };

inline std::string to_string(UnfamiliarCounting m) {
  return m == UnfamiliarCounting::unique_types ? "unique_types" : "all_tokens";
}

inline UnfamiliarCounting parse_unfamiliar_counting(std::string_view s) {
  if (s == "unique_types") return UnfamiliarCounting::unique_types;
  if (s == "all_tokens") return UnfamiliarCounting::all_tokens;
  throw ValidationError("unknown unfamiliar counting mode '" + std::string(s) + "'");
}

struct SpacheConfig {
  WordSet familiar_words;
  double c_len = 0.141;
  double c_unf = 0.086;
  double c_const = 0.839;
  UnfamiliarCounting unfamiliar_counting = UnfamiliarCounting::unique_types;

  void validate() const {
    if (familiar_words.empty()) throw ValidationError("spache: familiar word list is empty");
    if (!std::isfinite(c_len) || !std::isfinite(c_unf) || !std::isfinite(c_const))
      throw ValidationError("spache: coefficients must be finite");
  }
};

struct SpacheComponents {
  double mean_sentence_length = 0.0;   // words per sentence
  double unfamiliar_percentage = 0.0;  // 0..100
  int words = 0;
  int sentences = 0;
};

// Lowercased word form with surrounding punctuation removed; empty for
// punctuation-only tokens.
inline std::string normalize_word(std::string_view surface) { return text::to_lower(text::strip_punct(surface)); }

inline double spache_grade(double mean_sentence_length, double unfamiliar_percentage, const SpacheConfig& config) {
  return config.c_len * mean_sentence_length + config.c_unf * unfamiliar_percentage + config.c_const;
}

inline SpacheComponents spache_components(const AnnotatedDocument& doc, const SpacheConfig& config) {
  config.validate();
  SpacheComponents c;
  int unfamiliar_tokens = 0;
  std::unordered_set<std::string> unfamiliar_types;
  for (const auto& sent : doc.sentences) {
    int in_sentence = 0;
    for (const auto& tok : sent.tokens) {
      auto w = normalize_word(tok.surface);
      if (w.empty()) continue;
      ++in_sentence;
      if (!config.familiar_words.contains(w)) {
        ++unfamiliar_tokens;
        unfamiliar_types.insert(w);
      }
    }
    if (in_sentence > 0) {
      c.words += in_sentence;
      ++c.sentences;
    }
  }
  if (c.words == 0) throw MetricError("spache", "document " + doc.story_id + " has no countable words");
  int unfamiliar = config.unfamiliar_counting == UnfamiliarCounting::unique_types
                       ? static_cast<int>(unfamiliar_types.size())
                       : unfamiliar_tokens;
  c.mean_sentence_length = static_cast<double>(c.words) / c.sentences;
  c.unfamiliar_percentage = 100.0 * unfamiliar / c.words;
  return c;
}

inline double spache(const AnnotatedDocument& doc, const SpacheConfig& config) {
  auto c = spache_components(doc, config);
  return spache_grade(c.mean_sentence_length, c.unfamiliar_percentage, config);
}

// ---------------------------------------------------------------------------
// Perplexity

inline double perplexity(std::span<const double> logprobs) {
  if (logprobs.empty()) throw MetricError("ppl", "empty log-probability sequence");
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!(lp <= 0.0) || !std::isfinite(lp)) throw MetricError("ppl", "log-probabilities must be finite and <= 0");
    sum += lp;
  }
  return std::exp(-(sum / static_cast<double>(logprobs.size())));
}

// Add-k smoothed n-gram model over lowercased words. Each sentence is padded
// with order-1 begin markers; there is no end marker and no backoff, so an
// unseen context yields the uniform estimate 1/|V|.
class NGramLm {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kBos = "<s>";

  static NGramLm train(const std::vector<std::vector<std::string>>& sentences, int order, double k) {
    if (order < 1) throw ValidationError("ngram: order must be >= 1");
    if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("ngram: k must be > 0");
    NGramLm lm;
    lm.order_ = order;
    lm.k_ = k;
    bool any = false;
    for (const auto& sent : sentences) {
      auto padded = lm.pad(sent);
      for (std::size_t i = order - 1; i < padded.size(); ++i) {
        auto& ctx = lm.counts_[context_key(padded, i, order)];
        ++ctx.total;
        ++ctx.next[padded[i]];
        lm.vocab_.insert(padded[i]);
        any = true;
      }
    }
    if (!any) throw ValidationError("ngram: training texts contain no words");
    lm.vocab_.insert(std::string(kUnk));
    return lm;
  }

  int order() const { return order_; }
  double k() const { return k_; }
  std::size_t vocabulary_size() const { return vocab_.size(); }
  const std::unordered_set<std::string>& vocabulary() const { return vocab_; }

  // p(word | context); context holds the previous order-1 words (already
  // padded). Words outside the vocabulary map to <unk>.
  double probability(std::span<const std::string> context, const std::string& word) const {
    const std::string& w = vocab_.contains(word) ? word : unk_;
    const double v = static_cast<double>(vocab_.size());
    std::string key;
    for (std::size_t i = 0; i < context.size(); ++i) {
      if (i) key += kSep;
      key += vocab_.contains(context[i]) || context[i] == kBos ? context[i] : unk_;
    }
    auto it = counts_.find(key);
    if (it == counts_.end()) return k_ / (k_ * v);
    auto jt = it->second.next.find(w);
    double c = jt == it->second.next.end() ? 0.0 : static_cast<double>(jt->second);
    return (c + k_) / (static_cast<double>(it->second.total) + k_ * v);
  }

  // One natural-log probability per word of the document.
  std::vector<double> score(const AnnotatedDocument& doc) const {
    std::vector<double> out;
    for (const auto& sent : doc.sentences) {
      std::vector<std::string> words;
      for (const auto& t : sent.tokens) {
        auto w = normalize_word(t.surface);
        if (!w.empty()) words.push_back(std::move(w));
      }
      if (words.empty()) continue;
      auto padded = pad(words);
      for (auto& w : padded) {
        if (w != kBos && !vocab_.contains(w)) w = unk_;
      }
      for (std::size_t i = order_ - 1; i < padded.size(); ++i) {
        std::span<const std::string> ctx(padded.data() + i - (order_ - 1), order_ - 1);
        out.push_back(std::log(probability(ctx, padded[i])));
      }
    }
    return out;
  }

  std::string describe() const {
    std::ostringstream ss;
    ss << "ngram(order=" << order_ << ",k=" << k_ << ")";
    return ss.str();
  }

 private:
  static constexpr char kSep = '\x1f';

  struct ContextCounts {
    std::size_t total = 0;
    std::unordered_map<std::string, std::size_t> next;
  };

  std::vector<std::string> pad(const std::vector<std::string>& sent) const {
    std::vector<std::string> padded(order_ - 1, std::string(kBos));
    padded.insert(padded.end(), sent.begin(), sent.end());
    return padded;
  }

  static std::string context_key(const std::vector<std::string>& padded, std::size_t i, int order) {
    std::string key;
    for (std::size_t j = i - (order - 1); j < i; ++j) {
      if (j != i - (order - 1)) key += kSep;
      key += padded[j];
    }
    return key;
  }

  int order_ = 1;
  double k_ = 1.0;
  std::string unk_{kUnk};
  std::unordered_set<std::string> vocab_;
  std::unordered_map<std::string, ContextCounts> counts_;
};

inline std::vector<std::vector<std::string>> lm_sentences(const AnnotatedDocument& doc) {
  std::vector<std::vector<std::string>> out;
  for (const auto& sent : doc.sentences) {
    std::vector<std::string> words;
    for (const auto& t : sent.tokens) {
      auto w = normalize_word(t.surface);
      if (!w.empty()) words.push_back(std::move(w));
    }
    if (!words.empty()) out.push_back(std::move(words));
  }
  return out;
}

// Trains on raw texts, segmented with the heuristic sentence/word rules.
inline NGramLm train_ngram_lm(const std::vector<std::string>& texts, int order, double k) {
  if (texts.empty()) throw ValidationError("ngram: no training texts");
  std::vector<std::vector<std::string>> sentences;
  for (const auto& t : texts) {
    auto doc = heuristic_annotate("", t);
    for (auto& s : lm_sentences(doc)) sentences.push_back(std::move(s));
  }
  return NGramLm::train(sentences, order, k);
}

inline std::vector<double> score(const NGramLm& lm, const AnnotatedDocument& doc) { return lm.score(doc); }

// ---------------------------------------------------------------------------
// Coherence

// Mean number of entities shared by consecutive sentences; 0 for a document
// with fewer than two sentences.
inline double coherence(const AnnotatedDocument& doc, bool fold_case = false) {
  const std::size_t n = doc.sentences.size();
  if (n < 2) return 0.0;
  auto normalized = [fold_case](const std::set<std::string>& ents) {
    std::set<std::string> out;
    for (const auto& e : ents) {
      auto t = text::trim(e);
      if (t.empty()) continue;
      out.insert(fold_case ? text::to_lower(t) : std::string(t));
    }
    return out;
  };
  std::size_t shared = 0;
  auto prev = normalized(doc.sentences[0].entities);
  for (std::size_t i = 1; i < n; ++i) {
    auto cur = normalized(doc.sentences[i].entities);
    for (const auto& e : prev) shared += cur.contains(e) ? 1 : 0;
    prev = std::move(cur);
  }
  return static_cast<double>(shared) / static_cast<double>(n - 1);
}

// ---------------------------------------------------------------------------
// Syntactic complexity

inline const std::unordered_set<std::string>& subordinate_relations() {
  static const std::unordered_set<std::string> rels = {"advcl", "ccomp", "xcomp", "acl", "acl:relcl", "csubj", "csubj:pass"};
  return rels;
}

struct SentenceComplexity {
  int max_dependency_distance = 0;
  int subordinate_clauses = 0;
};

inline SentenceComplexity sentence_complexity(const SentenceAnnotation& sent) {
  SentenceComplexity c;
  const auto& subs = subordinate_relations();
  for (const auto& t : sent.tokens) {
    if (*t.head != 0) c.max_dependency_distance = std::max(c.max_dependency_distance, std::abs(t.index - *t.head));
    if (t.deprel && subs.contains(*t.deprel)) ++c.subordinate_clauses;
  }
  return c;
}

// Mean over sentences of (max dependency distance + subordinate clauses).
inline double syntactic_complexity(const AnnotatedDocument& doc) {
  if (doc.sentences.empty()) throw MetricError("syntactic_complexity", "document " + doc.story_id + " has no sentences");
  long total = 0;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const auto& sent = doc.sentences[i];
    if (!sent.has_arcs())
      throw MetricError("syntactic_complexity", "missing dependency annotation in sentence " + std::to_string(i + 1) +
                                                     " of " + doc.story_id);
    auto c = sentence_complexity(sent);
    total += c.max_dependency_distance + c.subordinate_clauses;
  }
  return static_cast<double>(total) / static_cast<double>(doc.sentences.size());
}

// ---------------------------------------------------------------------------
// Toxicity

inline double toxicity(const AnnotatedDocument& doc, const WordSet& lexicon, std::optional<double> external = std::nullopt) {
  if (external) {
    if (!(*external >= 0.0 && *external <= 1.0)) throw MetricError("toxicity", "external score outside [0,1]");
    return *external;
  }
  if (lexicon.empty()) throw MetricError("toxicity", "no lexicon and no external score for " + doc.story_id);
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& sent : doc.sentences) {
    for (const auto& t : sent.tokens) {
      auto w = normalize_word(t.surface);
      if (w.empty()) continue;
      ++total;
      if (lexicon.contains(w)) ++matched;
    }
  }
  if (total == 0) return 0.0;
  return std::min(1.0, static_cast<double>(matched) / static_cast<double>(total));
}

// ---------------------------------------------------------------------------
// Composition

enum class Metric { spache, ppl, coherence, syntactic_complexity, toxicity };
inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::spache, Metric::ppl, Metric::coherence,
                                                      Metric::syntactic_complexity, Metric::toxicity};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::spache: return "spache";
    case Metric::ppl: return "ppl";
    case Metric::coherence: return "coherence";
    case Metric::syntactic_complexity: return "syntactic_complexity";
    case Metric::toxicity: return "toxicity";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (auto m : kAllMetrics) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown metric '" + std::string(s) + "'");
}

// Coherence is the only metric where higher is better.
inline bool higher_is_better(Metric m) { return m == Metric::coherence; }

struct MetricVector {
  double spache = 0.0;
  double ppl = 1.0;
  double coherence = 0.0;
  double syntactic_complexity = 0.0;
  double toxicity = 0.0;

  double get(Metric m) const {
    switch (m) {
      case Metric::spache: return spache;
      case Metric::ppl: return ppl;
      case Metric::coherence: return coherence;
      case Metric::syntactic_complexity: return syntactic_complexity;
      case Metric::toxicity: return toxicity;
    }
    return 0.0;
  }
  void set(Metric m, double v) {
    switch (m) {
      case Metric::spache: spache = v; break;
      case Metric::ppl: ppl = v; break;
      case Metric::coherence: coherence = v; break;
      case Metric::syntactic_complexity: syntactic_complexity = v; break;
      case Metric::toxicity: toxicity = v; break;
    }
  }

  void validate() const {
    for (auto m : kAllMetrics) {
      if (!std::isfinite(get(m))) throw MetricError(to_string(m), "non-finite value");
    }
    if (!(ppl > 0.0)) throw MetricError("ppl", "perplexity must be positive");
    if (coherence < 0.0) throw MetricError("coherence", "negative value");
    if (syntactic_complexity < 0.0) throw MetricError("syntactic_complexity", "negative value");
    if (!(toxicity >= 0.0 && toxicity <= 1.0)) throw MetricError("toxicity", "value outside [0,1]");
  }

  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

struct MetricProvenance {
  std::string ppl;         // "external" or the n-gram description
  std::string toxicity;    // "external" or "lexicon"
  std::string annotation;  // "conllu" or "heuristic"

  friend bool operator==(const MetricProvenance&, const MetricProvenance&) = default;
};

struct MetricRecord {
  std::string story_id;
  int lesson_id = 0;
  Provenance source;
  MetricVector metrics;
  MetricProvenance provenance;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct PerplexitySource {
  const ExternalScores* external = nullptr;
  const NGramLm* fallback = nullptr;
};

struct ToxicitySource {
  const ExternalScores* external = nullptr;
  const WordSet* lexicon = nullptr;
};

struct MetricOptions {
  bool fold_case_entities = false;
  std::string annotation_source = "conllu";
};

inline MetricRecord metric_vector(const Story& story, const AnnotatedDocument& doc, const SpacheConfig& spache_config,
                                  const PerplexitySource& ppl_source, const ToxicitySource& tox_source,
                                  const MetricOptions& options = {}) {
  MetricRecord rec;
  rec.story_id = story.story_id;
  rec.lesson_id = story.lesson_id;
  rec.source = story.source;
  rec.provenance.annotation = options.annotation_source;

  auto& v = rec.metrics;
  v.spache = spache(doc, spache_config);

  if (ppl_source.external && ppl_source.external->token_logprobs) {
    v.ppl = perplexity(*ppl_source.external->token_logprobs);
    rec.provenance.ppl = "external";
  } else if (ppl_source.fallback) {
    v.ppl = perplexity(ppl_source.fallback->score(doc));
    rec.provenance.ppl = ppl_source.fallback->describe();
  } else {
    throw MetricError("ppl", "no log-probabilities and no fallback model for " + story.story_id);
  }

  v.coherence = coherence(doc, options.fold_case_entities);
  v.syntactic_complexity = syntactic_complexity(doc);

  std::optional<double> ext_tox;
  if (tox_source.external) ext_tox = tox_source.external->toxicity;
  static const WordSet kEmpty;
  v.toxicity = toxicity(doc, tox_source.lexicon ? *tox_source.lexicon : kEmpty, ext_tox);
  rec.provenance.toxicity = ext_tox ? "external" : "lexicon";

  v.validate();
  return rec;
}

// ---------------------------------------------------------------------------
// Metric record I/O (one JSON object per line)

inline nlohmann::json to_json(const MetricRecord& r) {
  nlohmann::json j;
  j["story_id"] = r.story_id;
  j["lesson_id"] = r.lesson_id;
  j["model"] = r.source.model;
  j["experiment"] = r.source.experiment;
  for (auto m : kAllMetrics) j[to_string(m)] = r.metrics.get(m);
  j["provenance"] = {{"ppl", r.provenance.ppl}, {"toxicity", r.provenance.toxicity}, {"annotation", r.provenance.annotation}};
  return j;
}

inline std::string serialize_metric_records(const std::vector<MetricRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<MetricRecord> parse_metric_records(std::string_view content, const std::string& source = "metrics") {
  std::vector<MetricRecord> out;
  std::set<std::string> ids;
  auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    auto j = detail::parse_json_line(lines[i], source, lineno);
    if (!j.is_object()) throw ParseError(source, lineno, "record is not an object");
    MetricRecord r;
    r.story_id = detail::required_string(j, "story_id", source, lineno);
    if (!j.contains("lesson_id") || !j["lesson_id"].is_number_integer())
      throw ParseError(source, lineno, "lesson_id missing or not an integer");
    r.lesson_id = j["lesson_id"].get<int>();
    r.source.model = j.value("model", "");
    r.source.experiment = j.value("experiment", "");
    for (auto m : kAllMetrics) {
      auto key = to_string(m);
      if (!j.contains(key) || !j[key].is_number()) throw ParseError(source, lineno, key + " missing or not a number");
      r.metrics.set(m, j[key].get<double>());
    }
    try {
      r.metrics.validate();
    } catch (const MetricError& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (j.contains("provenance") && j["provenance"].is_object()) {
      const auto& p = j["provenance"];
      r.provenance.ppl = p.value("ppl", "");
      r.provenance.toxicity = p.value("toxicity", "");
      r.provenance.annotation = p.value("annotation", "");
    }
    if (!ids.insert(r.story_id).second) throw ParseError(source, lineno, "duplicate story_id " + r.story_id);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<MetricRecord> load_metric_records(const std::filesystem::path& path) {
  return parse_metric_records(text::read_file(path), path.string());
}

}  // namespace storyeval
