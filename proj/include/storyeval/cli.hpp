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

// Command-line front end. Subcommands: evaluate, diversity, curate, report,
// generate. Each run writes manifest.json (resolved options, input digests,
// tool version, timestamp) into its output directory before any output.
//
// Option precedence: command-line flags, then the --config file, then
// built-in defaults. A --config file is either {"<subcommand>": {...}} or a
// previous run's manifest.json, which makes a run replayable.
//
// Exit codes: 0 success, 1 validation error, 2 I/O or network error.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/curate.hpp"
#include "storyeval/diversity.hpp"
#include "storyeval/error.hpp"
#include "storyeval/genclient.hpp"
#include "storyeval/metrics.hpp"
#include "storyeval/parallel.hpp"
#include "storyeval/report.hpp"
#include "storyeval/text.hpp"

#ifndef STORYEVAL_VERSION
#define STORYEVAL_VERSION "0.0.0"
#endif
#ifndef STORYEVAL_DATA_DIR
#define STORYEVAL_DATA_DIR "data"
#endif

namespace storyeval::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string data_path(const std::string& name) {
  const char* env = std::getenv("STORYEVAL_DATA_DIR");
  return (fs::path(env && *env ? env : STORYEVAL_DATA_DIR) / name).string();
}

inline std::string sha256_file(const fs::path& path) {
  auto content = text::read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed for " + path.string());
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return ss.str();
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Adds or replaces this subcommand's entry in <dir>/manifest.json.
inline void write_manifest(const fs::path& dir, const std::string& subcommand, const json& resolved,
                           const std::vector<std::string>& inputs) {
  fs::path path = dir / "manifest.json";
  json manifest = {{"tool", "storyeval"}, {"version", STORYEVAL_VERSION}, {"runs", json::object()}};
  if (fs::exists(path)) {
    try {
      auto existing = json::parse(text::read_file(path));
      if (existing.is_object() && existing.contains("runs") && existing["runs"].is_object()) manifest["runs"] = existing["runs"];
    } catch (const json::parse_error&) {
      // Unreadable manifests are replaced.
    }
  }
  json digests = json::object();
  for (const auto& in : inputs) digests[in] = sha256_file(in);
  manifest["runs"][subcommand] = {{"subcommand", subcommand},
                                  {"config", resolved},
                                  {"inputs", digests},
                                  {"tool_version", STORYEVAL_VERSION},
                                  {"timestamp", utc_timestamp()}};
  text::write_file(path, manifest.dump(2) + "\n");
}

inline fs::path output_dir_of(const std::string& out_file) {
  fs::path p(out_file);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

// ---------------------------------------------------------------------------
// Option structs. Field names double as config-file keys and, with '_'
// replaced by '-', as flag names.

struct EvaluateOptions {
  std::string stories;
  std::string lessons;
  std::string annotations;
  std::string entity_source = "annotation";
  std::string familiar = data_path("familiar_words.txt");
  std::string lexicon = data_path("toxic_lexicon.txt");
  std::string scores;
  std::string ngram_train;
  int ngram_order = 2;
  double ngram_k = 0.1;
  std::string unfamiliar_counting = "unique_types";
  bool fold_case_entities = false;
  int workers = 1;
  std::string out = "run/metrics.jsonl";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvaluateOptions, stories, lessons, annotations, entity_source, familiar,
                                                lexicon, scores, ngram_train, ngram_order, ngram_k, unfamiliar_counting,
                                                fold_case_entities, workers, out)

struct DiversityOptions {
  std::string stories;
  int max_order = 4;
  std::string smoothing = "add_epsilon";
  double epsilon = 0.1;
  bool brevity_penalty = true;
  int workers = 1;
  std::string out = "run/diversity.jsonl";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiversityOptions, stories, max_order, smoothing, epsilon, brevity_penalty,
                                                workers, out)

struct CurateOptions {
  std::string lessons;
  std::string stories;
  std::string metrics;
  std::string design = "baseline";
  std::string reward_config;
  std::string errors;
  std::string instruction_template = data_path("instruction_template.json");
  std::string out = "run/dataset.jsonl";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CurateOptions, lessons, stories, metrics, design, reward_config, errors,
                                                instruction_template, out)

struct ReportOptions {
  std::string metrics;
  std::string diversity;
  std::vector<std::string> baseline;
  std::string out_dir = "run";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReportOptions, metrics, diversity, baseline, out_dir)

struct GenerateOptions {
  std::string mode = "stories";
  std::string lessons;
  std::vector<int> lesson_id;
  std::string stories;
  std::string fewshot;
  std::string endpoint = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string experiment = "generated";
  double top_p = 0.9;
  double temperature = 0.8;
  int stories_per_lesson = 10;
  int max_concurrency = 4;
  int max_attempts = 5;
  int backoff_ms = 500;
  int timeout = 120;
  int error_reprompts = 3;
  std::string instruction_template = data_path("instruction_template.json");
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerateOptions, mode, lessons, lesson_id, stories, fewshot, endpoint, path,
                                                model, experiment, top_p, temperature, stories_per_lesson, max_concurrency,
                                                max_attempts, backoff_ms, timeout, error_reprompts, instruction_template, out)

// Tracks which json key each registered CLI option fills.
class OptionTable {
 public:
  explicit OptionTable(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& desc) {
    auto* o = app_->add_option("--" + flag_name(key), var, desc);
    options_.emplace_back(key, o);
    return o;
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& desc) {
    auto name = flag_name(key);
    auto* o = app_->add_flag("--" + name + ",!--no-" + name, var, desc);
    options_.emplace_back(key, o);
    return o;
  }

  // defaults <- config section <- explicitly passed flags
  template <typename Opts>
  Opts resolve(const Opts& parsed, const std::optional<json>& config_section) const {
    json resolved = Opts{};
    if (config_section) {
      if (!config_section->is_object()) throw ValidationError("config: section must be an object");
      for (const auto& [k, v] : config_section->items()) {
        if (!resolved.contains(k)) throw ValidationError("config: unknown key '" + k + "'");
        resolved[k] = v;
      }
    }
    json p = parsed;
    for (const auto& [key, opt] : options_) {
      if (opt->count() > 0) resolved[key] = p[key];
    }
    try {
      return resolved.get<Opts>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  }

 private:
  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  CLI::App* app_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

inline std::optional<json> load_config_section(const std::string& path, const std::string& subcommand) {
  if (path.empty()) return std::nullopt;
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": malformed JSON: " + e.what());
  }
  if (j.is_object() && j.contains("runs")) {
    if (!j["runs"].contains(subcommand)) throw ValidationError(path + ": manifest has no '" + subcommand + "' run");
    return j["runs"][subcommand]["config"];
  }
  if (j.is_object() && j.contains(subcommand)) return j[subcommand];
  return std::nullopt;
}

inline void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ValidationError("--" + flag + " is required");
}

inline std::vector<std::string> present(std::initializer_list<std::string> paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int run_evaluate(const EvaluateOptions& o, std::ostream& err) {
  require(o.stories, "stories");
  if (o.workers < 1) throw ValidationError("--workers must be >= 1");
  auto entity_source = o.entity_source == "annotation" ? EntitySource::annotation
                       : o.entity_source == "heuristic"
                           ? EntitySource::heuristic
                           : throw ValidationError("--entity-source must be annotation or heuristic");

  auto inputs = present({o.stories, o.lessons, o.annotations, o.familiar, o.lexicon, o.scores, o.ngram_train});
  write_manifest(output_dir_of(o.out), "evaluate", json(o), inputs);

  std::vector<Lesson> lessons;
  if (!o.lessons.empty()) lessons = load_lessons(o.lessons);
  auto stories = load_stories(o.stories, o.lessons.empty() ? nullptr : &lessons);

  SpacheConfig spache_config;
  spache_config.familiar_words = text::load_word_list<WordSet>(o.familiar);
  spache_config.unfamiliar_counting = parse_unfamiliar_counting(o.unfamiliar_counting);
  spache_config.validate();
  WordSet lexicon;
  if (!o.lexicon.empty()) lexicon = text::load_word_list<WordSet>(o.lexicon);

  std::map<std::string, AnnotatedDocument> annotated;
  if (!o.annotations.empty()) annotated = load_conllu(o.annotations, entity_source);
  std::map<std::string, ExternalScores> scores;
  if (!o.scores.empty()) scores = load_external_scores(o.scores);

  std::vector<const Story*> scored;
  for (const auto& s : stories) {
    if (s.flags.contains(std::string(flag::kEmptyOutput))) {
      err << "evaluate: skipping " << s.story_id << " (empty_output)\n";
      continue;
    }
    scored.push_back(&s);
  }

  std::optional<NGramLm> lm;
  bool need_lm = std::any_of(scored.begin(), scored.end(), [&](const Story* s) {
    auto it = scores.find(s->story_id);
    return it == scores.end() || !it->second.token_logprobs;
  });
  if (need_lm) {
    std::vector<std::string> texts;
    if (!o.ngram_train.empty()) {
      for (const auto& s : load_stories(o.ngram_train)) texts.push_back(s.text);
    } else {
      for (const Story* s : scored) texts.push_back(s->text);
    }
    lm = train_ngram_lm(texts, o.ngram_order, o.ngram_k);
  }

  MetricOptions base_options;
  base_options.fold_case_entities = o.fold_case_entities;
  std::vector<MetricRecord> records(scored.size());
  parallel_for(scored.size(), static_cast<std::size_t>(o.workers), [&](std::size_t i) {
    const Story& s = *scored[i];
    MetricOptions mo = base_options;
    AnnotatedDocument doc;
    if (auto it = annotated.find(s.story_id); it != annotated.end()) {
      doc = it->second;
      mo.annotation_source = "conllu";
    } else {
      doc = heuristic_annotate(s);
      mo.annotation_source = "heuristic";
    }
    auto st = scores.find(s.story_id);
    const ExternalScores* ext = st == scores.end() ? nullptr : &st->second;
    try {
      records[i] = metric_vector(s, doc, spache_config, {ext, lm ? &*lm : nullptr}, {ext, &lexicon}, mo);
    } catch (const MetricError& e) {
      throw MetricError(e.metric(), "story " + s.story_id + ": " + e.what());
    }
  });
  text::write_file(o.out, serialize_metric_records(records));
  return 0;
}

inline int run_diversity(const DiversityOptions& o, std::ostream& err) {
  require(o.stories, "stories");
  if (o.workers < 1) throw ValidationError("--workers must be >= 1");
  BleuConfig cfg;
  cfg.max_order = o.max_order;
  cfg.smoothing = parse_smoothing(o.smoothing);
  cfg.epsilon = o.epsilon;
  cfg.brevity_penalty = o.brevity_penalty;
  cfg.validate();
  write_manifest(output_dir_of(o.out), "diversity", json(o), present({o.stories}));

  std::vector<Story> stories;
  for (auto& s : load_stories(o.stories)) {
    if (s.flags.contains(std::string(flag::kEmptyOutput))) {
      err << "diversity: skipping " << s.story_id << " (empty_output)\n";
      continue;
    }
    stories.push_back(std::move(s));
  }
  auto groups = compute_diversity(stories, cfg, static_cast<std::size_t>(o.workers));
  text::write_file(o.out, serialize_diversity(groups, cfg));
  return 0;
}

inline int run_curate(const CurateOptions& o, std::ostream&) {
  require(o.lessons, "lessons");
  require(o.stories, "stories");
  auto design = parse_design(o.design);
  if (design == DatasetDesign::rewarded && o.reward_config.empty())
    throw ValidationError("--design rewarded requires --reward-config");
  if ((design == DatasetDesign::rewarded || design == DatasetDesign::good_stories) && o.metrics.empty())
    throw ValidationError("--design " + o.design + " requires --metrics");
  if (design == DatasetDesign::error_augmented && o.errors.empty())
    throw ValidationError("--design error_augmented requires --errors");

  write_manifest(output_dir_of(o.out), "curate", json(o),
                 present({o.lessons, o.stories, o.metrics, o.reward_config, o.errors, o.instruction_template}));

  auto corpus = load_corpus(o.lessons, o.stories);
  DatasetInputs in;
  in.lessons = &corpus.lessons;
  in.stories = &corpus.stories;
  in.instruction = InstructionTemplate::load(o.instruction_template);

  std::map<std::string, MetricVector> vectors;
  if (!o.metrics.empty()) {
    for (const auto& r : load_metric_records(o.metrics)) vectors[r.story_id] = r.metrics;
    in.vectors = &vectors;
  }
  std::optional<RewardConfig> reward_config;
  if (!o.reward_config.empty()) {
    reward_config = RewardConfig::load(o.reward_config);
    in.reward_config = &*reward_config;
  }
  ErrorMap errors;
  if (!o.errors.empty()) {
    errors = load_error_map(o.errors);
    in.errors = &errors;
  }
  // Stories that were never scored (e.g. empty outputs) cannot be curated.
  std::vector<Story> eligible;
  for (const auto& s : corpus.stories) {
    if (s.flags.contains(std::string(flag::kEmptyOutput))) continue;
    eligible.push_back(s);
  }
  in.stories = &eligible;
  text::write_file(o.out, serialize_dataset(build_sft_dataset(design, in)));
  return 0;
}

inline int run_report(const ReportOptions& o, std::ostream&) {
  require(o.metrics, "metrics");
  write_manifest(o.out_dir, "report", json(o), present({o.metrics, o.diversity}));
  auto records = load_metric_records(o.metrics);
  std::vector<json> groups;
  if (!o.diversity.empty()) {
    auto lines = text::split_lines(text::read_file(o.diversity));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      auto j = detail::parse_json_line(lines[i], o.diversity, i + 1);
      if (j.value("record", "") == "group") groups.push_back(std::move(j));
    }
  }
  auto rep = build_report(records, groups, o.baseline);
  fs::path dir(o.out_dir);
  text::write_file(dir / "report.txt", render_report_text(rep));
  text::write_file(dir / "report.csv", render_report_csv(rep));
  text::write_file(dir / "significance.csv", render_significance_csv(rep));
  return 0;
}

inline std::string api_key_from_env() {
  for (const char* name : {"STORYEVAL_API_KEY", "OPENAI_API_KEY"}) {
    const char* v = std::getenv(name);
    if (v && *v) return v;
  }
  return {};
}

inline int run_generate(GenerateOptions o, std::ostream& err, HttpTransport* transport_override = nullptr) {
  if (o.mode != "stories" && o.mode != "errors") throw ValidationError("--mode must be stories or errors");
  if (o.out.empty()) o.out = o.mode == "stories" ? "run/stories.jsonl" : "run/errors.jsonl";
  GenerationConfig cfg;
  cfg.endpoint = o.endpoint;
  cfg.path = o.path;
  cfg.model = o.model;
  cfg.top_p = o.top_p;
  cfg.temperature = o.temperature;
  cfg.stories_per_lesson = o.stories_per_lesson;
  cfg.max_concurrency = o.max_concurrency;
  cfg.retry.max_attempts = o.max_attempts;
  cfg.retry.base_delay = std::chrono::milliseconds(o.backoff_ms);
  cfg.timeout_seconds = o.timeout;
  cfg.error_reprompts = o.error_reprompts;
  cfg.api_key = api_key_from_env();
  cfg.validate();

  HttplibTransport http(cfg.endpoint, cfg.timeout_seconds);
  HttpTransport& transport = transport_override ? *transport_override : http;
  Logger log = [&err](const std::string& msg) { err << "generate: " << msg << "\n"; };

  if (o.mode == "stories") {
    require(o.lessons, "lessons");
    write_manifest(output_dir_of(o.out), "generate", json(o), present({o.lessons, o.instruction_template}));
    auto lessons = load_lessons(o.lessons);
    auto instruction = InstructionTemplate::load(o.instruction_template);
    std::set<int> wanted(o.lesson_id.begin(), o.lesson_id.end());
    std::vector<Story> out;
    for (const auto& lesson : lessons) {
      if (!wanted.empty() && !wanted.contains(lesson.lesson_id)) continue;
      auto res = generate_stories(lesson, cfg, transport, instruction, log);
      for (std::size_t slot = 0; slot < res.outputs.size(); ++slot) {
        auto report = sanitize(res.outputs[slot], lesson, instruction);
        char id[64];
        std::snprintf(id, sizeof id, "-L%03d-%02zu", lesson.lesson_id, slot + 1);
        out.push_back(make_story(o.model + id, lesson.lesson_id, {o.model, o.experiment}, report.text, report.flags));
      }
    }
    text::write_file(o.out, serialize_stories(out));
    return 0;
  }

  require(o.stories, "stories");
  require(o.fewshot, "fewshot");
  write_manifest(output_dir_of(o.out), "generate", json(o), present({o.stories, o.fewshot}));
  auto stories = load_stories(o.stories);
  auto fewshot = load_fewshot(o.fewshot);
  if (fewshot.empty()) throw ValidationError("--fewshot file has no examples");
  auto results = simulate_errors_batch(stories, fewshot, cfg, transport, log);
  std::string body;
  std::size_t failures = 0;
  for (const auto& r : results) {
    json j = {{"story_id", r.story_id}, {"phonemes", r.phonemes ? json(*r.phonemes) : json(nullptr)}};
    if (!r.phonemes) {
      j["error"] = r.error;
      ++failures;
    }
    body += j.dump() + "\n";
  }
  text::write_file(o.out, body);
  if (failures) err << "generate: " << failures << " of " << results.size() << " stories failed error simulation\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct DispatchHooks {
  HttpTransport* transport = nullptr;  // replaces the HTTP client (tests)
};

// args excludes the program name.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                    const DispatchHooks& hooks = {}) {
  CLI::App app{"storyeval: evaluation and curation toolkit for phoneme-constrained children's stories", "storyeval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(STORYEVAL_VERSION));

  EvaluateOptions eval_opts;
  DiversityOptions div_opts;
  CurateOptions cur_opts;
  ReportOptions rep_opts;
  GenerateOptions gen_opts;
  std::map<std::string, std::string> config_paths;

  auto* eval = app.add_subcommand("evaluate", "Score each story on the five quality metrics");
  OptionTable et(eval);
  et.add("stories", eval_opts.stories, "Stories JSONL");
  et.add("lessons", eval_opts.lessons, "Lessons JSON (validates lesson ids)");
  et.add("annotations", eval_opts.annotations, "CoNLL-U annotations with '# story_id = ' comments");
  et.add("entity_source", eval_opts.entity_source, "annotation | heuristic");
  et.add("familiar", eval_opts.familiar, "Familiar word list, one word per line");
  et.add("lexicon", eval_opts.lexicon, "Toxic term lexicon, one term per line");
  et.add("scores", eval_opts.scores, "External scores JSONL (token_logprobs, toxicity)");
  et.add("ngram_train", eval_opts.ngram_train, "Stories JSONL used to train the fallback n-gram LM");
  et.add("ngram_order", eval_opts.ngram_order, "Fallback n-gram order");
  et.add("ngram_k", eval_opts.ngram_k, "Fallback add-k constant");
  et.add("unfamiliar_counting", eval_opts.unfamiliar_counting, "unique_types | all_tokens");
  et.flag("fold_case_entities", eval_opts.fold_case_entities, "Case-fold entities before intersecting");
  et.add("workers", eval_opts.workers, "Worker threads");
  et.add("out", eval_opts.out, "Output metrics JSONL");
  eval->add_option("--config", config_paths["evaluate"], "Config file or manifest to replay");

  auto* div = app.add_subcommand("diversity", "Per-lesson and global Self-BLEU");
  OptionTable dt(div);
  dt.add("stories", div_opts.stories, "Stories JSONL");
  dt.add("max_order", div_opts.max_order, "Maximum n-gram order (1-9)");
  dt.add("smoothing", div_opts.smoothing, "none | add_epsilon");
  dt.add("epsilon", div_opts.epsilon, "Epsilon for add_epsilon smoothing");
  dt.flag("brevity_penalty", div_opts.brevity_penalty, "Apply the brevity penalty");
  dt.add("workers", div_opts.workers, "Worker threads");
  dt.add("out", div_opts.out, "Output diversity JSONL");
  div->add_option("--config", config_paths["diversity"], "Config file or manifest to replay");

  auto* cur = app.add_subcommand("curate", "Filter stories, compute rewards and build an SFT dataset");
  OptionTable ct(cur);
  ct.add("lessons", cur_opts.lessons, "Lessons JSON");
  ct.add("stories", cur_opts.stories, "Stories JSONL");
  ct.add("metrics", cur_opts.metrics, "Metrics JSONL from evaluate");
  ct.add("design", cur_opts.design, "baseline | good_stories | rewarded | error_augmented");
  ct.add("reward_config", cur_opts.reward_config, "Reward configuration JSON");
  ct.add("errors", cur_opts.errors, "Simulated errors JSONL");
  ct.add("instruction_template", cur_opts.instruction_template, "Instruction template JSON");
  ct.add("out", cur_opts.out, "Output dataset JSONL");
  cur->add_option("--config", config_paths["curate"], "Config file or manifest to replay");

  auto* rep = app.add_subcommand("report", "Mean (SD) tables and Welch significance tests");
  OptionTable rt(rep);
  rt.add("metrics", rep_opts.metrics, "Metrics JSONL from evaluate");
  rt.add("diversity", rep_opts.diversity, "Diversity JSONL from diversity");
  rt.add("baseline", rep_opts.baseline, "Baseline group (experiment/model) to compare against; repeatable");
  rt.add("out_dir", rep_opts.out_dir, "Output directory");
  rep->add_option("--config", config_paths["report"], "Config file or manifest to replay");

  auto* gen = app.add_subcommand("generate", "Generate stories or simulated reading errors via a chat-completions endpoint");
  OptionTable gt(gen);
  gt.add("mode", gen_opts.mode, "stories | errors");
  gt.add("lessons", gen_opts.lessons, "Lessons JSON (stories mode)");
  gt.add("lesson_id", gen_opts.lesson_id, "Only these lesson ids; repeatable");
  gt.add("stories", gen_opts.stories, "Stories JSONL (errors mode)");
  gt.add("fewshot", gen_opts.fewshot, "Few-shot mispronunciation examples JSONL (errors mode)");
  gt.add("endpoint", gen_opts.endpoint, "Base URL of the OpenAI-compatible server");
  gt.add("path", gen_opts.path, "Chat-completions path");
  gt.add("model", gen_opts.model, "Model name");
  gt.add("experiment", gen_opts.experiment, "Experiment label stamped into story provenance");
  gt.add("top_p", gen_opts.top_p, "Nucleus sampling top-p");
  gt.add("temperature", gen_opts.temperature, "Sampling temperature");
  gt.add("stories_per_lesson", gen_opts.stories_per_lesson, "Stories per lesson");
  gt.add("max_concurrency", gen_opts.max_concurrency, "Maximum requests in flight");
  gt.add("max_attempts", gen_opts.max_attempts, "Attempts per request");
  gt.add("backoff_ms", gen_opts.backoff_ms, "Initial backoff in milliseconds");
  gt.add("timeout", gen_opts.timeout, "Request timeout in seconds");
  gt.add("error_reprompts", gen_opts.error_reprompts, "Re-prompts when the error count is out of range");
  gt.add("instruction_template", gen_opts.instruction_template, "Instruction template JSON");
  gt.add("out", gen_opts.out, "Output JSONL");
  gen->add_option("--config", config_paths["generate"], "Config file or manifest to replay");
  gen->footer("The bearer token is read from STORYEVAL_API_KEY (or OPENAI_API_KEY).");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 1;
  }

  try {
    if (*eval) return run_evaluate(et.resolve(eval_opts, load_config_section(config_paths["evaluate"], "evaluate")), err);
    if (*div) return run_diversity(dt.resolve(div_opts, load_config_section(config_paths["diversity"], "diversity")), err);
    if (*cur) return run_curate(ct.resolve(cur_opts, load_config_section(config_paths["curate"], "curate")), err);
    if (*rep) return run_report(rt.resolve(rep_opts, load_config_section(config_paths["report"], "report")), err);
    if (*gen)
      return run_generate(gt.resolve(gen_opts, load_config_section(config_paths["generate"], "generate")), err, hooks.transport);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NetworkError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace storyeval::cli
