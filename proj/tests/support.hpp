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

// Shared fixtures for the unit and acceptance tests: temporary directories,
// seeded generators, and oracles written independently of the library code.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "storyeval/corpus.hpp"
#include "storyeval/diversity.hpp"
#include "storyeval/text.hpp"

namespace storyeval::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("storyeval-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

  std::string write(const std::string& name, const std::string& content) const {
    text::write_file(path_ / name, content);
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

// Token with an explicit dependency arc.
inline Token arc(int index, std::string surface, int head, std::string deprel = "dep") {
  return Token{index, std::move(surface), head, std::move(deprel)};
}

inline SentenceAnnotation sentence(std::vector<Token> tokens, std::set<std::string> entities = {}) {
  return SentenceAnnotation{std::move(tokens), std::move(entities)};
}

// Sentence of plain tokens without arcs.
inline SentenceAnnotation plain_sentence(const std::vector<std::string>& words, std::set<std::string> entities = {}) {
  SentenceAnnotation s;
  int i = 1;
  for (const auto& w : words) s.tokens.push_back(Token{i++, w, std::nullopt, std::nullopt});
  s.entities = std::move(entities);
  return s;
}

inline const std::vector<std::string>& small_vocabulary() {
  static const std::vector<std::string> words = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "big",
                                                 "red", "hat", "pig", "dig", "sun", "fun", "and"};
  return words;
}

inline TokenList random_tokens(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, std::min(vocab, small_vocabulary().size()) - 1);
  TokenList out(len(rng));
  for (auto& t : out) t = small_vocabulary()[pick(rng)];
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force BLEU: every n-gram is counted by scanning the token lists
// directly, with no hashing or shared tables.

inline std::size_t occurrences(const TokenList& toks, const TokenList& hyp, std::size_t start, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    bool same = true;
    for (std::size_t k = 0; k < n && same; ++k) same = toks[i + k] == hyp[start + k];
    if (same) ++count;
  }
  return count;
}

inline double oracle_bleu(const TokenList& hyp, const std::vector<TokenList>& all_refs, const BleuConfig& cfg) {
  std::vector<TokenList> refs;
  for (const auto& r : all_refs) {
    if (!r.empty()) refs.push_back(r);
  }
  const std::size_t c = hyp.size();
  std::size_t r = refs.front().size();
  for (const auto& ref : refs) {
    auto d_new = ref.size() > c ? ref.size() - c : c - ref.size();
    auto d_old = r > c ? r - c : c - r;
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  const std::size_t orders = std::min<std::size_t>(cfg.max_order, c);
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    std::size_t clipped = 0;
    const std::size_t total = c - n + 1;
    for (std::size_t i = 0; i + n <= c; ++i) {
      // Only the first occurrence of each distinct n-gram contributes.
      bool seen = false;
      for (std::size_t j = 0; j < i && !seen; ++j) {
        bool same = true;
        for (std::size_t k = 0; k < n && same; ++k) same = hyp[j + k] == hyp[i + k];
        seen = same;
      }
      if (seen) continue;
      std::size_t in_hyp = occurrences(hyp, hyp, i, n);
      std::size_t best = 0;
      for (const auto& ref : refs) best = std::max(best, occurrences(ref, hyp, i, n));
      clipped += std::min(in_hyp, best);
    }
    double p;
    if (clipped == 0) {
      if (cfg.smoothing == Smoothing::none) return 0.0;
      p = cfg.epsilon / static_cast<double>(total);
    } else {
      p = static_cast<double>(clipped) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  double score = std::exp(log_sum / static_cast<double>(orders));
  if (cfg.brevity_penalty && c < r) score *= std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return score;
}

// Global Self-BLEU recomputed sequentially: each story against all others.
inline std::vector<double> oracle_global_self_bleu(const StorySet& set, const BleuConfig& cfg) {
  std::vector<double> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::vector<TokenList> refs;
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (j != i) refs.push_back(set[j].tokens);
    }
    out.push_back(oracle_bleu(set[i].tokens, refs, cfg));
  }
  return out;
}

inline std::vector<BleuConfig> all_bleu_modes() {
  std::vector<BleuConfig> modes;
  for (auto smoothing : {Smoothing::none, Smoothing::add_epsilon}) {
    for (bool bp : {true, false}) {
      for (int order : {1, 2, 4}) {
        BleuConfig c;
        c.smoothing = smoothing;
        c.brevity_penalty = bp;
        c.max_order = order;
        modes.push_back(c);
      }
    }
  }
  return modes;
}

// ---------------------------------------------------------------------------
// Student t reference values computed from closed forms.

// df = 1 is the Cauchy distribution.
inline double cauchy_cdf(double t) { return 0.5 + std::atan(t) / M_PI; }

// df = 2 has F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
inline double t2_cdf(double t) { return 0.5 + t / (2.0 * std::sqrt(2.0 + t * t)); }

// ---------------------------------------------------------------------------
// Mock chat-completions server on 127.0.0.1. The handler receives the parsed
// request body and the 1-based request number and returns (status, body).

class MockChatServer {
 public:
  using Handler = std::function<std::pair<int, std::string>(const nlohmann::json&, int)>;

  explicit MockChatServer(Handler handler, std::chrono::milliseconds latency = std::chrono::milliseconds(0))
      : handler_(std::move(handler)), latency_(latency) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(16); };
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      int now = ++in_flight_;
      {
        std::lock_guard lock(mu_);
        max_in_flight_ = std::max(max_in_flight_, now);
        bodies_.push_back(nlohmann::json::parse(req.body));
        auth_.push_back(req.get_header_value("Authorization"));
      }
      int n = ++requests_;
      if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
      auto [status, body] = handler_(nlohmann::json::parse(req.body), n);
      --in_flight_;
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }
  int max_in_flight() const {
    std::lock_guard lock(mu_);
    return max_in_flight_;
  }
  std::vector<nlohmann::json> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mu_);
    return auth_;
  }

  static std::string completion(const std::string& content) {
    return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
  }

 private:
  Handler handler_;
  std::chrono::milliseconds latency_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> requests_{0};
  mutable std::mutex mu_;
  int max_in_flight_ = 0;
  std::vector<nlohmann::json> bodies_;
  std::vector<std::string> auth_;
};

// ---------------------------------------------------------------------------
// Synthetic corpus: lessons, stories and matching CoNLL-U annotations.

struct SyntheticCorpus {
  std::string lessons_json;
  std::string stories_jsonl;
  std::string conllu;
  std::vector<Story> stories;
};

inline SyntheticCorpus synthetic_corpus(int lessons, int stories_per_lesson, std::uint64_t seed) {
  static const std::vector<std::string> names = {"Sam", "Pam", "Tim", "Nan", "Pip"};
  static const std::vector<std::string> verbs = {"sat", "ran", "hid", "dug", "hops", "naps", "taps"};
  static const std::vector<std::string> nouns = {"cat", "mat", "pig", "hat", "pan", "sun", "mud", "log"};
  static const std::vector<std::vector<std::string>> phoneme_sets = {
      {"/æ/", "/t/"}, {"/ɪ/", "/p/", "/g/"}, {"/ʌ/", "/n/"}, {"/ɒ/", "/d/", "/l/"}, {"/ɛ/", "/b/"}};
  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  SyntheticCorpus out;
  nlohmann::json ls = nlohmann::json::array();
  for (int l = 1; l <= lessons; ++l) {
    ls.push_back({{"lesson_id", l}, {"grade", "K"}, {"phonemes", phoneme_sets[(l - 1) % phoneme_sets.size()]}});
  }
  out.lessons_json = ls.dump(2) + "\n";

  for (int l = 1; l <= lessons; ++l) {
    for (int k = 1; k <= stories_per_lesson; ++k) {
      std::string id = "syn-L" + std::to_string(l) + "-" + std::to_string(k);
      std::string experiment = k % 2 ? "baseline" : "rewarded";
      int sentences = 3 + static_cast<int>(rng() % 4);
      std::string body;
      out.conllu += "# story_id = " + id + "\n";
      for (int s = 0; s < sentences; ++s) {
        // "<Name> <verb> on the <noun> ." with a small fixed tree
        std::string name = pick(names), verb = pick(verbs), noun = pick(nouns);
        bool clause = rng() % 3 == 0;
        std::vector<std::tuple<std::string, int, std::string, std::string>> toks = {
            {name, 2, "nsubj", "Entity=B-PER"}, {verb, 0, "root", "_"}, {"on", 5, "case", "_"},
            {"the", 5, "det", "_"},             {noun, 2, "obl", "_"}};
        if (clause) {
          toks.push_back({"and", 7, "cc", "_"});
          toks.push_back({"naps", 2, "advcl", "_"});
        }
        toks.push_back({".", 2, "punct", "_"});
        std::string sent;
        for (std::size_t i = 0; i < toks.size(); ++i) {
          const auto& [w, head, rel, misc] = toks[i];
          if (w == ".") {
            sent += ".";
          } else {
            if (!sent.empty()) sent += ' ';
            sent += w;
          }
          out.conllu += std::to_string(i + 1) + "\t" + w + "\t" + text::to_lower(w) + "\t_\t_\t_\t" +
                        std::to_string(head) + "\t" + rel + "\t_\t" + misc + "\n";
        }
        out.conllu += "\n";
        if (!body.empty()) body += ' ';
        body += sent;
      }
      out.stories.push_back(make_story(id, l, {"toy-model", experiment}, body));
    }
  }
  out.stories_jsonl = serialize_stories(out.stories);
  return out;
}

}  // namespace storyeval::testing
