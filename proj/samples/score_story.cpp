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

// Scores one story with the library API: heuristic annotation, Spache,
// coherence, and BLEU against a second telling of the same story.
//
//   score_story "Sam has a cat. The cat naps." "Sam has a cat. The cat sleeps."

#include <iostream>
#include <string>

#include "storyeval/corpus.hpp"
#include "storyeval/diversity.hpp"
#include "storyeval/metrics.hpp"
#include "storyeval/text.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: score_story <story> [reference]\n";
    return 1;
  }
  using namespace storyeval;
  try {
    SpacheConfig cfg;
    cfg.familiar_words = text::load_word_list<WordSet>(std::string(STORYEVAL_DATA_DIR) + "/familiar_words.txt");

    auto doc = heuristic_annotate("sample", argv[1]);
    auto parts = spache_components(doc, cfg);
    std::cout << "sentences            " << parts.sentences << "\n"
              << "words                " << parts.words << "\n"
              << "unfamiliar percent   " << parts.unfamiliar_percentage << "\n"
              << "spache               " << spache(doc, cfg) << "\n"
              << "coherence            " << coherence(doc) << "\n";

    if (argc > 2) {
      BleuConfig bleu_cfg;
      auto hyp = tokenize_for_diversity(argv[1]);
      std::vector<TokenList> refs{tokenize_for_diversity(argv[2])};
      std::cout << "bleu vs reference    " << bleu(hyp, refs, bleu_cfg) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
