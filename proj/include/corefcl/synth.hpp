// Copyright 2026 The corefcl Authors.
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

#ifndef COREFCL_SYNTH_HPP_
#define COREFCL_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corefcl/consensus.hpp"
#include "corefcl/corpus.hpp"
#include "json.hpp"

namespace corefcl {

// One entity type: its label path, context templates (token lists with a
// single "@" slot for the mention), name pool, a type-revealing common noun
// and the pronouns usable for it.
struct TypeSpec {
  std::string label;
  std::vector<std::vector<std::string>> templates;
  std::vector<std::vector<std::string>> names;
  std::string noun;
  std::vector<std::string> pronouns;
};

struct CorefNoise {
  double miss_rate = 0.0;      // P(a gold link is dropped)
  double spurious_rate = 0.0;  // P(a candidate cross-entity link is added)
};

struct SynthConfig {
  std::size_t n_stories = 200;
  std::size_t entities_per_story = 4;
  std::size_t mentions_per_entity = 3;
  // Explicit inventory; when empty, default_inventory(n_types) is used.
  std::vector<TypeSpec> type_inventory;
  std::size_t n_types = 20;
  double pronoun_fraction = 0.3;
  double nominal_fraction = 0.2;  // of the remaining non-first mentions
  double pair_sentence_prob = 0.25;
  std::size_t max_filler = 3;
  CorefNoise sys_a;
  CorefNoise sys_b;
  std::uint64_t seed = 1;
  std::string story_prefix = "story";

  void validate() const;
  std::vector<TypeSpec> resolved_inventory() const;
};

struct SynthCorpus {
  // Stories, gold typed mentions and the "sysA"/"sysB" annotations.
  Corpus corpus;
  CorefAnnotation gold;
  // Mention -> entity index (global across the corpus) and its type label.
  std::map<Mention, std::size_t> entity_of;
  std::vector<std::string> entity_type;
  // Raw spurious links sampled per system, before chain re-formation, and the
  // number of spurious candidates per story.
  std::map<std::string, LinkSet> spurious_a;
  std::map<std::string, LinkSet> spurious_b;
  std::map<std::string, std::size_t> spurious_candidates;
};

// Built-in hierarchy of up to 20 types (parents listed before children) with
// procedurally generated cue words, names and nouns. Independent of the corpus
// seed so that separately generated corpora share one vocabulary.
std::vector<TypeSpec> default_inventory(std::size_t n_types = 20);

// Deterministic in config.seed. Throws std::invalid_argument on a bad config,
// including spurious noise with fewer than 2 entities per story.
SynthCorpus generate(const SynthConfig& config);

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig defaults = {});
nlohmann::json to_json(const SynthConfig& config);

}  // namespace corefcl

#endif  // COREFCL_SYNTH_HPP_
