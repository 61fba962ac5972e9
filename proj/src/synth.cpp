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

#include "corefcl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "corefcl/rng.hpp"

namespace corefcl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInventorySeed = 0x5eed'1c0f'2024ULL;

constexpr std::array<const char*, 20> kBuiltinLabels = {
    "/person",
    "/organization",
    "/location",
    "/other",
    "/person/artist",
    "/person/athlete",
    "/person/politician",
    "/organization/company",
    "/organization/government",
    "/organization/sports_team",
    "/location/city",
    "/location/country",
    "/location/structure",
    "/other/currency",
    "/other/event",
    "/other/product",
    "/person/artist/author",
    "/person/artist/musician",
    "/organization/company/broadcast",
    "/location/structure/airport",
};

constexpr std::array<const char*, 40> kFiller = {
    "today",   "also",     "reportedly", "meanwhile", "however", "still",   "later",
    "earlier", "again",    "indeed",     "perhaps",   "quietly", "briefly", "once",
    "soon",    "finally",  "locally",    "widely",    "often",   "rarely",  "this",
    "week",    "year",     "morning",    "evening",   "sources", "say",     "officials",
    "noted",   "according", "to",        "many",      "observers", "while", "some",
    "critics", "remain",   "unclear",    "overall",   "anyway"};

constexpr std::size_t kNamesPerType = 12;

class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed) {
    for (const char* w : kFiller) used_.insert(w);
    for (const char* w : {"the", "and", "was", "said", "after", "again", "report", "he", "she", "it",
                          "type", "of", "is", "hasType"})
      used_.insert(w);
  }

  std::string word(std::size_t min_syllables, std::size_t max_syllables) {
    static const std::string kCons = "bdfgklmnprstvz";
    static const std::string kVow = "aeiou";
    for (;;) {
      const std::size_t n = min_syllables + rng_.below(max_syllables - min_syllables + 1);
      std::string w;
      for (std::size_t i = 0; i < n; ++i) {
        w += kCons[rng_.below(kCons.size())];
        w += kVow[rng_.below(kVow.size())];
      }
      if (rng_.bernoulli(0.5)) w += kCons[rng_.below(kCons.size())];
      if (used_.insert(w).second) return w;
    }
  }

  std::string name() {
    std::string w = word(2, 3);
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

std::string parent_label(const std::string& label) {
  const auto pos = label.rfind('/');
  return pos == 0 || pos == std::string::npos ? std::string() : label.substr(0, pos);
}

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0))
    throw std::invalid_argument(std::string(what) + " must lie in [0,1], got " + std::to_string(r));
}

}  // namespace

std::vector<TypeSpec> default_inventory(std::size_t n_types) {
  if (n_types == 0 || n_types > kBuiltinLabels.size())
    throw std::invalid_argument("default inventory supports 1.." +
                                std::to_string(kBuiltinLabels.size()) + " types");
  WordMaker words(kInventorySeed);
  // Cue words are generated for all built-in types so that the inventory of
  // the first n types is a prefix of the full one.
  std::map<std::string, std::array<std::string, 4>> cues;
  std::vector<TypeSpec> all;
  for (const char* label : kBuiltinLabels) {
    TypeSpec t;
    t.label = label;
    auto& c = cues[t.label];
    for (auto& w : c) w = words.word(2, 3);
    t.noun = words.word(2, 3);
    for (std::size_t i = 0; i < kNamesPerType; ++i) {
      std::vector<std::string> name{words.name()};
      if (words.rng().bernoulli(0.3)) name.push_back(words.name());
      t.names.push_back(std::move(name));
    }
    const std::string parent = parent_label(t.label);
    const std::string& shared = parent.empty() ? c[0] : cues.at(parent)[0];
    t.templates = {
        {c[0], "@", c[1], "the", c[2]},
        {"the", "report", "said", shared, "@", c[3], "again"},
        {"after", "the", c[2], ",", "@", c[1]},
    };
    t.pronouns = t.label.rfind("/person", 0) == 0 ? std::vector<std::string>{"he", "she"}
                                                  : std::vector<std::string>{"it"};
    all.push_back(std::move(t));
  }
  all.resize(n_types);
  return all;
}

void SynthConfig::validate() const {
  check_rate(pronoun_fraction, "pronoun_fraction");
  check_rate(nominal_fraction, "nominal_fraction");
  check_rate(pair_sentence_prob, "pair_sentence_prob");
  check_rate(sys_a.miss_rate, "sys_a.miss_rate");
  check_rate(sys_a.spurious_rate, "sys_a.spurious_rate");
  check_rate(sys_b.miss_rate, "sys_b.miss_rate");
  check_rate(sys_b.spurious_rate, "sys_b.spurious_rate");
  if (entities_per_story == 0 || mentions_per_entity == 0)
    throw std::invalid_argument("entities_per_story and mentions_per_entity must be >= 1");
  if (entities_per_story < 2 && (sys_a.spurious_rate > 0.0 || sys_b.spurious_rate > 0.0))
    throw std::invalid_argument(
        "spurious coreference noise needs entities_per_story >= 2 (no spurious partner available)");
  const auto inv = resolved_inventory();
  if (inv.empty()) throw std::invalid_argument("type inventory is empty");
  for (const auto& t : inv) {
    if (label_depth(t.label) == 0) throw std::invalid_argument("bad type label '" + t.label + "'");
    std::set<std::vector<std::string>> distinct(t.templates.begin(), t.templates.end());
    if (distinct.size() < 2)
      throw std::invalid_argument("type '" + t.label + "' needs >= 2 distinct context templates");
    for (const auto& tpl : t.templates) {
      if (std::count(tpl.begin(), tpl.end(), "@") != 1)
        throw std::invalid_argument("template of '" + t.label + "' must contain exactly one '@'");
    }
    if (t.names.empty() || t.pronouns.empty() || t.noun.empty())
      throw std::invalid_argument("type '" + t.label + "' needs names, pronouns and a noun");
  }
}

std::vector<TypeSpec> SynthConfig::resolved_inventory() const {
  return type_inventory.empty() ? default_inventory(n_types) : type_inventory;
}

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  const auto inventory = config.resolved_inventory();
  Rng rng(derive_seed(config.seed, "synth/text"));
  Rng rng_a(derive_seed(config.seed, "synth/sysA"));
  Rng rng_b(derive_seed(config.seed, "synth/sysB"));

  SynthCorpus out;
  out.gold.system = "gold";
  CorefAnnotation sys_a{"sysA", {}}, sys_b{"sysB", {}};

  const std::size_t E = config.entities_per_story, M = config.mentions_per_entity;
  enum class Form { kName, kNominal, kPronoun };

  for (std::size_t s = 0; s < config.n_stories; ++s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", s);
    const std::string story_id = config.story_prefix + "-" + buf;

    struct Entity {
      std::size_t type;
      std::vector<std::string> name;
      std::string pronoun;
    };
    std::vector<Entity> entities;
    std::map<std::size_t, std::set<std::size_t>> names_taken;
    for (std::size_t e = 0; e < E; ++e) {
      Entity ent;
      ent.type = rng.below(inventory.size());
      const auto& spec = inventory[ent.type];
      auto& taken = names_taken[ent.type];
      std::size_t pick = rng.below(spec.names.size());
      if (taken.size() < spec.names.size()) {
        while (taken.count(pick)) pick = (pick + 1) % spec.names.size();
      }
      taken.insert(pick);
      ent.name = spec.names[pick];
      ent.pronoun = spec.pronouns[rng.below(spec.pronouns.size())];
      entities.push_back(std::move(ent));
      out.entity_type.push_back(spec.label);
    }

    std::vector<std::size_t> order;
    for (std::size_t e = 0; e < E; ++e)
      for (std::size_t k = 0; k < M; ++k) order.push_back(e);
    rng.shuffle(std::span(order));

    std::vector<Form> forms(order.size(), Form::kName);
    std::vector<std::size_t> later;
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < order.size(); ++i)
      if (!seen.insert(order[i]).second) later.push_back(i);
    rng.shuffle(std::span(later));
    const auto n_pron = std::min<std::size_t>(
        later.size(), static_cast<std::size_t>(std::llround(config.pronoun_fraction * order.size())));
    for (std::size_t i = 0; i < later.size(); ++i) {
      if (i < n_pron)
        forms[later[i]] = Form::kPronoun;
      else if (rng.bernoulli(config.nominal_fraction))
        forms[later[i]] = Form::kNominal;
    }

    Story story{story_id, {}};
    std::vector<std::vector<Mention>> entity_mentions(E);
    std::size_t i = 0;
    while (i < order.size()) {
      Sentence sent;
      std::vector<std::pair<std::size_t, Mention>> placed;
      auto add_filler = [&] {
        const std::size_t n = rng.below(config.max_filler + 1);
        for (std::size_t f = 0; f < n; ++f) sent.push_back(kFiller[rng.below(kFiller.size())]);
      };
      auto add_clause = [&](std::size_t idx) {
        const auto& ent = entities[order[idx]];
        const auto& spec = inventory[ent.type];
        const auto& tpl = spec.templates[rng.below(spec.templates.size())];
        for (const auto& tok : tpl) {
          if (tok != "@") {
            sent.push_back(tok);
            continue;
          }
          Mention m;
          m.story = story_id;
          m.sent = story.sentences.size();
          m.start = sent.size();
          switch (forms[idx]) {
            case Form::kName:
              sent.insert(sent.end(), ent.name.begin(), ent.name.end());
              m.head = sent.size() - 1;
              break;
            case Form::kNominal:
              sent.push_back("the");
              sent.push_back(spec.noun);
              m.head = sent.size() - 1;
              break;
            case Form::kPronoun:
              sent.push_back(ent.pronoun);
              m.head = sent.size() - 1;
              break;
          }
          m.end = sent.size();
          placed.emplace_back(order[idx], m);
        }
      };
      add_filler();
      add_clause(i++);
      if (i < order.size() && rng.bernoulli(config.pair_sentence_prob)) {
        sent.push_back("and");
        add_clause(i++);
      }
      add_filler();
      sent.push_back(".");
      story.sentences.push_back(std::move(sent));
      for (auto& [e, m] : placed) {
        entity_mentions[e].push_back(m);
        out.entity_of.emplace(m, s * E + e);
        TypedMention tm;
        tm.mention = m;
        tm.labels = label_prefixes(inventory[entities[e].type].label);
        out.corpus.typed_mentions().push_back(std::move(tm));
      }
    }
    out.corpus.add_story(std::move(story));

    std::vector<Chain> gold_chains;
    for (auto& ms : entity_mentions) {
      std::sort(ms.begin(), ms.end());
      if (ms.size() >= 2) gold_chains.push_back(ms);
    }
    std::sort(gold_chains.begin(), gold_chains.end(),
              [](const Chain& a, const Chain& b) { return a.front() < b.front(); });
    const LinkSet gold_links = chains_to_links(story_id, gold_chains);
    if (!gold_chains.empty()) out.gold.chains.emplace(story_id, gold_chains);

    // Spurious candidates: adjacent mentions (document order) of different
    // entities, mimicking nearest-antecedent errors.
    std::vector<Mention> doc_order;
    for (const auto& ms : entity_mentions) doc_order.insert(doc_order.end(), ms.begin(), ms.end());
    std::sort(doc_order.begin(), doc_order.end());
    std::vector<Link> candidates;
    for (std::size_t k = 0; k + 1 < doc_order.size(); ++k) {
      if (out.entity_of.at(doc_order[k]) != out.entity_of.at(doc_order[k + 1]))
        candidates.push_back(Link::make(doc_order[k], doc_order[k + 1]));
    }
    out.spurious_candidates[story_id] = candidates.size();

    auto noisy = [&](const CorefNoise& noise, Rng& r, CorefAnnotation& ann,
                     std::map<std::string, LinkSet>& spurious) {
      LinkSet links{story_id, {}};
      for (const auto& l : gold_links.links)
        if (!(r.uniform() < noise.miss_rate)) links.links.insert(l);
      LinkSet extra{story_id, {}};
      for (const auto& l : candidates)
        if (r.uniform() < noise.spurious_rate) extra.links.insert(l);
      links.links.insert(extra.links.begin(), extra.links.end());
      spurious.emplace(story_id, std::move(extra));
      auto chains = links_to_chains(links);
      if (!chains.empty()) ann.chains.emplace(story_id, std::move(chains));
    };
    noisy(config.sys_a, rng_a, sys_a, out.spurious_a);
    noisy(config.sys_b, rng_b, sys_b, out.spurious_b);
  }
  out.corpus.coref().push_back(std::move(sys_a));
  out.corpus.coref().push_back(std::move(sys_b));
  return out;
}

namespace {

CorefNoise noise_from_json(const json& j) {
  CorefNoise n;
  n.miss_rate = j.value("miss_rate", 0.0);
  n.spurious_rate = j.value("spurious_rate", 0.0);
  return n;
}

json noise_to_json(const CorefNoise& n) {
  return json{{"miss_rate", n.miss_rate}, {"spurious_rate", n.spurious_rate}};
}

}  // namespace

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
  c.n_stories = j.value("n_stories", c.n_stories);
  c.entities_per_story = j.value("entities_per_story", c.entities_per_story);
  c.mentions_per_entity = j.value("mentions_per_entity", c.mentions_per_entity);
  c.n_types = j.value("n_types", c.n_types);
  c.pronoun_fraction = j.value("pronoun_fraction", c.pronoun_fraction);
  c.nominal_fraction = j.value("nominal_fraction", c.nominal_fraction);
  c.pair_sentence_prob = j.value("pair_sentence_prob", c.pair_sentence_prob);
  c.max_filler = j.value("max_filler", c.max_filler);
  c.seed = j.value("seed", c.seed);
  c.story_prefix = j.value("story_prefix", c.story_prefix);
  if (j.contains("sys_a")) c.sys_a = noise_from_json(j.at("sys_a"));
  if (j.contains("sys_b")) c.sys_b = noise_from_json(j.at("sys_b"));
  if (j.contains("type_inventory")) {
    c.type_inventory.clear();
    for (const auto& jt : j.at("type_inventory")) {
      TypeSpec t;
      t.label = jt.at("label").get<std::string>();
      t.templates = jt.at("templates").get<std::vector<std::vector<std::string>>>();
      t.names = jt.at("names").get<std::vector<std::vector<std::string>>>();
      t.noun = jt.at("noun").get<std::string>();
      t.pronouns = jt.value("pronouns", std::vector<std::string>{"it"});
      c.type_inventory.push_back(std::move(t));
    }
  }
  return c;
}

json to_json(const SynthConfig& c) {
  json j{{"n_stories", c.n_stories},
         {"entities_per_story", c.entities_per_story},
         {"mentions_per_entity", c.mentions_per_entity},
         {"n_types", c.n_types},
         {"pronoun_fraction", c.pronoun_fraction},
         {"nominal_fraction", c.nominal_fraction},
         {"pair_sentence_prob", c.pair_sentence_prob},
         {"max_filler", c.max_filler},
         {"sys_a", noise_to_json(c.sys_a)},
         {"sys_b", noise_to_json(c.sys_b)},
         {"seed", c.seed},
         {"story_prefix", c.story_prefix}};
  if (!c.type_inventory.empty()) {
    json inv = json::array();
    for (const auto& t : c.type_inventory)
      inv.push_back(json{{"label", t.label},
                         {"templates", t.templates},
                         {"names", t.names},
                         {"noun", t.noun},
                         {"pronouns", t.pronouns}});
    j["type_inventory"] = std::move(inv);
  }
  return j;
}

}  // namespace corefcl
