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

#include "corefcl/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace corefcl {

using nlohmann::json;

ExperimentConfig ExperimentConfig::desk_scale(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synth.sys_a = {0.1, 0.1};
  c.synth.sys_b = {0.1, 0.1};
  c.encoder.dim = 32;
  c.encoder.layers = 2;
  c.encoder.heads = 4;
  c.encoder.ff_dim = 128;
  c.encoder.max_len = 64;
  c.pretrain.epochs = 10;
  c.pretrain.optimizer.lr = 1e-3;
  c.typing.epochs = 60;
  return c;
}

void ExperimentConfig::validate() const {
  synth.validate();
  pretrain.validate();
  static const std::set<std::string> kSources{"sysA", "sysB", "consensus", "gold"};
  if (!kSources.count(coref_source)) throw std::invalid_argument("unknown coref_source '" + coref_source + "'");
  if (typing_train_stories == 0 || typing_test_stories == 0)
    throw std::invalid_argument("typing corpora need at least one story");
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig c) {
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"), c.synth);
  c.pretrain_val_stories = j.value("pretrain_val_stories", c.pretrain_val_stories);
  c.typing_train_stories = j.value("typing_train_stories", c.typing_train_stories);
  c.typing_val_stories = j.value("typing_val_stories", c.typing_val_stories);
  c.typing_test_stories = j.value("typing_test_stories", c.typing_test_stories);
  c.min_freq = j.value("min_freq", c.min_freq);
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"), c.encoder);
  if (j.contains("pretrain")) c.pretrain = pretrain_config_from_json(j.at("pretrain"), c.pretrain);
  if (j.contains("typing")) c.typing = typing_config_from_json(j.at("typing"), c.typing);
  c.coref_source = j.value("coref_source", c.coref_source);
  if (j.contains("match")) c.match = parse_match_mode(j.at("match"));
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const ExperimentConfig& c) {
  return json{{"synth", to_json(c.synth)},
              {"pretrain_val_stories", c.pretrain_val_stories},
              {"typing_train_stories", c.typing_train_stories},
              {"typing_val_stories", c.typing_val_stories},
              {"typing_test_stories", c.typing_test_stories},
              {"min_freq", c.min_freq},
              {"encoder", to_json(c.encoder)},
              {"pretrain", to_json(c.pretrain)},
              {"typing", to_json(c.typing)},
              {"coref_source", c.coref_source},
              {"match", c.match == MatchMode::kExact ? "exact" : "head"},
              {"seed", c.seed}};
}

namespace {

SynthCorpus make_corpus(const ExperimentConfig& c, const char* purpose, std::size_t n_stories) {
  SynthConfig s = c.synth;
  s.n_stories = n_stories;
  s.seed = derive_seed(c.seed, std::string("experiment/") + purpose);
  s.story_prefix = purpose;
  return generate(s);
}

}  // namespace

ExperimentData prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentData d{make_corpus(config, "pretrain", config.synth.n_stories),
                   make_corpus(config, "pretrain_val", config.pretrain_val_stories),
                   make_corpus(config, "typing_train", config.typing_train_stories),
                   make_corpus(config, "typing_val", config.typing_val_stories),
                   make_corpus(config, "typing_test", config.typing_test_stories),
                   {},
                   {}};
  d.vocab = Vocab::build(d.pretrain.corpus, config.min_freq);
  for (const auto& t : config.synth.resolved_inventory())
    for (const auto& l : label_prefixes(t.label)) d.labels.push_back(l);
  std::sort(d.labels.begin(), d.labels.end());
  d.labels.erase(std::unique(d.labels.begin(), d.labels.end()), d.labels.end());
  return d;
}

CorefAnnotation coref_source(const SynthCorpus& corpus, const std::string& source, MatchMode match) {
  if (source == "gold") return corpus.gold;
  if (source == "sysA" || source == "sysB") {
    const auto* a = corpus.corpus.find_coref(source);
    if (!a) throw std::invalid_argument("corpus has no '" + source + "' annotation");
    return *a;
  }
  if (source == "consensus")
    return consensus(*corpus.corpus.find_coref("sysA"), *corpus.corpus.find_coref("sysB"), match);
  throw std::invalid_argument("unknown coref_source '" + source + "'");
}

Encoder initial_encoder(const ExperimentConfig& config, const ExperimentData& data) {
  EncoderConfig ec = config.encoder;
  ec.vocab_size = data.vocab.size();
  ec.seed = derive_seed(config.seed, "experiment/encoder");
  return Encoder(ec, data.vocab);
}

Encoder pretrain_encoder(const ExperimentConfig& config, const ExperimentData& data, const EpochCallback& on_epoch) {
  const auto train_chains = coref_source(data.pretrain, config.coref_source, config.match);
  const auto val_chains = coref_source(data.pretrain_val, config.coref_source, config.match);
  PretrainConfig pc = config.pretrain;
  pc.seed = derive_seed(config.seed, "experiment/pretrain");
  const PretrainData train{&data.pretrain.corpus, &train_chains};
  const PretrainData val{&data.pretrain_val.corpus, &val_chains};
  return pretrain(train, config.pretrain_val_stories ? &val : nullptr, initial_encoder(config, data), pc, on_epoch)
      .best.encoder;
}

ProbeResult probe(const ExperimentConfig& config, const ExperimentData& data, const Encoder& encoder) {
  const auto strategy = config.typing.strategy;
  const std::size_t max_len = encoder.config().max_len;
  const auto train = make_typing_dataset(data.typing_train.corpus, data.vocab, strategy, max_len);
  const auto val = make_typing_dataset(data.typing_val.corpus, data.vocab, strategy, max_len);
  const auto test = make_typing_dataset(data.typing_test.corpus, data.vocab, strategy, max_len);
  TypingTrainConfig tc = config.typing;
  tc.seed = derive_seed(config.seed, "experiment/typing");
  auto r = train_typing(train, val.size() ? &val : nullptr, encoder, tc, data.labels);
  const auto preds = predict_dataset(r.model, r.encoder, test);
  std::vector<LabelSet> p;
  p.reserve(preds.size());
  for (const auto& x : preds) p.push_back(x.labels);
  return {typing_report(p, test.labels), std::move(r.model), r.best_epoch};
}

const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> kAxes{"span_strategy", "negative_scope", "mask_policy", "coref_source"};
  return kAxes;
}

const std::vector<std::string>& axis_values(const std::string& axis) {
  static const std::map<std::string, std::vector<std::string>> kValues{
      {"span_strategy",
       {"head_word", "special_tokens_head", "special_tokens_full_span", "mask_token", "prompt", "masked_triple"}},
      {"negative_scope", {"different_stories", "same_story"}},
      {"mask_policy", {"head", "full_span", "none"}},
      {"coref_source", {"sysA", "sysB", "consensus"}}};
  auto it = kValues.find(axis);
  if (it == kValues.end()) throw std::invalid_argument("unknown ablation axis '" + axis + "'");
  return it->second;
}

namespace {

void apply(ExperimentConfig& c, const std::string& axis, const std::string& value) {
  if (axis == "span_strategy")
    c.typing.strategy = parse_span_strategy(value);
  else if (axis == "negative_scope")
    c.pretrain.negative_scope = parse_negative_scope(value);
  else if (axis == "mask_policy")
    c.pretrain.mask_policy = parse_mask_policy(value);
  else if (axis == "coref_source")
    c.coref_source = value;
  else
    throw std::invalid_argument("unknown ablation axis '" + axis + "'");
}

}  // namespace

std::vector<AblationCell> ablate(const ExperimentConfig& base, const std::vector<std::string>& axes,
                                 const std::function<void(const AblationCell&)>& on_cell) {
  std::set<std::string> seen;
  for (const auto& a : axes) {
    axis_values(a);
    if (!seen.insert(a).second) throw std::invalid_argument("ablation axis '" + a + "' given twice");
  }
  std::vector<std::map<std::string, std::string>> grid{{}};
  for (const auto& a : axes) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& cell : grid) {
      for (const auto& v : axis_values(a)) {
        auto c = cell;
        c[a] = v;
        next.push_back(std::move(c));
      }
    }
    grid = std::move(next);
  }

  const ExperimentData data = prepare_experiment(base);
  std::map<std::string, Encoder> cache;
  std::vector<AblationCell> out;
  for (const auto& settings : grid) {
    ExperimentConfig c = base;
    for (const auto& [a, v] : settings) apply(c, a, v);
    const std::string key = to_json(c.pretrain).dump() + "|" + c.coref_source;
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, pretrain_encoder(c, data)).first;
    AblationCell cell{settings, probe(c, data, it->second).report};
    if (on_cell) on_cell(cell);
    out.push_back(std::move(cell));
  }
  return out;
}

json ablation_to_json(const std::vector<AblationCell>& cells) {
  json rows = json::array();
  for (const auto& c : cells) rows.push_back({{"settings", c.settings}, {"report", c.report.to_json()}});
  return rows;
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  std::vector<std::string> axes;
  if (!cells.empty())
    for (const auto& [a, v] : cells.front().settings) axes.push_back(a);
  char buf[128];
  for (const auto& a : axes) {
    std::snprintf(buf, sizeof buf, "%-26s ", a.c_str());
    os << buf;
  }
  os << "  micro_f1   macro_f1\n";
  for (const auto& c : cells) {
    for (const auto& a : axes) {
      std::snprintf(buf, sizeof buf, "%-26s ", c.settings.at(a).c_str());
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%10.4f %10.4f\n", c.report.micro_f1, c.report.macro_f1);
    os << buf;
  }
  return os.str();
}

}  // namespace corefcl
