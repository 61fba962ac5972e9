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

#ifndef COREFCL_PIPELINE_HPP_
#define COREFCL_PIPELINE_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "corefcl/consensus.hpp"
#include "corefcl/encoder.hpp"
#include "corefcl/eval.hpp"
#include "corefcl/pretrain.hpp"
#include "corefcl/synth.hpp"
#include "corefcl/typing.hpp"
#include "json.hpp"

namespace corefcl {

// A complete synthetic experiment: a pre-training corpus with two noisy
// coreference systems, a held-out validation corpus for pre-training, and
// three typing corpora (train / validation / test) from the same type
// inventory. Every seed below is derived from `seed`.
struct ExperimentConfig {
  SynthConfig synth;
  std::size_t pretrain_val_stories = 40;
  std::size_t typing_train_stories = 60;
  std::size_t typing_val_stories = 20;
  std::size_t typing_test_stories = 60;
  std::size_t min_freq = 2;
  EncoderConfig encoder;
  PretrainConfig pretrain;
  TypingTrainConfig typing;
  std::string coref_source = "consensus";  // sysA | sysB | consensus | gold
  MatchMode match = MatchMode::kExact;
  std::uint64_t seed = 1;

  // The desk-scale defaults: 10% miss and spurious noise per system, a
  // d=32 two-layer encoder and 10 pre-training epochs.
  static ExperimentConfig desk_scale(std::uint64_t seed);
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig defaults);
nlohmann::json to_json(const ExperimentConfig& c);

struct ExperimentData {
  SynthCorpus pretrain;
  SynthCorpus pretrain_val;
  SynthCorpus typing_train;
  SynthCorpus typing_val;
  SynthCorpus typing_test;
  Vocab vocab;
  std::vector<std::string> labels;  // sorted label inventory
};

ExperimentData prepare_experiment(const ExperimentConfig& config);

// The coreference chains named by `source` for a synthetic corpus.
CorefAnnotation coref_source(const SynthCorpus& corpus, const std::string& source, MatchMode match);

Encoder initial_encoder(const ExperimentConfig& config, const ExperimentData& data);

// Pre-trains the initial encoder on the configured chains and returns the
// best-validation encoder.
Encoder pretrain_encoder(const ExperimentConfig& config, const ExperimentData& data,
                         const EpochCallback& on_epoch = {});

struct ProbeResult {
  EvalReport report;
  TypingModel model;
  std::size_t best_epoch = 0;
};

// Trains the typing head on typing_train (selecting on typing_val) over
// `encoder` and evaluates on typing_test.
ProbeResult probe(const ExperimentConfig& config, const ExperimentData& data, const Encoder& encoder);

struct AblationCell {
  std::map<std::string, std::string> settings;  // axis -> value
  EvalReport report;
};

const std::vector<std::string>& ablation_axes();
const std::vector<std::string>& axis_values(const std::string& axis);

// Full pipeline per cell of the grid spanned by `axes` (all other settings
// from `base`). Pre-training runs are shared between cells that differ only
// in the span strategy. Throws std::invalid_argument on an unknown axis.
std::vector<AblationCell> ablate(const ExperimentConfig& base, const std::vector<std::string>& axes,
                                 const std::function<void(const AblationCell&)>& on_cell = {});

nlohmann::json ablation_to_json(const std::vector<AblationCell>& cells);
std::string ablation_table(const std::vector<AblationCell>& cells);

}  // namespace corefcl

#endif  // COREFCL_PIPELINE_HPP_
