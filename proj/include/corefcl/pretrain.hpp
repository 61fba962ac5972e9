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

#ifndef COREFCL_PRETRAIN_HPP_
#define COREFCL_PRETRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "corefcl/corpus.hpp"
#include "corefcl/encoder.hpp"
#include "corefcl/optim.hpp"
#include "corefcl/rng.hpp"
#include "json.hpp"

namespace corefcl {

enum class MaskPolicy { kNone, kHead, kFullSpan };
enum class NegativeScope { kDifferentStories, kSameStory };
enum class TokenScope { kAllSpanTokens, kHeadOnly };
// Which extra term joins the negatives in the InfoNCE partition function:
// the positive t' (standard) or the anchor t itself (cos = 1).
enum class DenominatorMode { kIncludePositive, kLiteralSelf };
enum class Objective { kEntityAndMlm, kMlmOnly, kEntityOnly };

std::string to_string(MaskPolicy v);
std::string to_string(NegativeScope v);
std::string to_string(TokenScope v);
std::string to_string(DenominatorMode v);
std::string to_string(Objective v);
MaskPolicy parse_mask_policy(const std::string& s);
NegativeScope parse_negative_scope(const std::string& s);
TokenScope parse_token_scope(const std::string& s);
DenominatorMode parse_denominator_mode(const std::string& s);
Objective parse_objective(const std::string& s);

struct PretrainConfig {
  std::size_t stories_per_batch = 4;
  double temperature = 0.05;
  double head_mask_prob = 0.15;
  MaskPolicy mask_policy = MaskPolicy::kHead;
  NegativeScope negative_scope = NegativeScope::kDifferentStories;
  TokenScope token_scope = TokenScope::kAllSpanTokens;
  double mlm_mask_prob = 0.15;
  std::size_t epochs = 25;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
  DenominatorMode denominator = DenominatorMode::kIncludePositive;
  Objective objective = Objective::kEntityAndMlm;

  void validate() const;
};

PretrainConfig pretrain_config_from_json(const nlohmann::json& j, PretrainConfig defaults = {});
nlohmann::json to_json(const PretrainConfig& c);

// One story with the chains used as supervision.
struct StoryChains {
  const Story* story = nullptr;
  std::vector<Chain> chains;
};

// Per-token positive sets C_t and negative pools, indexed like the token
// list. Only tokens flagged as anchors open InfoNCE terms.
struct ContrastiveSet {
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;
  std::vector<std::uint8_t> anchor;

  std::size_t size() const { return positives.size(); }
};

struct ContrastiveToken {
  std::size_t row = 0;    // row of the encoder output
  std::size_t story = 0;  // story index within the batch
  std::size_t chain = 0;  // chain index within the batch
};

struct PretrainBatch {
  EncoderBatch input;
  std::vector<ContrastiveToken> tokens;  // T = T_1 u ... u T_k
  ContrastiveSet contrast;
  std::vector<std::size_t> mlm_rows;
  std::vector<int> mlm_targets;
  std::size_t mentions = 0;
  std::size_t masked_heads = 0;
  std::size_t skipped_sentences = 0;  // longer than max_len
};

// Sequences are [BOS] sentence [EOS] for every sentence holding a chain
// mention. Throws std::invalid_argument("no positive pairs") when no story
// has a chain.
PretrainBatch build_batch(std::span<const StoryChains> stories, const Vocab& vocab,
                          const PretrainConfig& config, Rng& rng, std::size_t max_len);

// Throws std::logic_error if a different_stories batch pairs two tokens of
// one story as negatives.
void verify_negative_scope(const PretrainBatch& batch, NegativeScope scope);

struct InfoNceResult {
  double loss = 0.0;
  Matrix grad;  // d(loss)/d(embeddings)
  std::size_t terms = 0;
  std::size_t negatives = 0;  // summed pool sizes over anchors
};

// Mean over (t, t') terms of
//   -log( exp(cos(t,t')/tau) / sum_{t'' in D} exp(cos(t,t'')/tau) )
// with D = negatives(t) u {t'} (kIncludePositive) or negatives(t) u {t}
// (kLiteralSelf). Errors: tau <= 0, zero-norm embeddings, or an anchor whose
// denominator would hold neither negatives nor the positive.
InfoNceResult info_nce(const Matrix& embeddings, const ContrastiveSet& set, double tau,
                       DenominatorMode mode = DenominatorMode::kIncludePositive);

struct MlmResult {
  double loss = 0.0;
  Matrix grad;  // d(loss)/d(logits)
  std::size_t count = 0;
};

// Mean cross-entropy over the given rows. Zero rows -> loss 0.
MlmResult mlm_loss(const Matrix& logits, std::span<const int> targets);

struct LossBreakdown {
  double entity = 0.0;
  double mlm = 0.0;
  double total = 0.0;
  std::size_t positive_pairs = 0;
  std::size_t negative_pool = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train;
  double val_loss = 0.0;
};

nlohmann::json to_json(const EpochLog& log);

// Loss of one batch without updating anything.
LossBreakdown evaluate_batch(const Encoder& encoder, const PretrainBatch& batch, const PretrainConfig& config);

struct PretrainData {
  const Corpus* corpus = nullptr;
  const CorefAnnotation* chains = nullptr;
};

struct PretrainResult {
  Checkpoint best;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&, const Checkpoint&)>;

// Trains `encoder` for config.epochs epochs and returns the checkpoint with
// the lowest validation loss (the last one when no validation data is given).
PretrainResult pretrain(const PretrainData& train, const PretrainData* validation, Encoder encoder,
                        const PretrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace corefcl

#endif  // COREFCL_PRETRAIN_HPP_
