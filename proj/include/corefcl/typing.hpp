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

#ifndef COREFCL_TYPING_HPP_
#define COREFCL_TYPING_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "corefcl/corpus.hpp"
#include "corefcl/encoder.hpp"
#include "corefcl/optim.hpp"
#include "json.hpp"

namespace corefcl {

enum class SpanStrategy {
  kHeadWord,
  kSpecialTokensHead,
  kSpecialTokensFullSpan,
  kMaskToken,
  kPrompt,
  kMaskedTriple,
};

std::string to_string(SpanStrategy s);
SpanStrategy parse_span_strategy(const std::string& s);
const std::vector<SpanStrategy>& all_span_strategies();

// Encoder input for one mention and the position whose output embedding
// represents it.
struct MentionInput {
  std::vector<int> ids;
  std::size_t position = 0;
};

// Throws std::length_error naming the strategy when the input would exceed
// max_len, and std::invalid_argument on a mention outside the sentence.
MentionInput mention_input(const Vocab& vocab, const Sentence& sentence, const Mention& mention,
                           SpanStrategy strategy, std::size_t max_len);

// Output embeddings at each input's position, one row per input. Inputs are
// encoded in chunks of `chunk` sequences.
Matrix mention_embeddings(const Encoder& encoder, std::span<const MentionInput> inputs, std::size_t chunk = 64);

std::vector<double> mention_embedding(const Encoder& encoder, const Sentence& sentence, const Mention& mention,
                                      SpanStrategy strategy);

struct TypingPrediction {
  Mention mention;
  std::vector<double> probabilities;  // aligned with the model's labels
  std::vector<std::string> labels;    // {t : p_t > threshold}
};

class TypingModel {
 public:
  TypingModel() = default;
  TypingModel(std::vector<std::string> labels, std::size_t dim, SpanStrategy strategy);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t dim() const { return weights_.cols(); }
  SpanStrategy strategy() const { return strategy_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  // Row t holds a_t; bias(0, t) holds b_t.
  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }
  Matrix& bias() { return bias_; }
  const Matrix& bias() const { return bias_; }

  std::vector<double> probabilities(std::span<const double> embedding) const;
  TypingPrediction predict(const Mention& mention, std::span<const double> embedding) const;

  nlohmann::json to_json() const;
  static TypingModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TypingModel load(const std::filesystem::path& path);

  friend bool operator==(const TypingModel&, const TypingModel&) = default;

 private:
  std::vector<std::string> labels_;
  Matrix weights_;
  Matrix bias_;
  SpanStrategy strategy_ = SpanStrategy::kHeadWord;
  double threshold_ = 0.5;
  bool frozen_ = true;
};

double sigmoid(double x);

// Mean binary cross-entropy over all (mention, label) pairs.
struct BceResult {
  double loss = 0.0;
  Matrix d_weights;
  Matrix d_bias;
  Matrix d_embeddings;
};

BceResult bce_loss(const TypingModel& model, const Matrix& embeddings, const Matrix& targets);

// Mentions with gold labels ready for the typing head.
struct TypingDataset {
  std::vector<Mention> mentions;
  std::vector<MentionInput> inputs;
  std::vector<std::vector<std::string>> labels;

  std::size_t size() const { return mentions.size(); }
};

// Uses every typed mention with at least one label (any source).
TypingDataset make_typing_dataset(const Corpus& corpus, const Vocab& vocab, SpanStrategy strategy,
                                  std::size_t max_len);

struct TypingTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdamWConfig optimizer{1e-2, 0.9, 0.999, 1e-8, 0.0};
  double encoder_lr = 1e-4;  // fine-tuning only
  SpanStrategy strategy = SpanStrategy::kHeadWord;
  bool frozen = true;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

TypingTrainConfig typing_config_from_json(const nlohmann::json& j, TypingTrainConfig defaults = {});
nlohmann::json to_json(const TypingTrainConfig& c);

struct TypingEpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_micro_f1 = 0.0;
  double val_macro_f1 = 0.0;
};

struct TypingTrainResult {
  TypingModel model;
  Encoder encoder;  // fine-tuned copy; equals the input when frozen
  std::size_t best_epoch = 0;
  std::vector<TypingEpochLog> log;
};

// Label inventory: `inventory` when non-empty, otherwise the sorted union of
// training labels. Throws std::invalid_argument on an empty dataset or a
// label outside the inventory. Best epoch = highest validation micro-F1
// (training micro-F1 without validation data).
TypingTrainResult train_typing(const TypingDataset& train, const TypingDataset* validation, const Encoder& encoder,
                               const TypingTrainConfig& config, std::vector<std::string> inventory = {});

std::vector<TypingPrediction> predict_dataset(const TypingModel& model, const Encoder& encoder,
                                              const TypingDataset& data);

}  // namespace corefcl

#endif  // COREFCL_TYPING_HPP_
