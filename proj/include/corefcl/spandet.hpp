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

#ifndef COREFCL_SPANDET_HPP_
#define COREFCL_SPANDET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "corefcl/corpus.hpp"
#include "corefcl/encoder.hpp"
#include "corefcl/eval.hpp"
#include "corefcl/optim.hpp"
#include "json.hpp"

namespace corefcl {

// Tag 0 is always OUTSIDE; entity types follow in the given order.
class TagSet {
 public:
  static constexpr std::size_t kOutside = 0;
  static inline const std::string kOutsideName = "O";

  TagSet() : tags_{kOutsideName} {}
  explicit TagSet(const std::vector<std::string>& types);

  std::size_t size() const { return tags_.size(); }
  const std::string& name(std::size_t tag) const { return tags_.at(tag); }
  // Throws std::invalid_argument for an unknown type.
  std::size_t tag(const std::string& type) const;
  const std::vector<std::string>& names() const { return tags_; }

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::vector<std::string> tags_;
};

struct LabeledSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t tag = 0;

  auto operator<=>(const LabeledSpan&) const = default;
};

struct TokenTag {
  std::size_t index = 0;
  std::size_t tag = 0;

  auto operator<=>(const TokenTag&) const = default;
};

// Every in-span token with its tag plus each OUTSIDE token directly before or
// after a span. Throws std::invalid_argument on overlapping or invalid spans.
std::vector<TokenTag> training_tokens(std::size_t sentence_length, std::span<const LabeledSpan> spans);

// Maximal runs of one non-OUTSIDE tag.
std::vector<LabeledSpan> decode(std::span<const std::size_t> tags);

struct TaggerTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_sentences = 16;
  AdamWConfig optimizer{1e-2, 0.9, 0.999, 1e-8, 0.0};
  double encoder_lr = 1e-4;
  bool frozen = true;
  std::uint64_t seed = 0;
};

TaggerTrainConfig tagger_config_from_json(const nlohmann::json& j, TaggerTrainConfig defaults = {});
nlohmann::json to_json(const TaggerTrainConfig& c);

class TaggerModel {
 public:
  TaggerModel() = default;
  TaggerModel(TagSet tags, std::size_t dim);

  const TagSet& tags() const { return tags_; }
  std::size_t dim() const { return weights_.cols(); }
  Matrix& weights() { return weights_; }  // tags x dim
  const Matrix& weights() const { return weights_; }
  Matrix& bias() { return bias_; }  // 1 x tags
  const Matrix& bias() const { return bias_; }

  // Per-token logits for rows of token embeddings.
  Matrix logits(const Matrix& embeddings) const;
  std::vector<std::size_t> tag_tokens(const Matrix& embeddings) const;

  nlohmann::json to_json() const;
  static TaggerModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TaggerModel load(const std::filesystem::path& path);

  friend bool operator==(const TaggerModel&, const TaggerModel&) = default;

 private:
  TagSet tags_;
  Matrix weights_;
  Matrix bias_;
};

// Mean softmax cross-entropy over the rows; returns gradients for the head
// and for the embeddings.
struct TaggerLoss {
  double loss = 0.0;
  Matrix d_weights;
  Matrix d_bias;
  Matrix d_embeddings;
};

TaggerLoss tagger_loss(const TaggerModel& model, const Matrix& embeddings, std::span<const std::size_t> tags);

// One sentence with its gold spans.
struct SpanSentence {
  std::string story;
  std::size_t sent = 0;
  const Sentence* tokens = nullptr;
  std::vector<LabeledSpan> spans;
};

// Sentences of every story, with typed mentions turned into spans typed by
// coarse_type(labels). Overlapping mentions are rejected.
std::vector<SpanSentence> span_sentences(const Corpus& corpus, const TagSet& tags);
// The coarse types found in the corpus, sorted.
std::vector<std::string> span_types(const Corpus& corpus);

struct TaggerTrainResult {
  TaggerModel model;
  Encoder encoder;
  std::vector<double> epoch_loss;
};

// Throws std::invalid_argument when no training token survives the filter.
// Sentences longer than max_len - 2 tokens are skipped.
TaggerTrainResult train_tagger(std::span<const SpanSentence> data, const TagSet& tags, const Encoder& encoder,
                               const TaggerTrainConfig& config);

// Predicted spans for each sentence (every token is classified).
std::vector<TypedSpan> predict_spans(const TaggerModel& model, const Encoder& encoder,
                                     std::span<const SpanSentence> data);

}  // namespace corefcl

#endif  // COREFCL_SPANDET_HPP_
