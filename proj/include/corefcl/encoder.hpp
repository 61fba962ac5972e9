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

#ifndef COREFCL_ENCODER_HPP_
#define COREFCL_ENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corefcl/tensor.hpp"
#include "corefcl/vocab.hpp"
#include "json.hpp"

namespace corefcl {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_len = 128;
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

EncoderConfig encoder_config_from_json(const nlohmann::json& j, EncoderConfig defaults = {});
nlohmann::json to_json(const EncoderConfig& c);

struct Parameter {
  std::string name;
  Matrix value;
  bool decay = false;  // AdamW weight decay applies (matrices only)
};

using Gradients = std::vector<Matrix>;

// Padded id matrix, row-major batch x seq_len.
struct EncoderBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<int> ids;

  static EncoderBatch pad(const std::vector<std::vector<int>>& sequences);
  int at(std::size_t b, std::size_t pos) const { return ids[b * seq_len + pos]; }
  std::size_t row(std::size_t b, std::size_t pos) const { return b * seq_len + pos; }
};

struct LayerCache {
  Matrix x_in, ln1_xhat, ln1_rstd, h1, q, k, v, probs, attn;
  Matrix x_mid, ln2_xhat, ln2_rstd, h2, u, g;
};

struct ForwardCache {
  EncoderBatch batch;
  std::vector<std::uint8_t> key_valid;
  std::vector<LayerCache> layers;
  Matrix x_final, lnf_xhat, lnf_rstd;
  // Final-layer token embeddings, (batch * seq_len) x dim.
  Matrix output;
};

// Pre-norm transformer encoder: token + learned position embeddings, blocks
// of (LN -> multi-head self-attention -> residual, LN -> GELU FFN ->
// residual), final LN, and an MLM head tied to the token embeddings.
// [PAD] keys are masked out of attention.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, Vocab vocab);

  const EncoderConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t parameter_count() const;

  ForwardCache forward(const EncoderBatch& batch) const;
  // rows x vocab logits for rows of final-layer embeddings.
  Matrix mlm_logits(const Matrix& embeddings) const;

  Gradients zero_gradients() const;
  // Accumulates parameter gradients for d(loss)/d(cache.output).
  void backward(const ForwardCache& cache, const Matrix& d_output, Gradients& grads) const;
  // Accumulates head gradients into `grads` and returns d(loss)/d(embeddings).
  Matrix mlm_backward(const Matrix& embeddings, const Matrix& d_logits, Gradients& grads) const;

  // Raw little-endian bytes of every parameter in declaration order.
  std::string parameter_bytes() const;

 private:
  enum : std::size_t {
    kLn1G, kLn1B, kWq, kBq, kWk, kWv, kBv, kWo, kBo,
    kLn2G, kLn2B, kW1, kB1, kW2, kB2, kPerLayer
  };
  std::size_t layer_param(std::size_t layer, std::size_t which) const { return 2 + layer * kPerLayer + which; }
  std::size_t tok_emb() const { return 0; }
  std::size_t pos_emb() const { return 1; }
  std::size_t lnf_g() const { return 2 + config_.layers * kPerLayer; }
  std::size_t lnf_b() const { return lnf_g() + 1; }
  std::size_t mlm_bias() const { return lnf_g() + 2; }
  const Matrix& p(std::size_t i) const { return params_[i].value; }

  EncoderConfig config_;
  Vocab vocab_;
  std::vector<Parameter> params_;
};

// Encoder plus training state. File layout (little-endian):
//   magic "CORECLK1", u32 version (=1)
//   u64 length + UTF-8 JSON header {config, vocab}
//   u64 step, u64 length + RNG state text
//   u64 parameter count; per parameter in declaration order:
//     u64 name length + name, u64 rows, u64 cols, rows*cols f64
struct Checkpoint {
  Encoder encoder;
  std::uint64_t step = 0;
  std::string rng_state;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

struct GradientCheckEntry {
  std::string parameter;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error used by the finite-difference checks:
// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

// Compares analytic gradients of a random linear functional of the encoder
// output and MLM logits against central differences (h = 1e-5) for every
// parameter element. Passes when max_rel_error < tolerance.
GradientCheckReport gradient_check(const EncoderConfig& config, double tolerance);

}  // namespace corefcl

#endif  // COREFCL_ENCODER_HPP_
