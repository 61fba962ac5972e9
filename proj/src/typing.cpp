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

#include "corefcl/typing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "corefcl/eval.hpp"
#include "corefcl/rng.hpp"

namespace corefcl {

using nlohmann::json;

std::string to_string(SpanStrategy s) {
  switch (s) {
    case SpanStrategy::kHeadWord: return "head_word";
    case SpanStrategy::kSpecialTokensHead: return "special_tokens_head";
    case SpanStrategy::kSpecialTokensFullSpan: return "special_tokens_full_span";
    case SpanStrategy::kMaskToken: return "mask_token";
    case SpanStrategy::kPrompt: return "prompt";
    case SpanStrategy::kMaskedTriple: return "masked_triple";
  }
  return "?";
}

const std::vector<SpanStrategy>& all_span_strategies() {
  static const std::vector<SpanStrategy> kAll{SpanStrategy::kHeadWord,  SpanStrategy::kSpecialTokensHead,
                                              SpanStrategy::kSpecialTokensFullSpan, SpanStrategy::kMaskToken,
                                              SpanStrategy::kPrompt,    SpanStrategy::kMaskedTriple};
  return kAll;
}

SpanStrategy parse_span_strategy(const std::string& s) {
  for (auto v : all_span_strategies())
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown span strategy '" + s + "'");
}

MentionInput mention_input(const Vocab& vocab, const Sentence& sentence, const Mention& m, SpanStrategy strategy,
                           std::size_t max_len) {
  if (!(m.start < m.end && m.end <= sentence.size() && m.head >= m.start && m.head < m.end))
    throw std::invalid_argument("mention " + m.to_string() + " does not fit its sentence");
  MentionInput in;
  auto& ids = in.ids;
  ids.push_back(Vocab::kBos);
  auto append = [&](std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) ids.push_back(vocab.id(sentence[i]));
  };
  auto append_words = [&](std::initializer_list<const char*> words) {
    for (const char* w : words) ids.push_back(vocab.id(w));
  };
  switch (strategy) {
    case SpanStrategy::kHeadWord:
      append(0, sentence.size());
      in.position = m.head + 1;
      break;
    case SpanStrategy::kSpecialTokensHead:
    case SpanStrategy::kSpecialTokensFullSpan: {
      const bool head = strategy == SpanStrategy::kSpecialTokensHead;
      const std::size_t from = head ? m.head : m.start, to = head ? m.head + 1 : m.end;
      append(0, from);
      in.position = ids.size();
      ids.push_back(Vocab::kMentionOpen);
      append(from, to);
      ids.push_back(Vocab::kMentionClose);
      append(to, sentence.size());
      break;
    }
    case SpanStrategy::kMaskToken:
      append(0, m.start);
      in.position = ids.size();
      ids.push_back(Vocab::kMask);
      append(m.end, sentence.size());
      break;
    case SpanStrategy::kPrompt:
      append(0, sentence.size());
      append_words({"The", "type", "of"});
      append(m.start, m.end);
      append_words({"is"});
      in.position = ids.size();
      ids.push_back(Vocab::kMask);
      append_words({"."});
      break;
    case SpanStrategy::kMaskedTriple:
      append(0, sentence.size());
      append_words({"<"});
      append(m.start, m.end);
      append_words({",", "hasType", ","});
      in.position = ids.size();
      ids.push_back(Vocab::kMask);
      append_words({">"});
      break;
  }
  ids.push_back(Vocab::kEos);
  if (ids.size() > max_len)
    throw std::length_error(to_string(strategy) + " input for " + m.to_string() + " has " +
                            std::to_string(ids.size()) + " tokens, more than max_len " + std::to_string(max_len));
  return in;
}

namespace {

EncoderBatch batch_of(std::span<const MentionInput> inputs) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(inputs.size());
  for (const auto& in : inputs) seqs.push_back(in.ids);
  return EncoderBatch::pad(seqs);
}

}  // namespace

Matrix mention_embeddings(const Encoder& encoder, std::span<const MentionInput> inputs, std::size_t chunk) {
  const std::size_t d = encoder.config().dim;
  Matrix out(inputs.size(), d);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t b = 0; b < inputs.size(); b += chunk) {
    const auto part = inputs.subspan(b, std::min(chunk, inputs.size() - b));
    const auto batch = batch_of(part);
    const auto cache = encoder.forward(batch);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto src = cache.output.row(batch.row(i, part[i].position));
      std::copy(src.begin(), src.end(), out.row(b + i).begin());
    }
  }
  return out;
}

std::vector<double> mention_embedding(const Encoder& encoder, const Sentence& sentence, const Mention& mention,
                                      SpanStrategy strategy) {
  const MentionInput in = mention_input(encoder.vocab(), sentence, mention, strategy, encoder.config().max_len);
  const Matrix e = mention_embeddings(encoder, std::span(&in, 1));
  return e.values();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

TypingModel::TypingModel(std::vector<std::string> labels, std::size_t dim, SpanStrategy strategy)
    : labels_(std::move(labels)), weights_(labels_.size(), dim), bias_(1, labels_.size()), strategy_(strategy) {}

std::vector<double> TypingModel::probabilities(std::span<const double> x) const {
  if (x.size() != dim())
    throw std::invalid_argument("embedding has dimension " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(dim()));
  std::vector<double> p(labels_.size());
  for (std::size_t t = 0; t < labels_.size(); ++t) p[t] = sigmoid(dot(weights_.row(t), x) + bias_(0, t));
  return p;
}

TypingPrediction TypingModel::predict(const Mention& mention, std::span<const double> embedding) const {
  TypingPrediction out;
  out.mention = mention;
  out.probabilities = probabilities(embedding);
  for (std::size_t t = 0; t < labels_.size(); ++t)
    if (out.probabilities[t] > threshold_) out.labels.push_back(labels_[t]);
  return out;
}

json TypingModel::to_json() const {
  json w = json::array();
  for (std::size_t t = 0; t < labels_.size(); ++t) {
    const auto r = weights_.row(t);
    w.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return json{{"labels", labels_},   {"strategy", corefcl::to_string(strategy_)},
              {"threshold", threshold_}, {"dim", dim()},
              {"frozen", frozen_},   {"weights", w},
              {"bias", bias_.values()}};
}

TypingModel TypingModel::from_json(const json& j) {
  TypingModel m(j.at("labels").get<std::vector<std::string>>(), j.at("dim").get<std::size_t>(),
                parse_span_strategy(j.at("strategy").get<std::string>()));
  m.threshold_ = j.at("threshold").get<double>();
  m.frozen_ = j.value("frozen", true);
  const auto& w = j.at("weights");
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != m.labels_.size() || b.size() != m.labels_.size())
    throw std::invalid_argument("typing model: one weight row and bias per label required");
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto row = w[t].get<std::vector<double>>();
    if (row.size() != m.dim()) throw std::invalid_argument("typing model: weight row has the wrong dimension");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) throw std::invalid_argument("typing model: non-finite weight");
      m.weights_(t, c) = row[c];
    }
    m.bias_(0, t) = b[t];
  }
  return m;
}

void TypingModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json().dump(1) << "\n";
}

TypingModel TypingModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return from_json(json::parse(is));
}

BceResult bce_loss(const TypingModel& model, const Matrix& x, const Matrix& y) {
  const std::size_t n = x.rows(), L = model.labels().size(), d = model.dim();
  require_shape(x, n, d, "bce embeddings");
  require_shape(y, n, L, "bce targets");
  BceResult r{0.0, Matrix(L, d), Matrix(1, L), Matrix(n, d)};
  if (n == 0 || L == 0) return r;
  const double scale = 1.0 / static_cast<double>(n * L);
  const auto& W = model.weights();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < L; ++t) {
      const double z = dot(W.row(t), x.row(i)) + model.bias()(0, t);
      // log(1 + e^z) - y z, computed stably
      r.loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y(i, t) * z;
      const double g = (sigmoid(z) - y(i, t)) * scale;
      r.d_bias(0, t) += g;
      for (std::size_t c = 0; c < d; ++c) {
        r.d_weights(t, c) += g * x(i, c);
        r.d_embeddings(i, c) += g * W(t, c);
      }
    }
  }
  r.loss *= scale;
  return r;
}

TypingDataset make_typing_dataset(const Corpus& corpus, const Vocab& vocab, SpanStrategy strategy,
                                  std::size_t max_len) {
  TypingDataset ds;
  for (const auto& tm : corpus.typed_mentions()) {
    if (tm.labels.empty()) continue;
    ds.mentions.push_back(tm.mention);
    ds.inputs.push_back(mention_input(vocab, corpus.sentence(tm.mention), tm.mention, strategy, max_len));
    ds.labels.push_back(tm.labels);
  }
  return ds;
}

TypingTrainConfig typing_config_from_json(const json& j, TypingTrainConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) c.optimizer = adamw_config_from_json(j.at("optimizer"), c.optimizer);
  c.encoder_lr = j.value("encoder_lr", c.encoder_lr);
  if (j.contains("strategy")) c.strategy = parse_span_strategy(j.at("strategy"));
  c.frozen = j.value("frozen", c.frozen);
  c.threshold = j.value("threshold", c.threshold);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const TypingTrainConfig& c) {
  return json{{"epochs", c.epochs},          {"batch_size", c.batch_size}, {"optimizer", to_json(c.optimizer)},
              {"encoder_lr", c.encoder_lr},  {"strategy", to_string(c.strategy)}, {"frozen", c.frozen},
              {"threshold", c.threshold},    {"seed", c.seed}};
}

namespace {

Matrix target_matrix(const TypingDataset& ds, const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t> index;
  for (std::size_t t = 0; t < labels.size(); ++t) index[labels[t]] = t;
  Matrix y(ds.size(), labels.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (const auto& l : ds.labels[i]) {
      auto it = index.find(l);
      if (it == index.end()) throw std::invalid_argument("label '" + l + "' is outside the label inventory");
      y(i, it->second) = 1.0;
    }
  }
  return y;
}

std::vector<LabelSet> predicted_sets(const TypingModel& model, const Matrix& emb) {
  std::vector<LabelSet> out;
  for (std::size_t i = 0; i < emb.rows(); ++i) out.push_back(model.predict(Mention{}, emb.row(i)).labels);
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  return out;
}

}  // namespace

TypingTrainResult train_typing(const TypingDataset& train, const TypingDataset* validation, const Encoder& encoder,
                               const TypingTrainConfig& config, std::vector<std::string> inventory) {
  if (train.size() == 0) throw std::invalid_argument("typing training set is empty");
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (inventory.empty()) {
    std::set<std::string> all;
    for (const auto& ls : train.labels) all.insert(ls.begin(), ls.end());
    inventory.assign(all.begin(), all.end());
  }
  const Matrix y = target_matrix(train, inventory);
  if (validation) target_matrix(*validation, inventory);

  TypingModel model(inventory, encoder.config().dim, config.strategy);
  model.set_threshold(config.threshold);
  model.set_frozen(config.frozen);
  Encoder enc = encoder;

  Matrix head_grad_w(model.weights().rows(), model.weights().cols()), head_grad_b(1, inventory.size());
  AdamW head_opt(config.optimizer);
  const std::vector<ParamRef> head_refs{{&model.weights(), &head_grad_w, true}, {&model.bias(), &head_grad_b, false}};

  AdamWConfig enc_cfg = config.optimizer;
  enc_cfg.lr = config.encoder_lr;
  AdamW enc_opt(enc_cfg);
  Gradients enc_grads;
  std::vector<ParamRef> enc_refs;
  if (!config.frozen) {
    enc_grads = enc.zero_gradients();
    for (std::size_t i = 0; i < enc.params().size(); ++i)
      enc_refs.push_back({&enc.params()[i].value, &enc_grads[i], enc.params()[i].decay});
  }

  Matrix train_emb;
  if (config.frozen) train_emb = mention_embeddings(enc, train.inputs);
  Matrix val_emb;
  if (validation && config.frozen) val_emb = mention_embeddings(enc, validation->inputs);

  Rng rng(derive_seed(config.seed, "typing/shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TypingTrainResult result{model, enc, 0, {}};
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t nb = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(config.batch_size, order.size() - b));
      const Matrix yb = select_rows(y, idx);
      if (config.frozen) {
        const auto r = bce_loss(model, select_rows(train_emb, idx), yb);
        head_grad_w = r.d_weights;
        head_grad_b = r.d_bias;
        head_opt.step(head_refs);
        loss_sum += r.loss;
      } else {
        std::vector<MentionInput> inputs;
        for (auto i : idx) inputs.push_back(train.inputs[i]);
        const auto batch = batch_of(inputs);
        const auto cache = enc.forward(batch);
        Matrix xb(idx.size(), enc.config().dim);
        for (std::size_t i = 0; i < idx.size(); ++i)
          std::copy_n(cache.output.row(batch.row(i, inputs[i].position)).begin(), xb.cols(), xb.row(i).begin());
        const auto r = bce_loss(model, xb, yb);
        Matrix d_out(cache.output.rows(), cache.output.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t c = 0; c < xb.cols(); ++c) d_out(batch.row(i, inputs[i].position), c) = r.d_embeddings(i, c);
        for (auto& g : enc_grads) g.set_zero();
        enc.backward(cache, d_out, enc_grads);
        head_grad_w = r.d_weights;
        head_grad_b = r.d_bias;
        head_opt.step(head_refs);
        enc_opt.step(enc_refs);
        loss_sum += r.loss;
      }
      ++nb;
    }
    TypingEpochLog log{epoch, loss_sum / static_cast<double>(nb), 0.0, 0.0};
    std::vector<LabelSet> pred;
    const std::vector<LabelSet>* gold = &train.labels;
    if (validation) {
      pred = predicted_sets(model, config.frozen ? val_emb : mention_embeddings(enc, validation->inputs));
      gold = &validation->labels;
    } else {
      pred = predicted_sets(model, config.frozen ? train_emb : mention_embeddings(enc, train.inputs));
    }
    log.val_micro_f1 = micro_f1(pred, *gold);
    log.val_macro_f1 = macro_f1(pred, *gold);
    result.log.push_back(log);
    if (log.val_micro_f1 > best) {
      best = log.val_micro_f1;
      result.model = model;
      if (!config.frozen) result.encoder = enc;
      result.best_epoch = epoch;
    }
  }
  if (config.epochs == 0) result.model = model;
  return result;
}

std::vector<TypingPrediction> predict_dataset(const TypingModel& model, const Encoder& encoder,
                                              const TypingDataset& data) {
  const Matrix emb = mention_embeddings(encoder, data.inputs);
  std::vector<TypingPrediction> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(model.predict(data.mentions[i], emb.row(i)));
  return out;
}

}  // namespace corefcl
