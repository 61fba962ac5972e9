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

#include "corefcl/spandet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <numeric>
#include <set>
#include <stdexcept>

#include "corefcl/rng.hpp"

namespace corefcl {

using nlohmann::json;

TagSet::TagSet(const std::vector<std::string>& types) : tags_{kOutsideName} {
  for (const auto& t : types) {
    if (std::find(tags_.begin(), tags_.end(), t) != tags_.end())
      throw std::invalid_argument("duplicate tag '" + t + "'");
    tags_.push_back(t);
  }
}

std::size_t TagSet::tag(const std::string& type) const {
  auto it = std::find(tags_.begin() + 1, tags_.end(), type);
  if (it == tags_.end()) throw std::invalid_argument("unknown span type '" + type + "'");
  return static_cast<std::size_t>(it - tags_.begin());
}

std::vector<TokenTag> training_tokens(std::size_t n, std::span<const LabeledSpan> spans) {
  std::vector<std::size_t> tag(n, TagSet::kOutside);
  std::vector<bool> covered(n, false), adjacent(n, false);
  for (const auto& s : spans) {
    if (!(s.start < s.end && s.end <= n))
      throw std::invalid_argument("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                  ") does not fit a sentence of " + std::to_string(n) + " tokens");
    if (s.tag == TagSet::kOutside) throw std::invalid_argument("a gold span cannot carry the OUTSIDE tag");
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (covered[i]) throw std::invalid_argument("overlapping gold spans at token " + std::to_string(i));
      covered[i] = true;
      tag[i] = s.tag;
    }
    if (s.start > 0) adjacent[s.start - 1] = true;
    if (s.end < n) adjacent[s.end] = true;
  }
  std::vector<TokenTag> out;
  for (std::size_t i = 0; i < n; ++i)
    if (covered[i] || adjacent[i]) out.push_back({i, tag[i]});
  return out;
}

std::vector<LabeledSpan> decode(std::span<const std::size_t> tags) {
  std::vector<LabeledSpan> out;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] == TagSet::kOutside) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == tags[i]) ++j;
    out.push_back({i, j, tags[i]});
    i = j;
  }
  return out;
}

TaggerTrainConfig tagger_config_from_json(const json& j, TaggerTrainConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_sentences = j.value("batch_sentences", c.batch_sentences);
  if (j.contains("optimizer")) c.optimizer = adamw_config_from_json(j.at("optimizer"), c.optimizer);
  c.encoder_lr = j.value("encoder_lr", c.encoder_lr);
  c.frozen = j.value("frozen", c.frozen);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const TaggerTrainConfig& c) {
  return json{{"epochs", c.epochs}, {"batch_sentences", c.batch_sentences}, {"optimizer", to_json(c.optimizer)},
              {"encoder_lr", c.encoder_lr}, {"frozen", c.frozen}, {"seed", c.seed}};
}

TaggerModel::TaggerModel(TagSet tags, std::size_t dim)
    : tags_(std::move(tags)), weights_(tags_.size(), dim), bias_(1, tags_.size()) {}

Matrix TaggerModel::logits(const Matrix& x) const {
  require_shape(x, x.rows(), dim(), "tagger embeddings");
  Matrix out(x.rows(), tags_.size());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t t = 0; t < tags_.size(); ++t) out(i, t) = dot(weights_.row(t), x.row(i)) + bias_(0, t);
  return out;
}

std::vector<std::size_t> TaggerModel::tag_tokens(const Matrix& x) const {
  const Matrix z = logits(x);
  std::vector<std::size_t> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto r = z.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

json TaggerModel::to_json() const {
  json w = json::array();
  for (std::size_t t = 0; t < tags_.size(); ++t) {
    const auto r = weights_.row(t);
    w.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return json{{"tags", tags_.names()}, {"dim", dim()}, {"weights", w}, {"bias", bias_.values()}};
}

TaggerModel TaggerModel::from_json(const json& j) {
  auto names = j.at("tags").get<std::vector<std::string>>();
  if (names.empty() || names.front() != TagSet::kOutsideName)
    throw std::invalid_argument("tagger model: first tag must be " + TagSet::kOutsideName);
  TaggerModel m(TagSet(std::vector<std::string>(names.begin() + 1, names.end())), j.at("dim").get<std::size_t>());
  const auto& w = j.at("weights");
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != names.size() || b.size() != names.size())
    throw std::invalid_argument("tagger model: one weight row and bias per tag required");
  for (std::size_t t = 0; t < names.size(); ++t) {
    const auto row = w[t].get<std::vector<double>>();
    if (row.size() != m.dim()) throw std::invalid_argument("tagger model: weight row has the wrong dimension");
    std::copy(row.begin(), row.end(), m.weights_.row(t).begin());
    m.bias_(0, t) = b[t];
  }
  return m;
}

void TaggerModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json().dump(1) << "\n";
}

TaggerModel TaggerModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return from_json(json::parse(is));
}

TaggerLoss tagger_loss(const TaggerModel& model, const Matrix& x, std::span<const std::size_t> tags) {
  const std::size_t n = x.rows(), T = model.tags().size(), d = model.dim();
  if (tags.size() != n) throw std::invalid_argument("tagger_loss: one tag per row required");
  TaggerLoss r{0.0, Matrix(T, d), Matrix(1, T), Matrix(n, d)};
  if (n == 0) return r;
  const Matrix z = model.logits(x);
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<double> g(T);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    r.loss += lse - row[tags[i]];
    for (std::size_t t = 0; t < T; ++t) g[t] = (std::exp(row[t] - lse) - (t == tags[i] ? 1.0 : 0.0)) * scale;
    for (std::size_t t = 0; t < T; ++t) {
      r.d_bias(0, t) += g[t];
      for (std::size_t c = 0; c < d; ++c) {
        r.d_weights(t, c) += g[t] * x(i, c);
        r.d_embeddings(i, c) += g[t] * model.weights()(t, c);
      }
    }
  }
  r.loss *= scale;
  return r;
}

std::vector<std::string> span_types(const Corpus& corpus) {
  std::set<std::string> types;
  for (const auto& tm : corpus.typed_mentions()) {
    const auto t = coarse_type(tm.labels);
    if (!t.empty()) types.insert(t);
  }
  return {types.begin(), types.end()};
}

std::vector<SpanSentence> span_sentences(const Corpus& corpus, const TagSet& tags) {
  std::map<std::pair<std::string, std::size_t>, std::map<Mention, std::string>> by_sentence;
  for (const auto& tm : corpus.typed_mentions()) {
    const auto t = coarse_type(tm.labels);
    if (t.empty()) continue;
    by_sentence[{tm.mention.story, tm.mention.sent}][tm.mention] = t;
  }
  std::vector<SpanSentence> out;
  for (const auto& story : corpus.stories()) {
    for (std::size_t s = 0; s < story.sentences.size(); ++s) {
      SpanSentence ss{story.id, s, &story.sentences[s], {}};
      auto it = by_sentence.find({story.id, s});
      if (it != by_sentence.end())
        for (const auto& [m, t] : it->second) ss.spans.push_back({m.start, m.end, tags.tag(t)});
      std::sort(ss.spans.begin(), ss.spans.end());
      training_tokens(ss.tokens->size(), ss.spans);  // validates
      out.push_back(std::move(ss));
    }
  }
  return out;
}

namespace {

EncoderBatch sentence_batch(const Vocab& vocab, std::span<const SpanSentence* const> sents) {
  std::vector<std::vector<int>> seqs;
  for (const auto* s : sents) {
    std::vector<int> ids{Vocab::kBos};
    const auto enc = vocab.encode(*s->tokens);
    ids.insert(ids.end(), enc.begin(), enc.end());
    ids.push_back(Vocab::kEos);
    seqs.push_back(std::move(ids));
  }
  return EncoderBatch::pad(seqs);
}

}  // namespace

TaggerTrainResult train_tagger(std::span<const SpanSentence> data, const TagSet& tags, const Encoder& encoder,
                               const TaggerTrainConfig& config) {
  if (config.batch_sentences == 0) throw std::invalid_argument("batch_sentences must be >= 1");
  const std::size_t max_tokens = encoder.config().max_len - 2;
  std::vector<const SpanSentence*> usable;
  std::vector<std::vector<TokenTag>> filtered;
  for (const auto& s : data) {
    if (s.tokens->size() > max_tokens) continue;
    auto tt = training_tokens(s.tokens->size(), s.spans);
    if (tt.empty()) continue;
    usable.push_back(&s);
    filtered.push_back(std::move(tt));
  }
  if (usable.empty()) throw std::invalid_argument("no training tokens after the adjacency filter");

  TaggerTrainResult result{TaggerModel(tags, encoder.config().dim), encoder, {}};
  TaggerModel& model = result.model;
  Encoder& enc = result.encoder;
  Matrix gw(model.weights().rows(), model.weights().cols()), gb(1, tags.size());
  AdamW head_opt(config.optimizer);
  const std::vector<ParamRef> head_refs{{&model.weights(), &gw, true}, {&model.bias(), &gb, false}};
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

  // Frozen: embeddings of the filtered tokens are computed once.
  std::vector<Matrix> frozen_emb;
  if (config.frozen) {
    for (std::size_t b = 0; b < usable.size(); b += 64) {
      const std::span<const SpanSentence* const> part(usable.data() + b, std::min<std::size_t>(64, usable.size() - b));
      const auto batch = sentence_batch(enc.vocab(), part);
      const auto cache = enc.forward(batch);
      for (std::size_t i = 0; i < part.size(); ++i) {
        const auto& tt = filtered[b + i];
        Matrix e(tt.size(), enc.config().dim);
        for (std::size_t k = 0; k < tt.size(); ++k)
          std::copy_n(cache.output.row(batch.row(i, tt[k].index + 1)).begin(), e.cols(), e.row(k).begin());
        frozen_emb.push_back(std::move(e));
      }
    }
  }

  Rng rng(derive_seed(config.seed, "tagger/shuffle"));
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t nb = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_sentences) {
      const std::size_t nbatch = std::min(config.batch_sentences, order.size() - b);
      std::size_t rows = 0;
      for (std::size_t i = 0; i < nbatch; ++i) rows += filtered[order[b + i]].size();
      Matrix x(rows, enc.config().dim);
      std::vector<std::size_t> y;
      std::vector<std::size_t> out_rows;
      std::optional<ForwardCache> cache;
      std::optional<EncoderBatch> batch;
      if (!config.frozen) {
        std::vector<const SpanSentence*> part;
        for (std::size_t i = 0; i < nbatch; ++i) part.push_back(usable[order[b + i]]);
        batch = sentence_batch(enc.vocab(), part);
        cache = enc.forward(*batch);
      }
      std::size_t r = 0;
      for (std::size_t i = 0; i < nbatch; ++i) {
        const std::size_t s = order[b + i];
        for (std::size_t k = 0; k < filtered[s].size(); ++k, ++r) {
          y.push_back(filtered[s][k].tag);
          if (config.frozen) {
            std::copy_n(frozen_emb[s].row(k).begin(), x.cols(), x.row(r).begin());
          } else {
            const std::size_t row = batch->row(i, filtered[s][k].index + 1);
            out_rows.push_back(row);
            std::copy_n(cache->output.row(row).begin(), x.cols(), x.row(r).begin());
          }
        }
      }
      const auto loss = tagger_loss(model, x, y);
      gw = loss.d_weights;
      gb = loss.d_bias;
      if (!config.frozen) {
        Matrix d_out(cache->output.rows(), cache->output.cols());
        for (std::size_t k = 0; k < out_rows.size(); ++k)
          for (std::size_t c = 0; c < d_out.cols(); ++c) d_out(out_rows[k], c) += loss.d_embeddings(k, c);
        for (auto& g : enc_grads) g.set_zero();
        enc.backward(*cache, d_out, enc_grads);
      }
      head_opt.step(head_refs);
      if (!config.frozen) enc_opt.step(enc_refs);
      loss_sum += loss.loss;
      ++nb;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(nb));
  }
  return result;
}

std::vector<TypedSpan> predict_spans(const TaggerModel& model, const Encoder& encoder,
                                     std::span<const SpanSentence> data) {
  const std::size_t max_tokens = encoder.config().max_len - 2;
  std::vector<TypedSpan> out;
  std::vector<const SpanSentence*> usable;
  for (const auto& s : data)
    if (s.tokens->size() <= max_tokens && !s.tokens->empty()) usable.push_back(&s);
  for (std::size_t b = 0; b < usable.size(); b += 64) {
    const std::span<const SpanSentence* const> part(usable.data() + b, std::min<std::size_t>(64, usable.size() - b));
    const auto batch = sentence_batch(encoder.vocab(), part);
    const auto cache = encoder.forward(batch);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const std::size_t n = part[i]->tokens->size();
      Matrix x(n, encoder.config().dim);
      for (std::size_t k = 0; k < n; ++k)
        std::copy_n(cache.output.row(batch.row(i, k + 1)).begin(), x.cols(), x.row(k).begin());
      const auto tags = model.tag_tokens(x);
      for (const auto& s : decode(tags))
        out.push_back({part[i]->story, part[i]->sent, s.start, s.end, model.tags().name(s.tag)});
    }
  }
  return out;
}

}  // namespace corefcl
