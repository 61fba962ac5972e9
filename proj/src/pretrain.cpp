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

#include "corefcl/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace corefcl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// enum <-> string

std::string to_string(MaskPolicy v) {
  switch (v) {
    case MaskPolicy::kNone: return "none";
    case MaskPolicy::kHead: return "head";
    case MaskPolicy::kFullSpan: return "full_span";
  }
  return "?";
}
std::string to_string(NegativeScope v) {
  return v == NegativeScope::kDifferentStories ? "different_stories" : "same_story";
}
std::string to_string(TokenScope v) { return v == TokenScope::kAllSpanTokens ? "all_span_tokens" : "head_only"; }
std::string to_string(DenominatorMode v) {
  return v == DenominatorMode::kIncludePositive ? "include_positive" : "literal_self";
}
std::string to_string(Objective v) {
  switch (v) {
    case Objective::kEntityAndMlm: return "entity_mlm";
    case Objective::kMlmOnly: return "mlm_only";
    case Objective::kEntityOnly: return "entity_only";
  }
  return "?";
}

namespace {
[[noreturn]] void bad_value(const char* what, const std::string& s) {
  throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}
}  // namespace

MaskPolicy parse_mask_policy(const std::string& s) {
  if (s == "none") return MaskPolicy::kNone;
  if (s == "head") return MaskPolicy::kHead;
  if (s == "full_span") return MaskPolicy::kFullSpan;
  bad_value("mask_policy", s);
}
NegativeScope parse_negative_scope(const std::string& s) {
  if (s == "different_stories") return NegativeScope::kDifferentStories;
  if (s == "same_story") return NegativeScope::kSameStory;
  bad_value("negative_scope", s);
}
TokenScope parse_token_scope(const std::string& s) {
  if (s == "all_span_tokens") return TokenScope::kAllSpanTokens;
  if (s == "head_only") return TokenScope::kHeadOnly;
  bad_value("token_scope", s);
}
DenominatorMode parse_denominator_mode(const std::string& s) {
  if (s == "include_positive") return DenominatorMode::kIncludePositive;
  if (s == "literal_self") return DenominatorMode::kLiteralSelf;
  bad_value("denominator_mode", s);
}
Objective parse_objective(const std::string& s) {
  if (s == "entity_mlm") return Objective::kEntityAndMlm;
  if (s == "mlm_only") return Objective::kMlmOnly;
  if (s == "entity_only") return Objective::kEntityOnly;
  bad_value("objective", s);
}

void PretrainConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  for (double p : {head_mask_prob, mlm_mask_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask probabilities must lie in [0,1]");
  if (stories_per_batch == 0) throw std::invalid_argument("stories_per_batch must be >= 1");
  if (negative_scope == NegativeScope::kDifferentStories && stories_per_batch < 2)
    throw std::invalid_argument("different_stories negatives need stories_per_batch >= 2");
}

PretrainConfig pretrain_config_from_json(const json& j, PretrainConfig c) {
  c.stories_per_batch = j.value("stories_per_batch", c.stories_per_batch);
  c.temperature = j.value("temperature", c.temperature);
  c.head_mask_prob = j.value("head_mask_prob", c.head_mask_prob);
  if (j.contains("mask_policy")) c.mask_policy = parse_mask_policy(j.at("mask_policy"));
  if (j.contains("negative_scope")) c.negative_scope = parse_negative_scope(j.at("negative_scope"));
  if (j.contains("token_scope")) c.token_scope = parse_token_scope(j.at("token_scope"));
  c.mlm_mask_prob = j.value("mlm_mask_prob", c.mlm_mask_prob);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("optimizer")) c.optimizer = adamw_config_from_json(j.at("optimizer"), c.optimizer);
  c.seed = j.value("seed", c.seed);
  if (j.contains("denominator_mode")) c.denominator = parse_denominator_mode(j.at("denominator_mode"));
  if (j.contains("objective")) c.objective = parse_objective(j.at("objective"));
  return c;
}

json to_json(const PretrainConfig& c) {
  return json{{"stories_per_batch", c.stories_per_batch},
              {"temperature", c.temperature},
              {"head_mask_prob", c.head_mask_prob},
              {"mask_policy", to_string(c.mask_policy)},
              {"negative_scope", to_string(c.negative_scope)},
              {"token_scope", to_string(c.token_scope)},
              {"mlm_mask_prob", c.mlm_mask_prob},
              {"epochs", c.epochs},
              {"optimizer", to_json(c.optimizer)},
              {"seed", c.seed},
              {"denominator_mode", to_string(c.denominator)},
              {"objective", to_string(c.objective)}};
}

json to_json(const EpochLog& log) {
  return json{{"epoch", log.epoch},
              {"entity_loss", log.train.entity},
              {"mlm_loss", log.train.mlm},
              {"total", log.train.total},
              {"val_loss", log.val_loss},
              {"positive_pairs", log.train.positive_pairs},
              {"negative_pool", log.train.negative_pool}};
}

// ---------------------------------------------------------------------------
// Batch construction

PretrainBatch build_batch(std::span<const StoryChains> stories, const Vocab& vocab,
                          const PretrainConfig& config, Rng& rng, std::size_t max_len) {
  struct Placed {
    std::size_t seq;
    Mention mention;
    std::size_t story;
    std::size_t chain;
  };
  PretrainBatch batch;
  std::vector<std::vector<int>> seqs;
  std::vector<std::vector<std::uint8_t>> is_mention;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seq_of;
  std::vector<Placed> placed;
  std::size_t chain_id = 0;
  const bool entity = config.objective != Objective::kMlmOnly;

  for (std::size_t si = 0; si < stories.size(); ++si) {
    const auto& sc = stories[si];
    for (const auto& chain : sc.chains) {
      const std::size_t g = chain_id++;
      for (const auto& m : chain) {
        const Sentence& sent = sc.story->sentences.at(m.sent);
        const auto key = std::make_pair(si, m.sent);
        auto it = seq_of.find(key);
        if (it == seq_of.end()) {
          if (sent.size() + 2 > max_len) {
            ++batch.skipped_sentences;
            seq_of.emplace(key, std::numeric_limits<std::size_t>::max());
            continue;
          }
          std::vector<int> ids{Vocab::kBos};
          const auto enc = vocab.encode(sent);
          ids.insert(ids.end(), enc.begin(), enc.end());
          ids.push_back(Vocab::kEos);
          it = seq_of.emplace(key, seqs.size()).first;
          is_mention.emplace_back(ids.size(), 0);
          seqs.push_back(std::move(ids));
        }
        if (it->second == std::numeric_limits<std::size_t>::max()) continue;
        placed.push_back({it->second, m, si, g});
      }
    }
  }
  if (placed.empty()) throw std::invalid_argument("no positive pairs");

  batch.mentions = placed.size();
  for (const auto& pm : placed) {
    auto& ids = seqs[pm.seq];
    if (entity) {
      for (std::size_t t = pm.mention.start; t < pm.mention.end; ++t) is_mention[pm.seq][t + 1] = 1;
      if (config.mask_policy != MaskPolicy::kNone && rng.bernoulli(config.head_mask_prob)) {
        if (config.mask_policy == MaskPolicy::kHead) {
          ids[pm.mention.head + 1] = Vocab::kMask;
        } else {
          for (std::size_t t = pm.mention.start; t < pm.mention.end; ++t) ids[t + 1] = Vocab::kMask;
        }
        ++batch.masked_heads;
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> mlm_at;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    for (std::size_t t = 1; t + 1 < seqs[s].size(); ++t) {
      if (is_mention[s][t]) continue;
      if (rng.bernoulli(config.mlm_mask_prob)) {
        mlm_at.emplace_back(s, t);
        batch.mlm_targets.push_back(seqs[s][t]);
        seqs[s][t] = Vocab::kMask;
      }
    }
  }

  batch.input = EncoderBatch::pad(seqs);
  const std::size_t L = batch.input.seq_len;
  for (const auto& [s, t] : mlm_at) batch.mlm_rows.push_back(batch.input.row(s, t));

  std::map<std::size_t, std::size_t> index_of_row;
  for (const auto& pm : placed) {
    auto add = [&](std::size_t tok) {
      const std::size_t row = pm.seq * L + tok + 1;
      if (index_of_row.emplace(row, batch.tokens.size()).second)
        batch.tokens.push_back({row, pm.story, pm.chain});
    };
    if (config.token_scope == TokenScope::kHeadOnly) {
      add(pm.mention.head);
    } else {
      for (std::size_t t = pm.mention.start; t < pm.mention.end; ++t) add(t);
    }
  }

  const std::size_t n = batch.tokens.size();
  auto& cs = batch.contrast;
  cs.positives.assign(n, {});
  cs.negatives.assign(n, {});
  cs.anchor.assign(n, 0);
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ti = batch.tokens[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& tj = batch.tokens[j];
      if (tj.chain == ti.chain) {
        cs.positives[i].push_back(j);
      } else if (config.negative_scope == NegativeScope::kDifferentStories ? tj.story != ti.story
                                                                            : tj.story == ti.story) {
        cs.negatives[i].push_back(j);
      }
    }
    any_positive = any_positive || !cs.positives[i].empty();
    cs.anchor[i] = !cs.positives[i].empty() && !cs.negatives[i].empty();
  }
  if (!any_positive) throw std::invalid_argument("no positive pairs");
  return batch;
}

void verify_negative_scope(const PretrainBatch& batch, NegativeScope scope) {
  const auto& cs = batch.contrast;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j : cs.negatives[i]) {
      const bool same_story = batch.tokens[i].story == batch.tokens[j].story;
      if (scope == NegativeScope::kDifferentStories && same_story)
        throw std::logic_error("same-story token used as a negative under different_stories");
      if (batch.tokens[i].chain == batch.tokens[j].chain)
        throw std::logic_error("same-chain token used as a negative");
    }
  }
}

// ---------------------------------------------------------------------------
// Losses

InfoNceResult info_nce(const Matrix& emb, const ContrastiveSet& set, double tau, DenominatorMode mode) {
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce: temperature must be > 0");
  const std::size_t n = emb.rows(), d = emb.cols();
  if (set.size() != n) throw std::invalid_argument("info_nce: contrastive set does not match embeddings");
  InfoNceResult res;
  res.grad = Matrix(n, d);

  std::vector<double> norm(n);
  Matrix unit(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    norm[i] = std::sqrt(dot(emb.row(i), emb.row(i)));
    if (!(norm[i] > 0.0)) throw std::invalid_argument("info_nce: zero-norm embedding");
    for (std::size_t j = 0; j < d; ++j) unit(i, j) = emb(i, j) / norm[i];
  }
  Matrix cos(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) cos(i, j) = cos(j, i) = dot(unit.row(i), unit.row(j));

  Matrix dcos(n, n);  // d(sum of terms)/d cos(i, j), i the anchor
  double total = 0.0;
  std::vector<double> logits;
  for (std::size_t t = 0; t < n; ++t) {
    if (!set.anchor[t]) continue;
    const auto& negs = set.negatives[t];
    if (negs.empty() && mode == DenominatorMode::kLiteralSelf)
      throw std::invalid_argument("info_nce: empty negative pool and no positive in the denominator");
    for (std::size_t pos : set.positives[t]) {
      // logits[0] is the extra denominator term, logits[1..] the negatives.
      logits.assign(negs.size() + 1, 0.0);
      const double pos_logit = cos(t, pos) / tau;
      logits[0] = mode == DenominatorMode::kIncludePositive ? pos_logit : 1.0 / tau;
      for (std::size_t k = 0; k < negs.size(); ++k) logits[k + 1] = cos(t, negs[k]) / tau;
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double l : logits) z += std::exp(l - mx);
      const double lse = mx + std::log(z);
      total += lse - pos_logit;
      ++res.terms;
      res.negatives += negs.size();
      // d term / d logit_k = softmax_k (denominator) - [k is the positive]
      if (mode == DenominatorMode::kIncludePositive) {
        dcos(t, pos) += (std::exp(logits[0] - lse) - 1.0) / tau;
      } else {
        dcos(t, pos) += -1.0 / tau;
      }
      for (std::size_t k = 0; k < negs.size(); ++k) dcos(t, negs[k]) += std::exp(logits[k + 1] - lse) / tau;
    }
  }
  if (res.terms == 0) return res;
  const double scale = 1.0 / static_cast<double>(res.terms);
  res.loss = total * scale;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = dcos(i, j) * scale;
      if (g == 0.0) continue;
      // d cos(a,b)/da = (b_hat - cos * a_hat) / |a|
      for (std::size_t c = 0; c < d; ++c) {
        res.grad(i, c) += g * (unit(j, c) - cos(i, j) * unit(i, c)) / norm[i];
        res.grad(j, c) += g * (unit(i, c) - cos(i, j) * unit(j, c)) / norm[j];
      }
    }
  }
  return res;
}

MlmResult mlm_loss(const Matrix& logits, std::span<const int> targets) {
  if (logits.rows() != targets.size()) throw std::invalid_argument("mlm_loss: one target per row required");
  MlmResult res;
  res.count = targets.size();
  res.grad = Matrix(logits.rows(), logits.cols());
  if (res.count == 0) return res;
  const double scale = 1.0 / static_cast<double>(res.count);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const auto target = static_cast<std::size_t>(targets[i]);
    if (target >= logits.cols()) throw std::invalid_argument("mlm_loss: target out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double l : row) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    res.loss += lse - row[target];
    for (std::size_t j = 0; j < row.size(); ++j) res.grad(i, j) = std::exp(row[j] - lse) * scale;
    res.grad(i, target) -= scale;
  }
  res.loss *= scale;
  return res;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(m.row(rows[i]).begin(), m.cols(), out.row(i).begin());
  return out;
}

void scatter_add(Matrix& dst, std::span<const std::size_t> rows, const Matrix& src) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(rows[i], j) += src(i, j);
}

// Loss of one batch; with `grads`, also accumulates parameter gradients.
LossBreakdown batch_loss(const Encoder& enc, const PretrainBatch& batch, const PretrainConfig& config,
                         Gradients* grads) {
  LossBreakdown out;
  const ForwardCache cache = enc.forward(batch.input);
  Matrix d_out;
  if (grads) d_out = Matrix(cache.output.rows(), cache.output.cols());

  if (config.objective != Objective::kMlmOnly) {
    std::vector<std::size_t> rows;
    for (const auto& t : batch.tokens) rows.push_back(t.row);
    const auto r = info_nce(gather_rows(cache.output, rows), batch.contrast, config.temperature, config.denominator);
    out.entity = r.loss;
    out.positive_pairs = r.terms;
    out.negative_pool = r.negatives;
    if (grads) scatter_add(d_out, rows, r.grad);
  }
  if (config.objective != Objective::kEntityOnly && !batch.mlm_rows.empty()) {
    const Matrix rows = gather_rows(cache.output, batch.mlm_rows);
    const Matrix logits = enc.mlm_logits(rows);
    const auto r = mlm_loss(logits, batch.mlm_targets);
    out.mlm = r.loss;
    if (grads) scatter_add(d_out, batch.mlm_rows, enc.mlm_backward(rows, r.grad, *grads));
  }
  out.total = out.entity + out.mlm;
  if (grads) enc.backward(cache, d_out, *grads);
  return out;
}

std::vector<StoryChains> collect_stories(const PretrainData& data) {
  if (!data.corpus || !data.chains) throw std::invalid_argument("pretrain: corpus and chains are required");
  std::vector<StoryChains> out;
  for (const auto& story : data.corpus->stories()) {
    auto it = data.chains->chains.find(story.id);
    if (it == data.chains->chains.end() || it->second.empty()) continue;
    out.push_back({&story, it->second});
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_groups(std::vector<std::size_t> order, std::size_t k) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < order.size(); i += k) {
    std::vector<std::size_t> g(order.begin() + i, order.begin() + std::min(order.size(), i + k));
    // top up a short final group from the front of the pool
    for (std::size_t j = 0; g.size() < k && j < order.size(); ++j)
      if (std::find(g.begin(), g.end(), order[j]) == g.end()) g.push_back(order[j]);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<StoryChains> select(const std::vector<StoryChains>& all, const std::vector<std::size_t>& idx) {
  std::vector<StoryChains> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace

LossBreakdown evaluate_batch(const Encoder& encoder, const PretrainBatch& batch, const PretrainConfig& config) {
  return batch_loss(encoder, batch, config, nullptr);
}

PretrainResult pretrain(const PretrainData& train, const PretrainData* validation, Encoder encoder,
                        const PretrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto stories = collect_stories(train);
  if (stories.empty()) throw std::invalid_argument("pretrain: corpus has no coreference chains");
  const std::size_t k = std::min(config.stories_per_batch, stories.size());
  if (config.negative_scope == NegativeScope::kDifferentStories && k < 2)
    throw std::invalid_argument("pretrain: different_stories negatives need at least 2 stories with chains");

  Rng sample_rng(derive_seed(config.seed, "pretrain/sample"));
  Rng mask_rng(derive_seed(config.seed, "pretrain/mask"));

  std::vector<PretrainBatch> val_batches;
  if (validation) {
    const auto vstories = collect_stories(*validation);
    Rng vrng(derive_seed(config.seed, "pretrain/validation"));
    std::vector<std::size_t> order(vstories.size());
    std::iota(order.begin(), order.end(), 0);
    for (const auto& g : make_groups(order, std::min(k, std::max<std::size_t>(order.size(), 1)))) {
      const auto sel = select(vstories, g);
      val_batches.push_back(build_batch(sel, encoder.vocab(), config, vrng, encoder.config().max_len));
    }
  }

  AdamW opt(config.optimizer);
  Gradients grads = encoder.zero_gradients();
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < encoder.params().size(); ++i)
    refs.push_back({&encoder.params()[i].value, &grads[i], encoder.params()[i].decay});

  PretrainResult result{Checkpoint{encoder, 0, {}}, 0, {}};
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(stories.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    sample_rng.shuffle(std::span(order));
    EpochLog log;
    log.epoch = epoch;
    std::size_t nb = 0;
    for (const auto& g : make_groups(order, k)) {
      const auto sel = select(stories, g);
      const auto batch = build_batch(sel, encoder.vocab(), config, mask_rng, encoder.config().max_len);
      if (config.objective != Objective::kMlmOnly) verify_negative_scope(batch, config.negative_scope);
      for (auto& gm : grads) gm.set_zero();
      const auto loss = batch_loss(encoder, batch, config, &grads);
      opt.step(refs);
      log.train.entity += loss.entity;
      log.train.mlm += loss.mlm;
      log.train.positive_pairs += loss.positive_pairs;
      log.train.negative_pool += loss.negative_pool;
      ++nb;
    }
    log.train.entity /= static_cast<double>(nb);
    log.train.mlm /= static_cast<double>(nb);
    log.train.total = log.train.entity + log.train.mlm;
    if (!val_batches.empty()) {
      double v = 0.0;
      for (const auto& b : val_batches) v += batch_loss(encoder, b, config, nullptr).total;
      log.val_loss = v / static_cast<double>(val_batches.size());
    } else {
      log.val_loss = log.train.total;
    }
    Checkpoint ckpt{encoder, opt.steps(), sample_rng.state() + "\n" + mask_rng.state()};
    if (on_epoch) on_epoch(log, ckpt);
    if (log.val_loss < best) {
      best = log.val_loss;
      result.best = std::move(ckpt);
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
  }
  if (config.epochs == 0) result.best = Checkpoint{encoder, 0, sample_rng.state() + "\n" + mask_rng.state()};
  return result;
}

}  // namespace corefcl
