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

#include <filesystem>

#include "corefcl/rng.hpp"
#include "corefcl/spandet.hpp"
#include "doctest.h"

using namespace corefcl;

namespace {

// Non-overlapping spans over n tokens; adjacent spans allowed when `gap` is 0.
std::vector<LabeledSpan> random_spans(std::size_t n, std::size_t tags, std::size_t gap, Rng& rng) {
  std::vector<LabeledSpan> out;
  std::size_t i = 0;
  while (i < n) {
    if (rng.bernoulli(0.3)) {
      const std::size_t len = 1 + rng.below(std::min<std::size_t>(3, n - i));
      out.push_back({i, i + len, 1 + rng.below(tags)});
      i += len + gap;
    } else {
      ++i;
    }
  }
  return out;
}

Corpus toy_corpus(std::size_t copies) {
  // The verb after the name decides the type. Every token is inside or next
  // to the span, so none is unseen in training.
  Corpus c;
  const char* names[] = {"Rex", "Max", "Kim"};
  std::size_t n = 0;
  for (std::size_t k = 0; k < copies; ++k) {
    for (const char* name : names) {
      for (int per = 0; per < 2; ++per) {
        const std::string id = "t" + std::to_string(n++);
        c.add_story({id, {{"today", name, per ? "works" : "barks"}}});
        c.typed_mentions().push_back({Mention{id, 0, 1, 2, 1}, {per ? "/per" : "/ani"}});
      }
    }
  }
  return c;
}

Encoder toy_encoder(const Corpus& c) {
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ff_dim = 32;
  cfg.max_len = 16;
  cfg.seed = 5;
  const Vocab v = Vocab::build(c, 1);
  cfg.vocab_size = v.size();
  return Encoder(cfg, v);
}

}  // namespace

TEST_SUITE("spandet") {
  TEST_CASE("tag set") {
    const TagSet t({"/per", "/org"});
    CHECK(t.size() == 3);
    CHECK(t.name(TagSet::kOutside) == "O");
    CHECK(t.tag("/org") == 2);
    CHECK_THROWS_AS(t.tag("/loc"), std::invalid_argument);
    CHECK_THROWS_AS(TagSet({"/per", "/per"}), std::invalid_argument);
    CHECK_THROWS_AS(TagSet({"O"}), std::invalid_argument);
  }

  TEST_CASE("training token examples") {
    const std::vector<LabeledSpan> one = {{2, 4, 1}};
    CHECK(training_tokens(7, one) == std::vector<TokenTag>{{1, 0}, {2, 1}, {3, 1}, {4, 0}});
    const std::vector<LabeledSpan> whole = {{0, 5, 2}};
    CHECK(training_tokens(5, whole) == std::vector<TokenTag>{{0, 2}, {1, 2}, {2, 2}, {3, 2}, {4, 2}});
    CHECK(training_tokens(6, {}).empty());
    const std::vector<LabeledSpan> overlap = {{1, 3, 1}, {2, 4, 1}};
    CHECK_THROWS_AS(training_tokens(6, overlap), std::invalid_argument);
    const std::vector<LabeledSpan> outside = {{1, 3, 0}};
    CHECK_THROWS_AS(training_tokens(6, outside), std::invalid_argument);
    const std::vector<LabeledSpan> past = {{4, 7, 1}};
    CHECK_THROWS_AS(training_tokens(6, past), std::invalid_argument);
  }

  TEST_CASE("decode examples") {
    const std::vector<std::size_t> a = {0, 1, 1, 0};
    CHECK(decode(a) == std::vector<LabeledSpan>{{1, 3, 1}});
    const std::vector<std::size_t> b = {1, 2};
    CHECK(decode(b) == std::vector<LabeledSpan>{{0, 1, 1}, {1, 2, 2}});
    const std::vector<std::size_t> c = {0, 0, 0};
    CHECK(decode(c).empty());
    CHECK(decode(std::vector<std::size_t>{}).empty());
  }

  TEST_CASE("random sentences: filter soundness, balance and decode consistency") {
    Rng rng(77);
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t n = 1 + rng.below(20);
      const auto spans = random_spans(n, 3, rng.below(2), rng);
      const auto tt = training_tokens(n, spans);
      std::size_t outside = 0;
      for (const auto& t : tt) {
        bool inside = false, adjacent = false;
        for (const auto& s : spans) {
          inside = inside || (t.index >= s.start && t.index < s.end);
          adjacent = adjacent || t.index + 1 == s.start || t.index == s.end;
        }
        if (t.tag == TagSet::kOutside) {
          CHECK_FALSE(inside);
          CHECK(adjacent);
          ++outside;
        } else {
          CHECK(inside);
        }
      }
      CHECK(outside <= 2 * spans.size());

      std::vector<std::size_t> paint(n, TagSet::kOutside);
      for (const auto& s : spans)
        for (std::size_t i = s.start; i < s.end; ++i) paint[i] = s.tag;
      bool touching = false;
      for (std::size_t k = 1; k < spans.size(); ++k)
        touching = touching || (spans[k].start == spans[k - 1].end && spans[k].tag == spans[k - 1].tag);
      if (!touching) CHECK(decode(paint) == spans);
    }
  }

  TEST_CASE("tagger loss gradient matches finite differences") {
    Rng rng(9);
    TaggerModel m(TagSet({"/a", "/b"}), 4);
    for (auto& w : m.weights().values()) w = rng.normal(0.0, 1.0);
    for (auto& b : m.bias().values()) b = rng.normal(0.0, 1.0);
    Matrix x(6, 4);
    for (auto& v : x.values()) v = rng.normal(0.0, 1.0);
    const std::vector<std::size_t> y = {0, 1, 2, 2, 0, 1};
    const auto r = tagger_loss(m, x, y);
    auto fd = [&](double& slot) {
      const double s = slot;
      slot = s + 1e-5;
      const double up = tagger_loss(m, x, y).loss;
      slot = s - 1e-5;
      const double down = tagger_loss(m, x, y).loss;
      slot = s;
      return (up - down) / 2e-5;
    };
    for (std::size_t i = 0; i < m.weights().size(); ++i) CHECK(relative_error(r.d_weights[i], fd(m.weights()[i])) < 1e-7);
    for (std::size_t i = 0; i < m.bias().size(); ++i) CHECK(relative_error(r.d_bias[i], fd(m.bias()[i])) < 1e-7);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(relative_error(r.d_embeddings[i], fd(x[i])) < 1e-7);
    CHECK_THROWS_AS(tagger_loss(m, x, std::vector<std::size_t>{0}), std::invalid_argument);
  }

  TEST_CASE("span sentences from a corpus") {
    const Corpus c = toy_corpus(1);
    const auto types = span_types(c);
    CHECK(types == std::vector<std::string>{"/ani", "/per"});
    const TagSet tags(types);
    const auto ss = span_sentences(c, tags);
    REQUIRE(ss.size() == 6);
    CHECK(ss[0].spans == std::vector<LabeledSpan>{{1, 2, tags.tag("/ani")}});
    CHECK(ss[1].spans == std::vector<LabeledSpan>{{1, 2, tags.tag("/per")}});
  }

  TEST_CASE("toy tagger reaches strict F1 1 on held-out copies") {
    const Corpus train = toy_corpus(2);
    const Corpus test = toy_corpus(1);
    const Encoder enc = toy_encoder(train);
    const TagSet tags(span_types(train));
    const auto tr = span_sentences(train, tags);
    const auto te = span_sentences(test, tags);
    TaggerTrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_sentences = 4;
    cfg.optimizer.lr = 5e-2;
    const auto r = train_tagger(tr, tags, enc, cfg);
    CHECK(r.encoder.parameter_bytes() == enc.parameter_bytes());
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    const auto pred = predict_spans(r.model, r.encoder, te);
    std::vector<TypedSpan> gold;
    for (const auto& s : te)
      for (const auto& sp : s.spans) gold.push_back({s.story, s.sent, sp.start, sp.end, tags.name(sp.tag)});
    CHECK(span_f1(pred, gold, SpanMatch::kStrict) == 1.0);

    const auto again = train_tagger(tr, tags, enc, cfg);
    CHECK(again.model == r.model);
  }

  TEST_CASE("zero learning rate and fine-tuning") {
    const Corpus train = toy_corpus(1);
    const Encoder enc = toy_encoder(train);
    const TagSet tags(span_types(train));
    const auto tr = span_sentences(train, tags);
    TaggerTrainConfig cfg;
    cfg.epochs = 3;
    cfg.optimizer.lr = 0.0;
    const auto r = train_tagger(tr, tags, enc, cfg);
    CHECK(r.model == TaggerModel(tags, enc.config().dim));

    cfg.optimizer.lr = 1e-2;
    cfg.frozen = false;
    cfg.encoder_lr = 1e-3;
    CHECK(train_tagger(tr, tags, enc, cfg).encoder.parameter_bytes() != enc.parameter_bytes());
  }

  TEST_CASE("nothing to train on") {
    Corpus c;
    c.add_story({"e", {{"no", "entities", "here"}}});
    const Encoder enc = toy_encoder(c);
    const TagSet tags({"/x"});
    const auto ss = span_sentences(c, tags);
    CHECK_THROWS_AS(train_tagger(ss, tags, enc, TaggerTrainConfig{}), std::invalid_argument);
  }

  TEST_CASE("model and config JSON round trips") {
    TaggerModel m(TagSet({"/a", "/b"}), 3);
    m.weights()(2, 1) = 0.3;
    m.bias()(0, 0) = -2.0 / 7.0;
    CHECK(TaggerModel::from_json(m.to_json()) == m);
    const auto path = std::filesystem::temp_directory_path() / "corefcl_tagger.json";
    m.save(path);
    CHECK(TaggerModel::load(path) == m);
    std::filesystem::remove(path);
    TaggerTrainConfig c;
    c.frozen = false;
    c.epochs = 4;
    CHECK(to_json(tagger_config_from_json(to_json(c))) == to_json(c));
  }
}
