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

#include "corefcl/encoder.hpp"
#include "corefcl/rng.hpp"
#include "doctest.h"

using namespace corefcl;

namespace {

Vocab toy_vocab(std::size_t extra) {
  auto tokens = Vocab::reserved();
  for (std::size_t i = 0; i < extra; ++i) tokens.push_back("t" + std::to_string(i));
  return Vocab::from_tokens(tokens);
}

Encoder toy_encoder(std::uint64_t seed = 3) {
  EncoderConfig c;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.ff_dim = 16;
  c.max_len = 12;
  c.seed = seed;
  const Vocab v = toy_vocab(13);
  c.vocab_size = v.size();
  return Encoder(c, v);
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("config validation") {
    EncoderConfig c;
    c.vocab_size = 10;
    CHECK_NOTHROW(c.validate());
    c.heads = 3;  // 64 % 3 != 0
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = EncoderConfig{};
    c.vocab_size = 10;
    c.layers = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = EncoderConfig{};
    c.vocab_size = 10;
    CHECK(encoder_config_from_json(to_json(c)) == c);
  }

  TEST_CASE("padding and shapes") {
    const auto b = EncoderBatch::pad({{7, 8, 9}, {10}});
    CHECK(b.batch == 2);
    CHECK(b.seq_len == 3);
    CHECK(b.at(1, 0) == 10);
    CHECK(b.at(1, 1) == Vocab::kPad);
    const Encoder enc = toy_encoder();
    const auto cache = enc.forward(b);
    CHECK(cache.output.rows() == 6);
    CHECK(cache.output.cols() == 8);
    CHECK(enc.mlm_logits(cache.output).cols() == enc.vocab().size());
  }

  TEST_CASE("trailing padding does not change real positions") {
    const Encoder enc = toy_encoder();
    const std::vector<int> s = {3, 9, 11, 12, 4};
    const auto a = enc.forward(EncoderBatch::pad({s}));
    const auto b = enc.forward(EncoderBatch::pad({s, {3, 7, 8, 9, 10, 14, 15, 4}}));
    for (std::size_t t = 0; t < s.size(); ++t)
      for (std::size_t j = 0; j < 8; ++j) CHECK(a.output(t, j) == doctest::Approx(b.output(t, j)).epsilon(1e-9));
  }

  TEST_CASE("identical rows give identical outputs and runs are deterministic") {
    const Encoder enc = toy_encoder();
    const auto c = enc.forward(EncoderBatch::pad({{3, 9, 10, 4}, {3, 9, 10, 4}}));
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 8; ++j) CHECK(c.output(t, j) == c.output(4 + t, j));
    CHECK(toy_encoder(5).parameter_bytes() == toy_encoder(5).parameter_bytes());
    CHECK(toy_encoder(5).parameter_bytes() != toy_encoder(6).parameter_bytes());
  }

  TEST_CASE("checkpoint round trip is bit-identical") {
    Checkpoint ck{toy_encoder(), 17, "abc\ndef"};
    const std::string bytes = serialize_checkpoint(ck);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.step == 17);
    CHECK(back.rng_state == "abc\ndef");
    CHECK(back.encoder.config() == ck.encoder.config());
    CHECK(back.encoder.vocab() == ck.encoder.vocab());
    CHECK(back.encoder.parameter_bytes() == ck.encoder.parameter_bytes());
    CHECK(serialize_checkpoint(back) == bytes);

    const auto dir = std::filesystem::temp_directory_path() / "corefcl_ckpt_test";
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "a.ckpt", ck);
    CHECK(load_checkpoint(dir / "a.ckpt").encoder.parameter_bytes() == ck.encoder.parameter_bytes());
    std::filesystem::remove_all(dir);

    CHECK_THROWS(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)));
    CHECK_THROWS(deserialize_checkpoint("garbage"));
  }

  TEST_CASE("relative error floor") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  }

  TEST_CASE("analytic gradients match finite differences") {
    EncoderConfig c;
    c.dim = 8;
    c.layers = 2;
    c.heads = 2;
    c.ff_dim = 16;
    c.max_len = 8;
    c.vocab_size = 20;
    c.seed = 4;
    const auto report = gradient_check(c, 1e-4);
    MESSAGE("max relative error " << report.max_rel_error);
    CHECK(report.passed);
    CHECK(report.entries.size() == 2 + 2 * 15 + 3);
  }
}
