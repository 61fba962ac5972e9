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

#ifndef COREFCL_VOCAB_HPP_
#define COREFCL_VOCAB_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "corefcl/corpus.hpp"

namespace corefcl {

// Whitespace-token vocabulary. Ids are dense from 0; the first ids are the
// reserved specials followed by the fixed tokens of the prompt templates.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr int kBos = 3;
  static constexpr int kEos = 4;
  static constexpr int kMentionOpen = 5;
  static constexpr int kMentionClose = 6;

  static const std::vector<std::string>& reserved();

  Vocab();
  // Corpus tokens with frequency >= min_freq, ordered by (-freq, token).
  static Vocab build(const Corpus& corpus, std::size_t min_freq = 2);
  // Throws std::invalid_argument unless `tokens` starts with reserved() and
  // has no duplicates.
  static Vocab from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const Sentence& sentence) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace corefcl

#endif  // COREFCL_VOCAB_HPP_
