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

#include "corefcl/vocab.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace corefcl {

const std::vector<std::string>& Vocab::reserved() {
  static const std::vector<std::string> kReserved = {
      "[PAD]", "[UNK]", "[MASK]", "[BOS]", "[EOS]", "<m>", "</m>",
      // prompt / masked-triple template tokens
      "The", "type", "of", "is", ".", "<", ",", "hasType", ">"};
  return kReserved;
}

Vocab::Vocab() {
  for (const auto& t : reserved()) add(t);
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token)) return;
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(const Corpus& corpus, std::size_t min_freq) {
  std::map<std::string, std::size_t> freq;
  for (const auto& story : corpus.stories())
    for (const auto& sent : story.sentences)
      for (const auto& tok : sent) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : items)
    if (n >= min_freq) v.add(tok);
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& res = reserved();
  if (tokens.size() < res.size() || !std::equal(res.begin(), res.end(), tokens.begin()))
    throw std::invalid_argument("vocabulary does not start with the reserved tokens");
  Vocab v;
  for (std::size_t i = res.size(); i < tokens.size(); ++i) {
    if (v.ids_.count(tokens[i])) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const Sentence& sentence) const {
  std::vector<int> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(id(t));
  return out;
}

}  // namespace corefcl
