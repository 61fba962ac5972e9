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

#ifndef COREFCL_CONSENSUS_HPP_
#define COREFCL_CONSENSUS_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "corefcl/corpus.hpp"

namespace corefcl {

// Unordered mention pair, stored with first < second.
struct Link {
  Mention first;
  Mention second;

  static Link make(const Mention& a, const Mention& b);
  friend bool operator==(const Link&, const Link&) = default;
  friend auto operator<=>(const Link&, const Link&) = default;
};

struct LinkSet {
  std::string story;
  std::set<Link> links;

  friend bool operator==(const LinkSet&, const LinkSet&) = default;
};

// How mentions from two systems are identified with each other.
//   kExact: same (story, sent, start, end)
//   kHead:  same (story, sent, head), for systems with differing boundaries
enum class MatchMode { kExact, kHead };

MatchMode parse_match_mode(const std::string& s);

// Clique reading: a chain of n mentions yields all n(n-1)/2 pairs.
LinkSet chains_to_links(const std::string& story, const std::vector<Chain>& chains);
std::map<std::string, LinkSet> chains_to_links(const CorefAnnotation& annotation);

// Links of `a` that `b` also predicts. Throws std::invalid_argument when the
// story ids differ.
LinkSet intersect(const LinkSet& a, const LinkSet& b, MatchMode mode = MatchMode::kExact);

// Connected components of the link graph (each has >= 2 mentions). Chains are
// sorted internally and ordered by their first mention.
std::vector<Chain> links_to_chains(const LinkSet& links);

// Per story: links_to_chains(intersect(links(a), links(b))). Stories covered by
// only one system contribute nothing. The result is named "consensus(A,B)".
CorefAnnotation consensus(const CorefAnnotation& a, const CorefAnnotation& b,
                          MatchMode mode = MatchMode::kExact);

}  // namespace corefcl

#endif  // COREFCL_CONSENSUS_HPP_
