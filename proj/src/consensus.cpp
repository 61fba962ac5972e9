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

#include "corefcl/consensus.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace corefcl {

Link Link::make(const Mention& a, const Mention& b) {
  if (a == b) throw std::invalid_argument("link endpoints must differ: " + a.to_string());
  return a < b ? Link{a, b} : Link{b, a};
}

MatchMode parse_match_mode(const std::string& s) {
  if (s == "exact") return MatchMode::kExact;
  if (s == "head") return MatchMode::kHead;
  throw std::invalid_argument("unknown match mode '" + s + "' (expected exact|head)");
}

LinkSet chains_to_links(const std::string& story, const std::vector<Chain>& chains) {
  LinkSet out{story, {}};
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < chain.size(); ++i)
      for (std::size_t j = i + 1; j < chain.size(); ++j) out.links.insert(Link::make(chain[i], chain[j]));
  }
  return out;
}

std::map<std::string, LinkSet> chains_to_links(const CorefAnnotation& annotation) {
  std::map<std::string, LinkSet> out;
  for (const auto& [story, chains] : annotation.chains) out.emplace(story, chains_to_links(story, chains));
  return out;
}

namespace {

using HeadKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;

HeadKey head_key(const Link& l) {
  auto a = std::make_pair(l.first.sent, l.first.head);
  auto b = std::make_pair(l.second.sent, l.second.head);
  if (b < a) std::swap(a, b);
  return {a.first, a.second, b.first, b.second};
}

}  // namespace

LinkSet intersect(const LinkSet& a, const LinkSet& b, MatchMode mode) {
  if (a.story != b.story)
    throw std::invalid_argument("intersect: story mismatch '" + a.story + "' vs '" + b.story + "'");
  LinkSet out{a.story, {}};
  if (mode == MatchMode::kExact) {
    std::set_intersection(a.links.begin(), a.links.end(), b.links.begin(), b.links.end(),
                          std::inserter(out.links, out.links.end()));
    return out;
  }
  std::set<HeadKey> keys;
  for (const auto& l : b.links) keys.insert(head_key(l));
  for (const auto& l : a.links)
    if (keys.count(head_key(l))) out.links.insert(l);
  return out;
}

std::vector<Chain> links_to_chains(const LinkSet& links) {
  std::map<Mention, std::size_t> ids;
  std::vector<Mention> mentions;
  for (const auto& l : links.links) {
    for (const Mention* m : {&l.first, &l.second}) {
      if (ids.emplace(*m, mentions.size()).second) mentions.push_back(*m);
    }
  }
  std::vector<std::size_t> parent(mentions.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : links.links) {
    const std::size_t ra = find(ids[l.first]), rb = find(ids[l.second]);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<std::size_t, Chain> groups;
  for (std::size_t i = 0; i < mentions.size(); ++i) groups[find(i)].push_back(mentions[i]);
  std::vector<Chain> out;
  for (auto& [root, chain] : groups) {
    std::sort(chain.begin(), chain.end());
    out.push_back(std::move(chain));
  }
  std::sort(out.begin(), out.end(), [](const Chain& x, const Chain& y) { return x.front() < y.front(); });
  return out;
}

CorefAnnotation consensus(const CorefAnnotation& a, const CorefAnnotation& b, MatchMode mode) {
  CorefAnnotation out;
  out.system = "consensus(" + a.system + "," + b.system + ")";
  const auto la = chains_to_links(a);
  const auto lb = chains_to_links(b);
  for (const auto& [story, links] : la) {
    auto it = lb.find(story);
    if (it == lb.end()) continue;
    auto chains = links_to_chains(intersect(links, it->second, mode));
    if (!chains.empty()) out.chains.emplace(story, std::move(chains));
  }
  return out;
}

}  // namespace corefcl
