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
#include "doctest.h"
#include "oracles.hpp"

using namespace corefcl;

namespace {

Mention m(std::size_t i) { return Mention{"s", 0, i, i + 1, i}; }

}  // namespace

TEST_SUITE("consensus") {
  TEST_CASE("chains become cliques of links") {
    auto l3 = chains_to_links("s", {{m(1), m(2), m(3)}});
    CHECK(l3.links == std::set<Link>{Link::make(m(1), m(2)), Link::make(m(1), m(3)), Link::make(m(2), m(3))});
    CHECK(chains_to_links("s", {{m(1), m(2)}}).links.size() == 1);
    auto two = chains_to_links("s", {{m(1), m(2)}, {m(3), m(4)}});
    CHECK(two.links == std::set<Link>{Link::make(m(1), m(2)), Link::make(m(3), m(4))});
    CHECK(Link::make(m(2), m(1)) == Link::make(m(1), m(2)));
    CHECK_THROWS_AS(Link::make(m(1), m(1)), std::invalid_argument);
  }

  TEST_CASE("intersection") {
    const auto a = chains_to_links("s", {{m(1), m(2), m(3)}});
    const auto b = chains_to_links("s", {{m(1), m(2)}});
    CHECK(intersect(a, b).links == b.links);
    CHECK(intersect(a, chains_to_links("s", {{m(5), m(6)}})).links.empty());
    CHECK(intersect(a, a) == a);
    CHECK_THROWS_AS(intersect(a, chains_to_links("t", {})), std::invalid_argument);
  }

  TEST_CASE("head matching identifies mentions with different boundaries") {
    const Mention wide{"s", 0, 0, 3, 2}, narrow{"s", 0, 2, 3, 2};
    const Mention other{"s", 1, 0, 1, 0};
    const auto a = chains_to_links("s", {{wide, other}});
    const auto b = chains_to_links("s", {{narrow, other}});
    CHECK(intersect(a, b, MatchMode::kExact).links.empty());
    const auto h = intersect(a, b, MatchMode::kHead);
    REQUIRE(h.links.size() == 1);
    CHECK(h.links.begin()->first.end == 3);  // a's mentions are kept
    CHECK(parse_match_mode("head") == MatchMode::kHead);
    CHECK_THROWS_AS(parse_match_mode("fuzzy"), std::invalid_argument);
  }

  TEST_CASE("connected components") {
    LinkSet path{"s", {Link::make(m(1), m(2)), Link::make(m(2), m(3))}};
    CHECK(links_to_chains(path) == std::vector<Chain>{{m(1), m(2), m(3)}});
    LinkSet two{"s", {Link::make(m(3), m(4)), Link::make(m(1), m(2))}};
    CHECK(links_to_chains(two) == std::vector<Chain>{{m(1), m(2)}, {m(3), m(4)}});
    CHECK(links_to_chains(LinkSet{"s", {}}).empty());
  }

  TEST_CASE("consensus examples") {
    CorefAnnotation a{"A", {{"s", {{m(1), m(2), m(3)}}}}};
    CorefAnnotation b{"B", {{"s", {{m(1), m(2)}}}}};
    auto c = consensus(a, b);
    CHECK(c.system == "consensus(A,B)");
    CHECK(c.chains.at("s") == std::vector<Chain>{{m(1), m(2)}});
    CHECK(consensus(a, a).chains == a.chains);

    CorefAnnotation x{"A", {{"s", {{m(1), m(2)}, {m(3), m(4)}}}}};
    CorefAnnotation y{"B", {{"s", {{m(1), m(2), m(3), m(4)}}}}};
    CHECK(consensus(x, y).chains.at("s") == std::vector<Chain>{{m(1), m(2)}, {m(3), m(4)}});

    CorefAnnotation only{"B", {{"t", {{Mention{"t", 0, 0, 1, 0}, Mention{"t", 0, 1, 2, 1}}}}}};
    CHECK(consensus(a, only).chains.empty());
  }

  TEST_CASE("random instances match the brute-force oracle and are monotone") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
      const auto t = oracle::random_two_systems(rng);
      const auto c = consensus(t.a, t.b);
      CHECK(oracle::as_partition(c) == oracle::brute_consensus(t));
      const auto links = chains_to_links(c);
      const auto la = chains_to_links(t.a), lb = chains_to_links(t.b);
      for (const auto& [story, ls] : links) {
        for (const auto& l : ls.links) {
          CHECK(la.at(story).links.count(l) == 1);
          CHECK(lb.at(story).links.count(l) == 1);
        }
      }
      // consensus with itself changes nothing
      CHECK(oracle::as_partition(consensus(c, c)) == oracle::as_partition(c));
    }
  }
}
