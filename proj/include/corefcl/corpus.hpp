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

#ifndef COREFCL_CORPUS_HPP_
#define COREFCL_CORPUS_HPP_

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefcl {

// Malformed input line. `line` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Sentence = std::vector<std::string>;

struct Story {
  std::string id;
  std::vector<Sentence> sentences;

  friend bool operator==(const Story&, const Story&) = default;
};

// A contiguous token span [start, end) inside one sentence. Identity (and
// therefore ==, <=>) is (story, sent, start, end); `head` is an attribute.
struct Mention {
  std::string story;
  std::size_t sent = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t head = 0;

  friend bool operator==(const Mention& a, const Mention& b) {
    return a.story == b.story && a.sent == b.sent && a.start == b.start && a.end == b.end;
  }
  friend std::strong_ordering operator<=>(const Mention& a, const Mention& b) {
    if (auto c = a.story <=> b.story; c != 0) return c;
    if (auto c = a.sent <=> b.sent; c != 0) return c;
    if (auto c = a.start <=> b.start; c != 0) return c;
    return a.end <=> b.end;
  }

  std::size_t length() const { return end - start; }
  std::string to_string() const;
};

struct TypedMention {
  Mention mention;
  std::vector<std::string> labels;
  // "gold" for annotations, "predicted" for model output. Predicted records
  // may carry an empty label set and per-label probabilities.
  std::string source = "gold";
  std::map<std::string, double> scores;

  friend bool operator==(const TypedMention& a, const TypedMention& b) {
    return a.mention == b.mention && a.mention.head == b.mention.head &&
           a.labels == b.labels && a.source == b.source && a.scores == b.scores;
  }
};

// Mentions of one chain, kept sorted.
using Chain = std::vector<Mention>;

struct CorefAnnotation {
  std::string system;
  // story id -> chains of that story
  std::map<std::string, std::vector<Chain>> chains;

  std::size_t chain_count() const;
  friend bool operator==(const CorefAnnotation&, const CorefAnnotation&) = default;
};

class Corpus {
 public:
  void add_story(Story story);
  const std::vector<Story>& stories() const { return stories_; }
  const Story* find_story(const std::string& id) const;
  const Story& story(const std::string& id) const;
  const Sentence& sentence(const Mention& m) const;

  std::vector<TypedMention>& typed_mentions() { return typed_; }
  const std::vector<TypedMention>& typed_mentions() const { return typed_; }

  std::vector<CorefAnnotation>& coref() { return coref_; }
  const std::vector<CorefAnnotation>& coref() const { return coref_; }
  const CorefAnnotation* find_coref(const std::string& system) const;

  // Throws ValidationError naming the first offending record.
  void validate() const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.stories_ == b.stories_ && a.typed_ == b.typed_ && a.coref_ == b.coref_;
  }

 private:
  std::vector<Story> stories_;
  std::map<std::string, std::size_t> index_;
  std::vector<TypedMention> typed_;
  std::vector<CorefAnnotation> coref_;
};

// Checks the Mention invariants against `corpus`; returns an error message or
// nullopt.
std::optional<std::string> check_mention(const Corpus& corpus, const Mention& m);

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

enum class HeadMode { kGiven, kHeuristic };

// `kGiven` returns mention.head. `kHeuristic` returns the token before the
// leftmost preposition marker inside the span (markers at the span start are
// ignored), or the last span token when there is none.
std::size_t resolve_head(const Mention& mention, const Sentence& sentence, HeadMode mode);

// Number of path segments: "/a/b" -> 2.
std::size_t label_depth(const std::string& label);
// "/a/b/c" -> {"/a", "/a/b", "/a/b/c"}
std::vector<std::string> label_prefixes(const std::string& label);

}  // namespace corefcl

#endif  // COREFCL_CORPUS_HPP_
