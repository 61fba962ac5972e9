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

#include "corefcl/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace corefcl {

using nlohmann::json;

std::string Mention::to_string() const {
  std::ostringstream os;
  os << "mention(story=" << story << ", sent=" << sent << ", [" << start << "," << end
     << "), head=" << head << ")";
  return os.str();
}

std::size_t CorefAnnotation::chain_count() const {
  std::size_t n = 0;
  for (const auto& [id, chains] : chains) n += chains.size();
  return n;
}

void Corpus::add_story(Story story) {
  if (index_.count(story.id)) throw ValidationError("duplicate story id '" + story.id + "'");
  index_.emplace(story.id, stories_.size());
  stories_.push_back(std::move(story));
}

const Story* Corpus::find_story(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &stories_[it->second];
}

const Story& Corpus::story(const std::string& id) const {
  const Story* s = find_story(id);
  if (!s) throw ValidationError("unknown story '" + id + "'");
  return *s;
}

const Sentence& Corpus::sentence(const Mention& m) const {
  const Story& s = story(m.story);
  if (m.sent >= s.sentences.size()) throw ValidationError("sentence out of range: " + m.to_string());
  return s.sentences[m.sent];
}

const CorefAnnotation* Corpus::find_coref(const std::string& system) const {
  for (const auto& c : coref_)
    if (c.system == system) return &c;
  return nullptr;
}

std::optional<std::string> check_mention(const Corpus& corpus, const Mention& m) {
  const Story* s = corpus.find_story(m.story);
  if (!s) return "unknown story '" + m.story + "' in " + m.to_string();
  if (m.sent >= s->sentences.size()) return "sentence index out of range in " + m.to_string();
  const std::size_t len = s->sentences[m.sent].size();
  if (!(m.start < m.end)) return "empty or inverted span in " + m.to_string();
  if (m.end > len)
    return "span end exceeds sentence length " + std::to_string(len) + " in " + m.to_string();
  if (m.head < m.start || m.head >= m.end) return "head outside span in " + m.to_string();
  return std::nullopt;
}

namespace {

void check_chains(const Corpus& corpus, const CorefAnnotation& ann, const std::string& prefix) {
  for (const auto& [story_id, chains] : ann.chains) {
    std::set<Mention> seen;
    for (const auto& chain : chains) {
      if (chain.size() < 2)
        throw ValidationError(prefix + "chain with fewer than 2 mentions in system '" +
                              ann.system + "', story '" + story_id + "'");
      for (const auto& m : chain) {
        if (m.story != story_id)
          throw ValidationError(prefix + "chain mention from another story: " + m.to_string());
        if (auto err = check_mention(corpus, m)) throw ValidationError(prefix + *err);
        if (!seen.insert(m).second)
          throw ValidationError(prefix + "mention appears in two chains of system '" +
                                ann.system + "': " + m.to_string());
      }
    }
  }
}

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

template <typename T>
T field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(line, std::string("bad field '") + name + "': " + e.what());
  }
}

Mention mention_from(const json& obj, const std::string& story, std::size_t line) {
  Mention m;
  m.story = story;
  m.sent = field<std::size_t>(obj, "sent", line);
  m.start = field<std::size_t>(obj, "start", line);
  m.end = field<std::size_t>(obj, "end", line);
  m.head = field<std::size_t>(obj, "head", line);
  return m;
}

json mention_json(const Mention& m) {
  return json{{"sent", m.sent}, {"start", m.start}, {"end", m.end}, {"head", m.head}};
}

}  // namespace

void Corpus::validate() const {
  for (const auto& s : stories_) {
    if (s.sentences.empty()) throw ValidationError("story '" + s.id + "' has no sentences");
    for (const auto& sent : s.sentences) {
      if (sent.empty()) throw ValidationError("story '" + s.id + "' has an empty sentence");
      for (const auto& tok : sent)
        if (tok.empty()) throw ValidationError("story '" + s.id + "' has an empty token");
    }
  }
  for (const auto& tm : typed_) {
    if (auto err = check_mention(*this, tm.mention)) throw ValidationError(*err);
    if (tm.labels.empty() && tm.source != "predicted")
      throw ValidationError("typed mention without labels: " + tm.mention.to_string());
  }
  for (const auto& ann : coref_) check_chains(*this, ann, "");
}

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::vector<std::size_t> typed_lines;
  struct PendingCoref {
    std::size_t line;
    std::string system, story;
    std::vector<Chain> chains;
  };
  std::vector<PendingCoref> pending;

  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!obj.is_object()) throw ParseError(line, "expected a JSON object");
    const auto kind = field<std::string>(obj, "kind", line);
    if (kind == "story") {
      Story s;
      s.id = field<std::string>(obj, "id", line);
      s.sentences = field<std::vector<Sentence>>(obj, "sentences", line);
      if (s.sentences.empty()) throw ParseError(line, "story without sentences");
      for (const auto& sent : s.sentences) {
        if (sent.empty()) throw ParseError(line, "empty sentence in story '" + s.id + "'");
        for (const auto& tok : sent)
          if (tok.empty()) throw ParseError(line, "empty token in story '" + s.id + "'");
      }
      try {
        corpus.add_story(std::move(s));
      } catch (const ValidationError& e) {
        throw ParseError(line, e.what());
      }
    } else if (kind == "typed_mention") {
      TypedMention tm;
      tm.mention = mention_from(obj, field<std::string>(obj, "story", line), line);
      tm.labels = field<std::vector<std::string>>(obj, "labels", line);
      if (auto it = obj.find("source"); it != obj.end()) tm.source = field<std::string>(obj, "source", line);
      if (auto it = obj.find("scores"); it != obj.end())
        tm.scores = field<std::map<std::string, double>>(obj, "scores", line);
      if (tm.labels.empty() && tm.source != "predicted") throw ParseError(line, "empty label set");
      for (const auto& l : tm.labels)
        if (label_depth(l) == 0) throw ParseError(line, "label '" + l + "' has depth 0");
      corpus.typed_mentions().push_back(std::move(tm));
      typed_lines.push_back(line);
    } else if (kind == "coref") {
      PendingCoref pc;
      pc.line = line;
      pc.system = field<std::string>(obj, "system", line);
      pc.story = field<std::string>(obj, "story", line);
      const auto chains = field<json>(obj, "chains", line);
      if (!chains.is_array()) throw ParseError(line, "'chains' must be an array");
      for (const auto& jc : chains) {
        if (!jc.is_array()) throw ParseError(line, "each chain must be an array");
        Chain c;
        for (const auto& jm : jc) c.push_back(mention_from(jm, pc.story, line));
        std::sort(c.begin(), c.end());
        pc.chains.push_back(std::move(c));
      }
      pending.push_back(std::move(pc));
    } else {
      throw ParseError(line, "unknown kind '" + kind + "'");
    }
  }

  for (std::size_t i = 0; i < corpus.typed_mentions().size(); ++i) {
    const auto& tm = corpus.typed_mentions()[i];
    if (auto err = check_mention(corpus, tm.mention))
      throw ValidationError(line_prefix(typed_lines[i]) + *err);
  }
  for (auto& pc : pending) {
    CorefAnnotation* ann = nullptr;
    for (auto& a : corpus.coref())
      if (a.system == pc.system) ann = &a;
    if (!ann) {
      corpus.coref().push_back(CorefAnnotation{pc.system, {}});
      ann = &corpus.coref().back();
    }
    auto& dst = ann->chains[pc.story];
    for (auto& c : pc.chains) dst.push_back(std::move(c));
    CorefAnnotation one{pc.system, {{pc.story, dst}}};
    check_chains(corpus, one, line_prefix(pc.line));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.stories()) {
    json obj{{"kind", "story"}, {"id", s.id}, {"sentences", s.sentences}};
    out << obj.dump() << '\n';
  }
  for (const auto& tm : corpus.typed_mentions()) {
    json obj = mention_json(tm.mention);
    obj["kind"] = "typed_mention";
    obj["story"] = tm.mention.story;
    obj["labels"] = tm.labels;
    if (tm.source != "gold") obj["source"] = tm.source;
    if (!tm.scores.empty()) obj["scores"] = tm.scores;
    out << obj.dump() << '\n';
  }
  for (const auto& ann : corpus.coref()) {
    for (const auto& [story, chains] : ann.chains) {
      json jchains = json::array();
      for (const auto& c : chains) {
        json jc = json::array();
        for (const auto& m : c) jc.push_back(mention_json(m));
        jchains.push_back(std::move(jc));
      }
      json obj{{"kind", "coref"}, {"system", ann.system}, {"story", story}, {"chains", jchains}};
      out << obj.dump() << '\n';
    }
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
}

std::size_t resolve_head(const Mention& mention, const Sentence& sentence, HeadMode mode) {
  if (mode == HeadMode::kGiven) return mention.head;
  static const std::array<std::string_view, 9> kMarkers = {"of",   "in",   "on", "at", "for",
                                                           "with", "from", "to", "by"};
  for (std::size_t i = mention.start + 1; i < mention.end; ++i) {
    if (std::find(kMarkers.begin(), kMarkers.end(), sentence[i]) != kMarkers.end()) return i - 1;
  }
  return mention.end - 1;
}

std::size_t label_depth(const std::string& label) {
  std::size_t depth = 0;
  std::size_t i = 0;
  while (i < label.size()) {
    if (label[i] == '/') {
      ++i;
      continue;
    }
    ++depth;
    while (i < label.size() && label[i] != '/') ++i;
  }
  return depth;
}

std::vector<std::string> label_prefixes(const std::string& label) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= label.size(); ++i) {
    if (i == label.size() || label[i] == '/') out.push_back(label.substr(0, i));
  }
  return out;
}

}  // namespace corefcl
