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

#include "corefcl/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace corefcl {

namespace {

std::set<std::string> as_set(const LabelSet& s) { return {s.begin(), s.end()}; }

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("prediction/gold length mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
}

std::size_t overlap_count(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& x : a) n += b.count(x);
  return n;
}

}  // namespace

Prf prf_from_counts(double hits, double predicted, double gold) {
  Prf r;
  r.precision = predicted > 0 ? hits / predicted : 0.0;
  r.recall = gold > 0 ? hits / gold : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

double set_f1(const LabelSet& pred, const LabelSet& gold) {
  const auto p = as_set(pred), g = as_set(gold);
  return prf_from_counts(static_cast<double>(overlap_count(p, g)), static_cast<double>(p.size()),
                         static_cast<double>(g.size()))
      .f1;
}

Prf micro_prf(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  check_aligned(pred.size(), gold.size());
  std::size_t hits = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = as_set(pred[i]), g = as_set(gold[i]);
    hits += overlap_count(p, g);
    np += p.size();
    ng += g.size();
  }
  return prf_from_counts(static_cast<double>(hits), static_cast<double>(np), static_cast<double>(ng));
}

double micro_f1(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  return micro_prf(pred, gold).f1;
}

double macro_f1(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  check_aligned(pred.size(), gold.size());
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += set_f1(pred[i], gold[i]);
  return sum / static_cast<double>(pred.size());
}

SpanCounts span_counts(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode) {
  SpanCounts c;
  c.predicted = pred.size();
  c.gold = gold.size();
  if (mode == SpanMatch::kStrict) {
    std::multiset<TypedSpan> g(gold.begin(), gold.end());
    for (const auto& p : pred) {
      auto it = g.find(p);
      if (it != g.end()) {
        ++c.hits;
        g.erase(it);
      }
    }
    return c;
  }
  using Key = std::pair<std::string, std::size_t>;
  std::map<Key, std::vector<TypedSpan>> ps, gs;
  for (const auto& p : pred) ps[{p.story, p.sent}].push_back(p);
  for (const auto& g : gold) gs[{g.story, g.sent}].push_back(g);
  auto by_position = [](const TypedSpan& a, const TypedSpan& b) {
    return std::tie(a.start, a.end, a.type) < std::tie(b.start, b.end, b.type);
  };
  for (auto& [key, plist] : ps) {
    auto git = gs.find(key);
    if (git == gs.end()) continue;
    auto& glist = git->second;
    std::sort(plist.begin(), plist.end(), by_position);
    std::sort(glist.begin(), glist.end(), by_position);
    std::vector<bool> used(glist.size(), false);
    for (const auto& p : plist) {
      for (std::size_t j = 0; j < glist.size(); ++j) {
        const auto& g = glist[j];
        if (used[j] || g.type != p.type) continue;
        if (p.start < g.end && g.start < p.end) {
          used[j] = true;
          ++c.hits;
          break;
        }
      }
    }
  }
  return c;
}

Prf span_prf(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode) {
  const auto c = span_counts(pred, gold, mode);
  return prf_from_counts(static_cast<double>(c.hits), static_cast<double>(c.predicted),
                         static_cast<double>(c.gold));
}

double span_f1(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode) {
  return span_prf(pred, gold, mode).f1;
}

std::size_t depth_bucket(const LabelSet& gold) {
  std::size_t d = 0;
  for (const auto& l : gold) d = std::max(d, label_depth(l));
  return std::min<std::size_t>(d, 3);
}

std::map<std::size_t, PartitionScores> depth_partition(std::span<const LabelSet> pred,
                                                       std::span<const LabelSet> gold) {
  check_aligned(pred.size(), gold.size());
  std::map<std::size_t, std::pair<std::vector<LabelSet>, std::vector<LabelSet>>> groups;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& g = groups[depth_bucket(gold[i])];
    g.first.push_back(pred[i]);
    g.second.push_back(gold[i]);
  }
  std::map<std::size_t, PartitionScores> out;
  for (const auto& [depth, g] : groups) {
    out[depth] = {g.first.size(), micro_f1(g.first, g.second), macro_f1(g.first, g.second)};
  }
  return out;
}

std::map<std::string, double> per_label_recall(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  std::map<std::string, double> out;
  for (const auto& [label, s] : per_label_scores(pred, gold)) out[label] = s.prf.recall;
  return out;
}

std::map<std::string, LabelScores> per_label_scores(std::span<const LabelSet> pred,
                                                    std::span<const LabelSet> gold) {
  check_aligned(pred.size(), gold.size());
  std::map<std::string, std::array<std::size_t, 3>> counts;  // hits, predicted, gold
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = as_set(pred[i]), g = as_set(gold[i]);
    for (const auto& l : p) {
      ++counts[l][1];
      if (g.count(l)) ++counts[l][0];
    }
    for (const auto& l : g) ++counts[l][2];
  }
  std::map<std::string, LabelScores> out;
  for (const auto& [label, c] : counts) {
    if (c[2] == 0) continue;
    out[label] = {prf_from_counts(static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])),
                  c[2]};
  }
  return out;
}

std::vector<ConfidenceRow> confidence_report(const std::vector<std::string>& labels,
                                             std::span<const std::vector<double>> probabilities,
                                             std::span<const LabelSet> gold) {
  check_aligned(probabilities.size(), gold.size());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  std::vector<ConfidenceRow> rows;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& l : gold[i]) {
      auto it = index.find(l);
      const double p = it == index.end() ? 0.0 : probabilities[i].at(it->second);
      rows.push_back({i, l, p});
    }
  }
  return rows;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"mode", mode}, {"instances", instances}, {"micro_f1", micro_f1}, {"macro_f1", macro_f1}};
  if (strict_f1) j["strict_f1"] = *strict_f1;
  if (lenient_f1) j["lenient_f1"] = *lenient_f1;
  auto& pl = j["per_label"] = nlohmann::json::object();
  for (const auto& [label, s] : per_label)
    pl[label] = {{"precision", s.prf.precision}, {"recall", s.prf.recall}, {"f1", s.prf.f1}, {"support", s.support}};
  auto& parts = j["partitions"] = nlohmann::json::object();
  for (const auto& [depth, s] : partitions)
    parts[depth == 3 ? "3+" : std::to_string(depth)] = {
        {"instances", s.instances}, {"micro_f1", s.micro_f1}, {"macro_f1", s.macro_f1}};
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %10s\n", "metric", "value");
  os << line;
  auto row = [&](const std::string& name, double v) {
    std::snprintf(line, sizeof line, "%-32s %10.4f\n", name.c_str(), v);
    os << line;
  };
  std::snprintf(line, sizeof line, "%-32s %10zu\n", "instances", instances);
  os << line;
  row("micro_f1", micro_f1);
  row("macro_f1", macro_f1);
  if (strict_f1) row("strict_f1", *strict_f1);
  if (lenient_f1) row("lenient_f1", *lenient_f1);
  if (!partitions.empty()) {
    std::snprintf(line, sizeof line, "\n%-10s %10s %10s %10s\n", "depth", "n", "micro", "macro");
    os << line;
    for (const auto& [depth, s] : partitions) {
      std::snprintf(line, sizeof line, "%-10s %10zu %10.4f %10.4f\n", depth == 3 ? "3+" : std::to_string(depth).c_str(),
                    s.instances, s.micro_f1, s.macro_f1);
      os << line;
    }
  }
  if (!per_label.empty()) {
    std::snprintf(line, sizeof line, "\n%-32s %8s %8s %8s %8s\n", "label", "P", "R", "F1", "support");
    os << line;
    for (const auto& [label, s] : per_label) {
      std::snprintf(line, sizeof line, "%-32s %8.4f %8.4f %8.4f %8zu\n", label.c_str(), s.prf.precision,
                    s.prf.recall, s.prf.f1, s.support);
      os << line;
    }
  }
  return os.str();
}

EvalReport typing_report(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  EvalReport r;
  r.mode = "typing";
  r.instances = gold.size();
  r.micro_f1 = micro_f1(pred, gold);
  r.macro_f1 = macro_f1(pred, gold);
  r.per_label = per_label_scores(pred, gold);
  r.partitions = depth_partition(pred, gold);
  return r;
}

EvalReport span_report(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold) {
  EvalReport r;
  r.mode = "span";
  r.instances = gold.size();
  r.strict_f1 = span_f1(pred, gold, SpanMatch::kStrict);
  r.lenient_f1 = span_f1(pred, gold, SpanMatch::kLenient);
  r.micro_f1 = *r.strict_f1;
  r.macro_f1 = *r.strict_f1;
  std::map<std::string, std::array<std::size_t, 3>> counts;
  std::multiset<TypedSpan> g(gold.begin(), gold.end());
  for (const auto& p : pred) {
    ++counts[p.type][1];
    auto it = g.find(p);
    if (it != g.end()) {
      ++counts[p.type][0];
      g.erase(it);
    }
  }
  for (const auto& s : gold) ++counts[s.type][2];
  for (const auto& [label, c] : counts) {
    if (c[2] == 0) continue;
    r.per_label[label] = {
        prf_from_counts(static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])), c[2]};
  }
  return r;
}

namespace {

std::map<Mention, LabelSet> labels_by_mention(const Corpus& c) {
  std::map<Mention, LabelSet> out;
  for (const auto& tm : c.typed_mentions()) {
    auto& s = out[tm.mention];
    s.insert(s.end(), tm.labels.begin(), tm.labels.end());
  }
  return out;
}

}  // namespace

EvalReport evaluate_typing_corpora(const Corpus& pred, const Corpus& gold) {
  const auto p = labels_by_mention(pred);
  std::vector<LabelSet> ps, gs;
  for (const auto& [m, g] : labels_by_mention(gold)) {
    if (g.empty()) continue;
    auto it = p.find(m);
    ps.push_back(it == p.end() ? LabelSet{} : it->second);
    gs.push_back(g);
  }
  return typing_report(ps, gs);
}

std::string coarse_type(const LabelSet& labels) {
  std::string deepest;
  std::size_t depth = 0;
  for (const auto& l : labels) {
    if (label_depth(l) > depth) {
      depth = label_depth(l);
      deepest = l;
    }
  }
  if (deepest.empty()) return {};
  return label_prefixes(deepest).front();
}

EvalReport evaluate_span_corpora(const Corpus& pred, const Corpus& gold) {
  auto spans = [](const Corpus& c) {
    std::vector<TypedSpan> out;
    for (const auto& [m, labels] : labels_by_mention(c)) {
      const auto t = coarse_type(labels);
      if (!t.empty()) out.push_back({m.story, m.sent, m.start, m.end, t});
    }
    return out;
  };
  return span_report(spans(pred), spans(gold));
}

}  // namespace corefcl
