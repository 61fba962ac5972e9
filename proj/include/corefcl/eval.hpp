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

#ifndef COREFCL_EVAL_HPP_
#define COREFCL_EVAL_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corefcl/corpus.hpp"
#include "json.hpp"

namespace corefcl {

// Duplicates inside one set are ignored.
using LabelSet = std::vector<std::string>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// F1 from counts; empty denominators give 0.
Prf prf_from_counts(double hits, double predicted, double gold);
// Set F1 of one instance.
double set_f1(const LabelSet& pred, const LabelSet& gold);

// Both throw std::invalid_argument when the lists differ in length.
Prf micro_prf(std::span<const LabelSet> pred, std::span<const LabelSet> gold);
double micro_f1(std::span<const LabelSet> pred, std::span<const LabelSet> gold);
// Mean of per-instance set F1 (0 for an empty list).
double macro_f1(std::span<const LabelSet> pred, std::span<const LabelSet> gold);

struct TypedSpan {
  std::string story;
  std::size_t sent = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const TypedSpan&) const = default;
};

enum class SpanMatch { kStrict, kLenient };

struct SpanCounts {
  std::size_t hits = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// Strict: identical (story, sent, start, end, type). Lenient: same type and
// overlapping token ranges, paired one-to-one greedily: predictions in
// (start, end, type) order each take the first unmatched gold of the
// sentence in the same order.
SpanCounts span_counts(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode);
Prf span_prf(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode);
double span_f1(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold, SpanMatch mode);

// Max label depth of a gold set, clamped to 3 (the "3+" partition).
std::size_t depth_bucket(const LabelSet& gold);

struct PartitionScores {
  std::size_t instances = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

std::map<std::size_t, PartitionScores> depth_partition(std::span<const LabelSet> pred,
                                                       std::span<const LabelSet> gold);

// Fraction of each gold label's occurrences that were also predicted. Labels
// absent from gold are omitted.
std::map<std::string, double> per_label_recall(std::span<const LabelSet> pred, std::span<const LabelSet> gold);

struct LabelScores {
  Prf prf;
  std::size_t support = 0;
};

std::map<std::string, LabelScores> per_label_scores(std::span<const LabelSet> pred,
                                                    std::span<const LabelSet> gold);

struct ConfidenceRow {
  std::size_t instance = 0;
  std::string label;
  double probability = 0.0;
};

// One row per (instance, gold label); `probabilities[i]` is aligned with
// `labels`. A gold label the model does not know gets probability 0.
std::vector<ConfidenceRow> confidence_report(const std::vector<std::string>& labels,
                                             std::span<const std::vector<double>> probabilities,
                                             std::span<const LabelSet> gold);

struct EvalReport {
  std::string mode;  // "typing" or "span"
  std::size_t instances = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> strict_f1;
  std::optional<double> lenient_f1;
  std::map<std::string, LabelScores> per_label;
  std::map<std::size_t, PartitionScores> partitions;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

EvalReport typing_report(std::span<const LabelSet> pred, std::span<const LabelSet> gold);
// For spans, micro/macro F1 are computed over per-span type sets of strictly
// matching spans and the span scores carry the main result.
EvalReport span_report(std::span<const TypedSpan> pred, std::span<const TypedSpan> gold);

// Aligns predicted and gold typed mentions of two corpora by mention identity.
// Gold mentions without a prediction count as empty predictions; predictions
// for unknown mentions are ignored.
EvalReport evaluate_typing_corpora(const Corpus& pred, const Corpus& gold);
// Span mode: every typed mention is a span typed by its depth-1 label.
EvalReport evaluate_span_corpora(const Corpus& pred, const Corpus& gold);

// Depth-1 ancestor of the deepest label ("" for an empty set).
std::string coarse_type(const LabelSet& labels);

}  // namespace corefcl

#endif  // COREFCL_EVAL_HPP_
