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

// Command-line front end. Every subcommand writes <out>/manifest.json; logs
// go to stdout as JSON lines and errors to stderr as one JSON object.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corefcl/consensus.hpp"
#include "corefcl/corpus.hpp"
#include "corefcl/encoder.hpp"
#include "corefcl/eval.hpp"
#include "corefcl/manifest.hpp"
#include "corefcl/pipeline.hpp"
#include "corefcl/pretrain.hpp"
#include "corefcl/spandet.hpp"
#include "corefcl/synth.hpp"
#include "corefcl/typing.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace corefcl;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config file " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
}

json section(const json& j, const char* name) { return j.contains(name) ? j.at(name) : json::object(); }

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw UsageError("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Flag values that fail to parse are usage errors, not runtime failures.
template <class F>
auto flag(F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void log_line(const json& j) { std::cout << j.dump() << std::endl; }

Corpus with_predictions(const Corpus& source, std::vector<TypedMention> predicted) {
  Corpus out;
  for (const auto& s : source.stories()) out.add_story(s);
  out.typed_mentions() = std::move(predicted);
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stories;
};

int run_synth(const SynthArgs& a) {
  Timer timer;
  const json file = read_json_file(a.config);
  SynthConfig c = synth_config_from_json(file.contains("synth") ? file.at("synth") : file);
  if (a.seed) c.seed = *a.seed;
  if (a.stories) c.n_stories = *a.stories;
  SynthCorpus s = generate(c);
  s.corpus.coref().push_back(s.gold);
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / "corpus.jsonl";
  save_corpus(path, s.corpus);
  RunManifest m{"synth", to_json(c), c.seed, {}, {}, 0.0};
  if (!a.config.empty()) m.add_input(a.config);
  m.add_artifact(path);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  log_line({{"event", "synth"}, {"stories", c.n_stories}, {"corpus", path.string()}});
  return 0;
}

// ---------------------------------------------------------------- merge-coref

struct MergeArgs {
  std::string corpus, systems, match = "exact", out;
};

int run_merge(const MergeArgs& a) {
  Timer timer;
  const auto names = split_list(a.systems);
  if (names.size() != 2) throw UsageError("--systems needs exactly two comma-separated names");
  const MatchMode mode = flag([&] { return parse_match_mode(a.match); });
  Corpus corpus = load_corpus(a.corpus);
  const auto* sa = corpus.find_coref(names[0]);
  const auto* sb = corpus.find_coref(names[1]);
  if (!sa || !sb) throw std::invalid_argument("corpus lacks coreference system '" + (sa ? names[1] : names[0]) + "'");
  CorefAnnotation merged = consensus(*sa, *sb, mode);
  const std::size_t chains = merged.chain_count();
  const std::string name = merged.system;
  corpus.coref().push_back(std::move(merged));
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / "corpus.jsonl";
  save_corpus(path, corpus);
  RunManifest m{"merge-coref", {{"systems", names}, {"match", a.match}}, 0, {}, {}, 0.0};
  m.add_input(a.corpus);
  m.add_artifact(path);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  log_line({{"event", "merge-coref"}, {"system", name}, {"chains", chains}});
  return 0;
}

// ---------------------------------------------------------------- pretrain

struct PretrainArgs {
  std::string corpus, validation, coref = "consensus(sysA,sysB)", config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, stories_per_batch;
  std::optional<double> lr, temperature;
  std::string negative_scope, mask_policy, objective, token_scope;
};

int run_pretrain(const PretrainArgs& a) {
  Timer timer;
  const json file = read_json_file(a.config);
  EncoderConfig ec = encoder_config_from_json(section(file, "encoder"));
  PretrainConfig pc = pretrain_config_from_json(section(file, "pretrain"));
  if (a.seed) pc.seed = ec.seed = *a.seed;
  if (a.epochs) pc.epochs = *a.epochs;
  if (a.stories_per_batch) pc.stories_per_batch = *a.stories_per_batch;
  if (a.lr) pc.optimizer.lr = *a.lr;
  if (a.temperature) pc.temperature = *a.temperature;
  if (!a.negative_scope.empty()) pc.negative_scope = flag([&] { return parse_negative_scope(a.negative_scope); });
  if (!a.mask_policy.empty()) pc.mask_policy = flag([&] { return parse_mask_policy(a.mask_policy); });
  if (!a.objective.empty()) pc.objective = flag([&] { return parse_objective(a.objective); });
  if (!a.token_scope.empty()) pc.token_scope = flag([&] { return parse_token_scope(a.token_scope); });
  flag([&] { pc.validate(); return 0; });

  const Corpus corpus = load_corpus(a.corpus);
  const auto* chains = corpus.find_coref(a.coref);
  if (!chains) throw std::invalid_argument("corpus lacks coreference system '" + a.coref + "'");
  std::optional<Corpus> vcorpus;
  const CorefAnnotation* vchains = nullptr;
  if (!a.validation.empty()) {
    vcorpus = load_corpus(a.validation);
    vchains = vcorpus->find_coref(a.coref);
    if (!vchains) throw std::invalid_argument("validation corpus lacks coreference system '" + a.coref + "'");
  }
  Vocab vocab = Vocab::build(corpus, file.value("min_freq", std::size_t{2}));
  ec.vocab_size = vocab.size();
  Encoder encoder(ec, vocab);

  fs::create_directories(a.out);
  RunManifest m{"pretrain", {{"encoder", to_json(ec)}, {"pretrain", to_json(pc)}, {"coref", a.coref}}, pc.seed,
                {}, {}, 0.0};
  m.add_input(a.corpus);
  if (!a.validation.empty()) m.add_input(a.validation);
  if (!a.config.empty()) m.add_input(a.config);

  const PretrainData train{&corpus, chains};
  std::optional<PretrainData> val;
  if (vcorpus) val = PretrainData{&*vcorpus, vchains};
  auto result = pretrain(train, val ? &*val : nullptr, std::move(encoder), pc,
                         [&](const EpochLog& log, const Checkpoint& ckpt) {
                           char name[32];
                           std::snprintf(name, sizeof name, "epoch-%03zu.ckpt", log.epoch);
                           const fs::path p = fs::path(a.out) / name;
                           save_checkpoint(p, ckpt);
                           m.add_artifact(p);
                           json j = to_json(log);
                           j["event"] = "epoch";
                           log_line(j);
                         });
  const fs::path best = fs::path(a.out) / "best.ckpt";
  save_checkpoint(best, result.best);
  m.add_artifact(best);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  log_line({{"event", "pretrain"}, {"best_epoch", result.best_epoch}, {"checkpoint", best.string()}});
  return 0;
}

// ---------------------------------------------------------------- train-typing

struct TypingArgs {
  std::string corpus, validation, predict, checkpoint, strategy, frozen = "true", config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
};

int run_train_typing(const TypingArgs& a) {
  Timer timer;
  const json file = read_json_file(a.config);
  TypingTrainConfig tc = typing_config_from_json(section(file, "typing"));
  if (!a.strategy.empty()) tc.strategy = flag([&] { return parse_span_strategy(a.strategy); });
  tc.frozen = parse_bool(a.frozen);
  if (a.seed) tc.seed = *a.seed;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.lr) tc.optimizer.lr = *a.lr;

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Encoder& enc = ckpt.encoder;
  const std::size_t max_len = enc.config().max_len;
  const Corpus corpus = load_corpus(a.corpus);
  const auto train = make_typing_dataset(corpus, enc.vocab(), tc.strategy, max_len);
  std::optional<Corpus> vcorpus;
  std::optional<TypingDataset> val;
  if (!a.validation.empty()) {
    vcorpus = load_corpus(a.validation);
    val = make_typing_dataset(*vcorpus, enc.vocab(), tc.strategy, max_len);
  }
  auto result = train_typing(train, val ? &*val : nullptr, enc, tc,
                             file.value("labels", std::vector<std::string>{}));
  for (const auto& l : result.log)
    log_line({{"event", "epoch"}, {"epoch", l.epoch}, {"loss", l.loss}, {"val_micro_f1", l.val_micro_f1},
              {"val_macro_f1", l.val_macro_f1}});

  fs::create_directories(a.out);
  RunManifest m{"train-typing", {{"typing", to_json(tc)}}, tc.seed, {}, {}, 0.0};
  m.add_input(a.corpus);
  m.add_input(a.checkpoint);
  if (!a.validation.empty()) m.add_input(a.validation);
  const fs::path model_path = fs::path(a.out) / "model.json";
  result.model.save(model_path);
  m.add_artifact(model_path);
  if (!tc.frozen) {
    const fs::path p = fs::path(a.out) / "encoder.ckpt";
    save_checkpoint(p, Checkpoint{result.encoder, ckpt.step, ckpt.rng_state});
    m.add_artifact(p);
  }

  const std::string target = a.predict.empty() ? a.corpus : a.predict;
  const Corpus pcorpus = a.predict.empty() ? corpus : load_corpus(a.predict);
  if (!a.predict.empty()) m.add_input(a.predict);
  const auto pdata = make_typing_dataset(pcorpus, enc.vocab(), tc.strategy, max_len);
  std::vector<TypedMention> predicted;
  for (const auto& p : predict_dataset(result.model, result.encoder, pdata)) {
    TypedMention tm{p.mention, p.labels, "predicted", {}};
    for (std::size_t t = 0; t < p.probabilities.size(); ++t)
      tm.scores[result.model.labels()[t]] = p.probabilities[t];
    predicted.push_back(std::move(tm));
  }
  const fs::path pred_path = fs::path(a.out) / "predictions.jsonl";
  save_corpus(pred_path, with_predictions(pcorpus, std::move(predicted)));
  m.add_artifact(pred_path);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  log_line({{"event", "train-typing"}, {"best_epoch", result.best_epoch}, {"predictions", pred_path.string()},
            {"target", target}});
  return 0;
}

// ---------------------------------------------------------------- train-span

struct SpanArgs {
  std::string corpus, predict, checkpoint, frozen = "true", config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int run_train_span(const SpanArgs& a) {
  Timer timer;
  const json file = read_json_file(a.config);
  TaggerTrainConfig tc = tagger_config_from_json(section(file, "span"));
  tc.frozen = parse_bool(a.frozen);
  if (a.seed) tc.seed = *a.seed;
  if (a.epochs) tc.epochs = *a.epochs;

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Corpus corpus = load_corpus(a.corpus);
  const TagSet tags(span_types(corpus));
  const auto data = span_sentences(corpus, tags);
  auto result = train_tagger(data, tags, ckpt.encoder, tc);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    log_line({{"event", "epoch"}, {"epoch", e + 1}, {"loss", result.epoch_loss[e]}});

  fs::create_directories(a.out);
  RunManifest m{"train-span", {{"span", to_json(tc)}}, tc.seed, {}, {}, 0.0};
  m.add_input(a.corpus);
  m.add_input(a.checkpoint);
  const fs::path model_path = fs::path(a.out) / "tagger.json";
  result.model.save(model_path);
  m.add_artifact(model_path);

  const Corpus pcorpus = a.predict.empty() ? corpus : load_corpus(a.predict);
  if (!a.predict.empty()) m.add_input(a.predict);
  const auto pdata = span_sentences(pcorpus, tags);
  std::vector<TypedMention> predicted;
  for (const auto& s : predict_spans(result.model, result.encoder, pdata)) {
    Mention mention{s.story, s.sent, s.start, s.end, s.end - 1};
    predicted.push_back({mention, {s.type}, "predicted", {}});
  }
  const fs::path pred_path = fs::path(a.out) / "predictions.jsonl";
  save_corpus(pred_path, with_predictions(pcorpus, std::move(predicted)));
  m.add_artifact(pred_path);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  log_line({{"event", "train-span"}, {"predictions", pred_path.string()}});
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred, gold, mode = "typing", out;
};

int run_evaluate(const EvaluateArgs& a) {
  Timer timer;
  if (a.mode != "typing" && a.mode != "span") throw UsageError("--mode must be typing or span");
  const Corpus pred = load_corpus(a.pred);
  const Corpus gold = load_corpus(a.gold);
  const EvalReport report = a.mode == "typing" ? evaluate_typing_corpora(pred, gold) : evaluate_span_corpora(pred, gold);
  std::cout << report.to_json().dump() << "\n" << report.to_table() << std::flush;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    RunManifest m{"evaluate", {{"mode", a.mode}}, 0, {}, {}, 0.0};
    m.add_input(a.pred);
    m.add_input(a.gold);
    const fs::path rj = fs::path(a.out) / "report.json", rt = fs::path(a.out) / "report.txt";
    std::ofstream(rj) << report.to_json().dump(2) << "\n";
    std::ofstream(rt) << report.to_table();
    m.add_artifact(rj);
    m.add_artifact(rt);
    m.duration_seconds = timer.seconds();
    m.write(a.out);
  }
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string config, axes, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int run_ablate(const AblateArgs& a) {
  Timer timer;
  const json file = read_json_file(a.config);
  ExperimentConfig c = experiment_config_from_json(file, ExperimentConfig::desk_scale(1));
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.pretrain.epochs = *a.epochs;
  const auto axes = split_list(a.axes);
  for (const auto& ax : axes) {
    try {
      axis_values(ax);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const auto cells = ablate(c, axes, [](const AblationCell& cell) {
    log_line({{"event", "cell"}, {"settings", cell.settings}, {"micro_f1", cell.report.micro_f1},
              {"macro_f1", cell.report.macro_f1}});
  });
  const std::string table = ablation_table(cells);
  std::cout << table << std::flush;
  fs::create_directories(a.out);
  RunManifest m{"ablate", to_json(c), c.seed, {}, {}, 0.0};
  if (!a.config.empty()) m.add_input(a.config);
  const fs::path rj = fs::path(a.out) / "ablation.json", rt = fs::path(a.out) / "ablation.txt";
  std::ofstream(rj) << ablation_to_json(cells).dump(2) << "\n";
  std::ofstream(rt) << table;
  m.add_artifact(rj);
  m.add_artifact(rt);
  m.duration_seconds = timer.seconds();
  m.write(a.out);
  return 0;
}

void error_json(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corefcl: coreference-supervised entity encoder toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic corpus");
  s->add_option("--config", synth.config, "synthetic corpus config (JSON)");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed);
  s->add_option("--stories", synth.stories);

  MergeArgs merge;
  auto* mc = app.add_subcommand("merge-coref", "add the consensus of two coreference systems");
  mc->add_option("--corpus", merge.corpus)->required();
  mc->add_option("--systems", merge.systems, "A,B")->required();
  mc->add_option("--match", merge.match, "exact|head");
  mc->add_option("--out", merge.out)->required();

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "coreference-supervised contrastive pre-training");
  p->add_option("--corpus", pre.corpus)->required();
  p->add_option("--validation", pre.validation);
  p->add_option("--coref", pre.coref, "coreference system used as supervision");
  p->add_option("--config", pre.config, "JSON with optional encoder/pretrain sections");
  p->add_option("--out", pre.out)->required();
  p->add_option("--seed", pre.seed);
  p->add_option("--epochs", pre.epochs);
  p->add_option("--stories-per-batch", pre.stories_per_batch);
  p->add_option("--lr", pre.lr);
  p->add_option("--temperature", pre.temperature);
  p->add_option("--negative-scope", pre.negative_scope);
  p->add_option("--mask-policy", pre.mask_policy);
  p->add_option("--token-scope", pre.token_scope);
  p->add_option("--objective", pre.objective);

  TypingArgs typ;
  auto* t = app.add_subcommand("train-typing", "train the entity typing head");
  t->add_option("--corpus", typ.corpus)->required();
  t->add_option("--validation", typ.validation);
  t->add_option("--predict", typ.predict, "corpus to label (default: --corpus)");
  t->add_option("--checkpoint", typ.checkpoint)->required();
  t->add_option("--strategy", typ.strategy);
  t->add_option("--frozen", typ.frozen, "true|false");
  t->add_option("--config", typ.config);
  t->add_option("--out", typ.out)->required();
  t->add_option("--seed", typ.seed);
  t->add_option("--epochs", typ.epochs);
  t->add_option("--lr", typ.lr);

  SpanArgs span;
  auto* sp = app.add_subcommand("train-span", "train the span detection tagger");
  sp->add_option("--corpus", span.corpus)->required();
  sp->add_option("--predict", span.predict);
  sp->add_option("--checkpoint", span.checkpoint)->required();
  sp->add_option("--frozen", span.frozen, "true|false");
  sp->add_option("--config", span.config);
  sp->add_option("--out", span.out)->required();
  sp->add_option("--seed", span.seed);
  sp->add_option("--epochs", span.epochs);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "score predictions against gold annotations");
  e->add_option("--pred", ev.pred)->required();
  e->add_option("--gold", ev.gold)->required();
  e->add_option("--mode", ev.mode, "typing|span");
  e->add_option("--out", ev.out);

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "run the pipeline over an ablation grid");
  a->add_option("--config", ab.config);
  a->add_option("--axes", ab.axes, "comma-separated subset of span_strategy,negative_scope,mask_policy,coref_source");
  a->add_option("--out", ab.out)->required();
  a->add_option("--seed", ab.seed);
  a->add_option("--epochs", ab.epochs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    error_json("usage", err.what());
    return 2;
  }

  try {
    if (*s) return run_synth(synth);
    if (*mc) return run_merge(merge);
    if (*p) return run_pretrain(pre);
    if (*t) return run_train_typing(typ);
    if (*sp) return run_train_span(span);
    if (*e) return run_evaluate(ev);
    if (*a) return run_ablate(ab);
  } catch (const UsageError& err) {
    error_json("usage", err.what());
    return 2;
  } catch (const std::exception& err) {
    error_json("runtime", err.what());
    return 1;
  }
  return 2;
}
