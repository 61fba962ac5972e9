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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "corefcl/corpus.hpp"
#include "corefcl/manifest.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Scratch {
 public:
  explicit Scratch(const std::string& name) : dir_(fs::temp_directory_path() / ("corefcl_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& s) const { return dir_ / s; }

  Run run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(COREFCL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path dir_;
};

std::vector<std::string> artifact_digests(const fs::path& manifest) {
  const json j = json::parse(slurp(manifest));
  std::vector<std::string> out;
  for (const auto& [path, digest] : j.at("artifacts").items()) out.push_back(digest.get<std::string>());
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2 and a JSON message") {
    Scratch s("usage");
    auto r = s.run("frobnicate");
    CHECK(r.code == 2);
    r = s.run("synth");
    CHECK(r.code == 2);
    const json e = json::parse(r.err.substr(0, r.err.find('\n')));
    CHECK(e.at("error") == "usage");
    r = s.run("merge-coref --corpus x --systems onlyone --out " + (s / "m").string());
    CHECK(r.code == 2);
    r = s.run("evaluate --pred a --gold b --mode sideways");
    CHECK(r.code == 2);
  }

  TEST_CASE("runtime errors exit with 1") {
    Scratch s("runtime");
    const auto r = s.run("merge-coref --corpus " + (s / "missing.jsonl").string() + " --systems sysA,sysB --out " +
                         (s / "m").string());
    CHECK(r.code == 1);
    CHECK(json::parse(r.err.substr(0, r.err.find('\n'))).at("error") == "runtime");
  }

  TEST_CASE("synth writes a manifest and is reproducible") {
    Scratch s("synth");
    REQUIRE(s.run("synth --out " + (s / "a").string() + " --seed 3 --stories 5").code == 0);
    REQUIRE(s.run("synth --out " + (s / "b").string() + " --seed 3 --stories 5").code == 0);
    REQUIRE(s.run("synth --out " + (s / "c").string() + " --seed 4 --stories 5").code == 0);
    CHECK(fs::exists(s / "a/manifest.json"));
    CHECK(slurp(s / "a/corpus.jsonl") == slurp(s / "b/corpus.jsonl"));
    CHECK(slurp(s / "a/corpus.jsonl") != slurp(s / "c/corpus.jsonl"));
    const json m = json::parse(slurp(s / "a/manifest.json"));
    CHECK(m.at("subcommand") == "synth");
    CHECK(m.at("seed") == 3);
    CHECK(artifact_digests(s / "a/manifest.json") == artifact_digests(s / "b/manifest.json"));
    CHECK(artifact_digests(s / "a/manifest.json").front() == corefcl::sha256_file(s / "a/corpus.jsonl"));
    const auto corpus = corefcl::load_corpus(s / "a/corpus.jsonl");
    CHECK(corpus.stories().size() == 5);
    CHECK(corpus.find_coref("gold") != nullptr);
  }

  TEST_CASE("pipeline end to end, twice") {
    Scratch s("pipeline");
    {
      std::ofstream cfg(s / "config.json");
      cfg << R"({"encoder": {"dim": 8, "layers": 1, "heads": 2, "ff_dim": 16, "max_len": 64},
                 "pretrain": {"stories_per_batch": 3}, "min_freq": 1})";
    }
    auto pipeline = [&](const std::string& tag) {
      const auto d = [&](const std::string& x) { return (s / (tag + "_" + x)).string(); };
      REQUIRE(s.run("synth --out " + d("syn") + " --seed 8 --stories 6").code == 0);
      REQUIRE(s.run("merge-coref --corpus " + d("syn") + "/corpus.jsonl --systems sysA,sysB --out " + d("merged"))
                  .code == 0);
      auto r = s.run("pretrain --corpus " + d("merged") + "/corpus.jsonl --config " + (s / "config.json").string() +
                     " --epochs 2 --seed 5 --out " + d("pre"));
      REQUIRE_MESSAGE(r.code == 0, r.err);
      CHECK(fs::exists(d("pre") + "/epoch-001.ckpt"));
      CHECK(fs::exists(d("pre") + "/epoch-002.ckpt"));
      CHECK(r.out.find("\"entity_loss\"") != std::string::npos);
      r = s.run("train-typing --corpus " + d("merged") + "/corpus.jsonl --checkpoint " + d("pre") +
                "/best.ckpt --epochs 3 --seed 5 --out " + d("typ"));
      REQUIRE_MESSAGE(r.code == 0, r.err);
      r = s.run("evaluate --pred " + d("typ") + "/predictions.jsonl --gold " + d("merged") +
                "/corpus.jsonl --mode typing --out " + d("eval"));
      REQUIRE_MESSAGE(r.code == 0, r.err);
      const json report = json::parse(slurp(d("eval") + "/report.json"));
      CHECK(report.at("instances") == 6 * 12);
      r = s.run("train-span --corpus " + d("merged") + "/corpus.jsonl --checkpoint " + d("pre") +
                "/best.ckpt --epochs 2 --out " + d("span"));
      REQUIRE_MESSAGE(r.code == 0, r.err);
      r = s.run("evaluate --pred " + d("span") + "/predictions.jsonl --gold " + d("merged") +
                "/corpus.jsonl --mode span --out " + d("espan"));
      REQUIRE_MESSAGE(r.code == 0, r.err);
      std::vector<std::string> digests;
      for (const char* step : {"syn", "merged", "pre", "typ", "eval", "span", "espan"}) {
        CHECK(fs::exists(d(step) + "/manifest.json"));
        for (const auto& x : artifact_digests(d(step) + "/manifest.json")) digests.push_back(x);
      }
      return digests;
    };
    const auto first = pipeline("one");
    const auto second = pipeline("two");
    CHECK(first.size() >= 10);
    CHECK(first == second);
  }

  TEST_CASE("bad flag values are usage errors") {
    Scratch s("flags");
    REQUIRE(s.run("synth --out " + (s / "syn").string() + " --stories 4").code == 0);
    const auto r = s.run("pretrain --corpus " + (s / "syn/corpus.jsonl").string() +
                         " --coref gold --mask-policy sometimes --out " + (s / "p").string());
    CHECK(r.code == 2);
    CHECK(s.run("pretrain --corpus " + (s / "syn/corpus.jsonl").string() + " --coref gold --temperature 0 --out " +
                (s / "p").string())
              .code == 2);
  }
}
