#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const fs::path& work() {
  static const fs::path dir = swm::testing::scratch_dir("cli");
  return dir;
}

Run swm_run(const std::string& args, const std::string& env = "env -u RATIONALITY_SEED") {
  const auto out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = env + " " + SWM_CLI + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json manifest(const fs::path& p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

const std::string kSmall = " --word-dim 6 --sememe-dim 6 --hidden 6 --attention-dim 6 --epochs 1 --validate-every 40 ";

// Shared synthetic data, generated once.
const fs::path& synth() {
  static const fs::path dir = [] {
    auto d = work() / "synth";
    auto r = swm_run("gen-synth --out " + d.string() + " --train 60 --valid 15 --test 15 --seed 2");
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("gen-synth writes data and a manifest") {
  const auto d = synth();
  for (auto name : {"lexicon.tsv", "corpus.txt", "train.tsv", "valid.tsv", "test.tsv", "summary.tsv",
                    "gen-synth.manifest.json"})
    CHECK(fs::exists(d / name));
  auto m = manifest(d / "gen-synth.manifest.json");
  CHECK(m["command"] == "gen-synth");
  CHECK(m["seed"] == 2);
  CHECK(slurp(d / "summary.tsv").find("train\t120\t60\t60") != std::string::npos);
}

TEST_CASE("train, eval and attention dump") {
  const auto d = synth();
  const auto run = work() / "run";
  auto r = swm_run("train --data " + d.string() + " --lexicon " + (d / "lexicon.tsv").string() + " --out " +
                   run.string() + kSmall + "--quiet --seed 4");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(run / "model.ckpt"));
  CHECK(fs::exists(run / "train_log.tsv"));
  auto m = manifest(run / "train.manifest.json");
  CHECK(m["config"]["epochs"] == "1");
  CHECK(m["config"]["variant"] == "full");
  CHECK(m["inputs"].contains((d / "train.tsv").string()));

  const auto dump = work() / "attention.txt";
  r = swm_run("eval --checkpoint " + (run / "model.ckpt").string() + " --data " + (d / "test.tsv").string() +
              " --lexicon " + (d / "lexicon.tsv").string() + " --out " + run.string() + " --dump-attention " +
              dump.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("variant full") != std::string::npos);
  CHECK(r.out.find("accuracy ") != std::string::npos);
  const auto text = slurp(dump);
  CHECK(text.find("\tword_attention") != std::string::npos);
  CHECK(text.find("\tmatching:") != std::string::npos);
  CHECK(text.find("\tsememe_attention") != std::string::npos);
}

TEST_CASE("ablate, baseline-kn and grad-check") {
  const auto d = synth();
  const auto out = work() / "ablate";
  auto r = swm_run("ablate --data " + d.string() + " --lexicon " + (d / "lexicon.tsv").string() + " --out " +
                   out.string() + kSmall + "--variants full,wo-hownet");
  REQUIRE(r.code == 0);
  const auto table = slurp(out / "ablation.tsv");
  CHECK(table.rfind("variant\tvalid_accuracy\ttest_accuracy\tdelta_vs_full\n", 0) == 0);
  CHECK(table.find("\nfull\t") != std::string::npos);
  CHECK(table.find("\nwo-hownet\t") != std::string::npos);

  const auto kn = work() / "kn";
  r = swm_run("baseline-kn --data " + d.string() + " --order 3 --out " + kn.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("accuracy") != std::string::npos);
  CHECK(fs::exists(kn / "kn_model.txt"));
  CHECK(fs::exists(kn / "kn_report.tsv"));

  r = swm_run("grad-check --variants full,wo-match --out " + (work() / "gc").string());
  CHECK(r.code == 0);
}

TEST_CASE("gen-data from a tagged corpus") {
  const auto d = synth();
  const auto out = work() / "gen";
  auto r = swm_run("gen-data --corpus " + (d / "corpus.txt").string() +
                   " --mode swap-same-pos --min-length 4 --seed 3 --out " + out.string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "train.tsv"));
  CHECK(fs::exists(out / "summary.tsv"));
  const auto first = slurp(out / "train.tsv");
  r = swm_run("gen-data --corpus " + (d / "corpus.txt").string() +
              " --mode dataset3 --min-length 4 --seed 3 --out " + out.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "train.tsv") == first);
}

TEST_CASE("usage errors exit with 2") {
  const auto d = synth();
  CHECK(swm_run("").code == 2);
  CHECK(swm_run("frobnicate").code == 2);
  CHECK(swm_run("gen-data --corpus " + (work() / "missing.txt").string()).code == 2);
  CHECK(swm_run("gen-data --corpus " + (d / "corpus.txt").string() + " --mode shuffle").code == 2);
  CHECK(swm_run("train --data " + d.string() + " --lexicon " + (d / "lexicon.tsv").string() + " --variant nope").code ==
        2);
  CHECK(swm_run("train --data " + d.string()).code == 2);
  CHECK(swm_run("eval --checkpoint " + (d / "train.tsv").string() + " --data " + (d / "test.tsv").string() +
                " --lexicon " + (d / "lexicon.tsv").string())
            .code == 2);
  CHECK(swm_run("gen-synth --train 0 --out " + (work() / "zero").string()).code == 2);
}

TEST_CASE("seed and config precedence") {
  const auto cfg = work() / "synth.cfg";
  {
    std::ofstream f(cfg);
    f << "seed = 11\ntrain = 20\nvalid = 5\ntest = 5\n";
  }
  const auto out = work() / "prec";
  auto seed_of = [&](const std::string& args, const std::string& env) {
    auto r = swm_run("gen-synth --out " + out.string() + " --train 20 --valid 5 --test 5 " + args, env);
    REQUIRE(r.code == 0);
    return manifest(out / "gen-synth.manifest.json")["seed"].get<int>();
  };
  CHECK(seed_of("", "env -u RATIONALITY_SEED") == 1);
  CHECK(seed_of("", "env RATIONALITY_SEED=7") == 7);
  CHECK(seed_of("--config " + cfg.string(), "env RATIONALITY_SEED=7") == 11);
  CHECK(seed_of("--config " + cfg.string() + " --seed 5", "env RATIONALITY_SEED=7") == 5);

  // Config values fill options not given on the command line.
  auto r = swm_run("gen-synth --out " + out.string() + " --config " + cfg.string());
  REQUIRE(r.code == 0);
  CHECK(manifest(out / "gen-synth.manifest.json")["config"]["train"] == "20");
  CHECK(slurp(out / "summary.tsv").find("train\t40\t20\t20") != std::string::npos);

  const auto bad = work() / "bad.cfg";
  {
    std::ofstream f(bad);
    f << "bogus_key = 3\n";
  }
  CHECK(swm_run("gen-synth --out " + out.string() + " --config " + bad.string()).code == 2);
  CHECK(swm_run("gen-synth --out " + out.string(), "env RATIONALITY_SEED=abc").code == 2);
}
