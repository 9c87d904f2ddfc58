#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "embench/report.hpp"
#include "embench/sweep.hpp"
#include "embench/trainer.hpp"
#include "test_util.hpp"

using namespace embench;
using embench::fixtures::TempDir;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out = dir.file(".stdout");
  const std::string err = dir.file(".stderr");
  const std::string cmd =
      "cd '" + dir.path().string() + "' && '" EMBENCH_CLI_PATH "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string metric_line(const std::string& out, const std::string& name) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(name + "\t", 0) == 0) {
      auto rest = line.substr(name.size() + 1);
      return rest.substr(0, rest.find('\t'));
    }
  }
  return {};
}

const char* kTrainFlags = "--corpus corpus.txt --min-count 2 --size 10 --window 2 --iterations 2 --seed 4";

HyperParams train_flags_hyper() {
  HyperParams h;
  h.size = 10;
  h.window = 2;
  h.iterations = 2;
  h.seed = 4;
  return h;
}

}  // namespace

TEST(Cli, SweepWithParallelFourTrainsEveryPoint) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, "sweep --config sweep.json --parallel 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("4 trained"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("run_state.json"), std::string::npos);
  const auto state = load_state(dir.file("run_state.json"));
  ASSERT_EQ(state.entries.size(), 4u);
  for (const auto& e : state.entries) {
    EXPECT_EQ(e.status, Status::Trained);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / e.model_path));
  }
}

TEST(Cli, SweepWithFailedPointExitsTwo) {
  TempDir dir;
  const auto cfg_path = fixtures::copy_toy_workspace(dir);
  json cfg = json::parse(slurp(cfg_path));
  cfg["fixed"]["lockf"] = 0.5;
  std::ofstream(cfg_path) << cfg.dump(2);
  auto r = run_cli(dir, "sweep --config sweep.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("pretrained"), std::string::npos) << r.err;
}

TEST(Cli, TrainMatchesLibrary) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, std::string("train ") + kTrainFlags + " --out m.bin");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("m.bin"), std::string::npos);
  const auto cli = load_model(dir.file("m.bin"));
  const auto lib = train_corpus(read_text_file(dir.file("corpus.txt")), 2, train_flags_hyper());
  ASSERT_EQ(cli.vocab().size(), lib.vocab().size());
  EXPECT_EQ(std::vector<float>(cli.data().begin(), cli.data().end()),
            std::vector<float>(lib.data().begin(), lib.data().end()));
  EXPECT_EQ(cli.hyper(), lib.hyper());
}

TEST(Cli, EvalPrintsLibraryMetricsExactly) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  ASSERT_EQ(run_cli(dir, std::string("train ") + kTrainFlags + " --out m.bin").code, 0);
  auto r = run_cli(dir, "eval --model m.bin --triples triples.tsv");
  ASSERT_EQ(r.code, 0) << r.err;

  EvalSuite suite;
  suite.triples = read_triples_file(dir.file("triples.tsv"));
  const auto report = suite.evaluate(load_model(dir.file("m.bin")));
  ASSERT_TRUE(report.score(metric::kTriples));
  EXPECT_EQ(metric_line(r.out, "triples"), exact_decimal(*report.score(metric::kTriples)));
  EXPECT_EQ(std::stod(metric_line(r.out, "triples")), *report.score(metric::kTriples));
  EXPECT_TRUE(metric_line(r.out, "accuracy").empty());
}

TEST(Cli, EvalFullSuiteMatchesLibrary) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  ASSERT_EQ(run_cli(dir, std::string("train ") + kTrainFlags + " --out m.txt --format text").code, 0);
  auto r = run_cli(dir,
                   "eval --model m.txt --triples triples.tsv --documents documents.tsv --analogies analogies.txt "
                   "--labels labels.tsv --split-seed 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EvalSuite suite;
  suite.triples = read_triples_file(dir.file("triples.tsv"));
  suite.documents = read_documents_file(dir.file("documents.tsv"));
  suite.analogies = read_analogies_file(dir.file("analogies.txt"));
  suite.split_seed = 5;
  const auto labels = LabelStore::read_file(dir.file("labels.tsv"));
  const auto report = suite.evaluate(load_model(dir.file("m.txt")), &labels);
  for (const char* m : {metric::kTriples, metric::kAccuracy, metric::kAnalogy, metric::kCombined}) {
    ASSERT_TRUE(report.score(m)) << m;
    EXPECT_EQ(metric_line(r.out, m), exact_decimal(*report.score(m))) << m;
  }
}

TEST(Cli, NegativeSizeIsUsageErrorNamingFlag) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, "train --corpus corpus.txt --out m.bin --size -3");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--size"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_FALSE(std::filesystem::exists(dir.file("m.bin")));
}

TEST(Cli, HyperValidationIsUsageError) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, "train --corpus corpus.txt --out m.bin --negative 0");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--negative"), std::string::npos) << r.err;
  r = run_cli(dir, "train --corpus corpus.txt --out m.bin --retro 0.5");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--lexicon"), std::string::npos) << r.err;
  r = run_cli(dir, "train --corpus corpus.txt --out m.bin --architecture glove");
  EXPECT_EQ(r.code, 1);
  r = run_cli(dir, "");
  EXPECT_EQ(r.code, 1);
  r = run_cli(dir, "train --out m.bin");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos) << r.err;
}

TEST(Cli, DataErrorsExitTwo) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, "train --corpus missing.txt --out m.bin");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.txt"), std::string::npos) << r.err;
  dir.write("bad.bin", "garbage\n");
  r = run_cli(dir, "eval --model bad.bin --triples triples.tsv");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  dir.write("empty.txt", "");
  r = run_cli(dir, "train --corpus empty.txt --out m.bin");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, VocabBuildMatchesLibrary) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  auto r = run_cli(dir, "vocab-build --corpus corpus.txt --min-count 3 --out v.tsv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("v.tsv"), std::string::npos);
  std::ostringstream expected;
  build_vocabulary(read_text_file(dir.file("corpus.txt")), 3).write_tsv(expected);
  EXPECT_EQ(slurp(dir.file("v.tsv")), expected.str());
}

TEST(Cli, ReportExportAndRefine) {
  TempDir dir;
  fixtures::copy_toy_workspace(dir);
  ASSERT_EQ(run_cli(dir, "sweep --config sweep.json").code, 0);
  const auto state = load_state(dir.file("run_state.json"));

  auto r = run_cli(dir, "report --state run_state.json --out rep");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("rep/models.csv")), models_csv(state));
  EXPECT_EQ(slurp(dir.file("rep/correlations.csv")), correlations_csv(state_correlations(state)));
  const auto html = slurp(dir.file("rep/index.html"));
  for (const auto& e : state.entries) EXPECT_NE(html.find(e.model_id), std::string::npos);

  r = run_cli(dir, "export-state --state run_state.json --out copy.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("copy.json")), export_state(state));
  r = run_cli(dir, "export-state --state run_state.json");
  EXPECT_EQ(r.out, export_state(state));

  const auto& best = best_entry(state);
  r = run_cli(dir, "refine --config sweep.json --best combined --out fine.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(best.model_id), std::string::npos);
  const auto config = load_sweep_config(dir.file("sweep.json"));
  EXPECT_EQ(json::parse(slurp(dir.file("fine.json"))), refine_config(config, best.hyper, 2));
  EXPECT_NO_THROW(load_sweep_config(dir.file("fine.json")));

  const auto& other = state.entries.front();
  r = run_cli(dir, "refine --config sweep.json --model " + other.model_id + " --factor 3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out), refine_config(config, other.hyper, 3));

  EXPECT_EQ(run_cli(dir, "refine --config sweep.json --model nope").code, 2);
  EXPECT_EQ(run_cli(dir, "refine --config sweep.json").code, 1);
}
