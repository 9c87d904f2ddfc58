// embench: command-line front end. Every command is a thin wrapper over
// the library; exit 0 on success, 1 on usage errors, 2 on data or config
// errors.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "embench/report.hpp"
#include "embench/service.hpp"
#include "embench/sweep.hpp"
#include "embench/trainer.hpp"

namespace {

using namespace embench;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string format = "binary";
  std::uint32_t min_count = kDefaultMinCount;
  std::string pretrained;
  std::string lexicon;
  HyperParams hyper;
  std::string architecture = "skip-gram";
};

struct EvalArgs {
  std::string model;
  std::string triples;
  std::string documents;
  std::string analogies;
  std::string labels;
  std::uint64_t split_seed = 13;
  std::size_t restrict_vocab = 0;
};

struct SweepArgs {
  std::string config;
  std::size_t parallel = 1;
  std::string state;
};

struct RefineArgs {
  std::string config;
  std::string state;
  std::string model;
  std::string best;
  int factor = 2;
  std::string out;
};

struct ServeArgs {
  std::string config;
  std::string state;
  std::string sweep_config;
  std::string host;
  int port = -1;
};

// Hyperparameter validation failures are usage errors; the library's
// messages start with the field name, which is also the flag name.
void validate_flags(const HyperParams& h) {
  try {
    h.validate();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("--") + e.what());
  }
}

int cmd_vocab_build(const std::string& corpus, std::uint32_t min_count, const std::string& out) {
  const auto vocab = build_vocabulary(read_text_file(corpus), min_count);
  std::ofstream f(out);
  if (!f) throw ConfigError("cannot write '" + out + "'");
  vocab.write_tsv(f);
  if (!f) throw ConfigError("write failed for '" + out + "'");
  std::printf("vocabulary: %zu words (%llu tokens) -> %s\n", vocab.size(),
              static_cast<unsigned long long>(vocab.total_tokens()), out.c_str());
  return 0;
}

int cmd_train(TrainArgs a) {
  a.hyper.architecture = parse_architecture(a.architecture);
  validate_flags(a.hyper);
  if (a.format != "binary" && a.format != "text") throw UsageError("--format must be binary or text");
  if (a.hyper.uses_pretrained() && a.pretrained.empty()) throw UsageError("--lockf requires --pretrained");
  if (a.hyper.uses_retrofit() && a.lexicon.empty()) throw UsageError("--retro requires --lexicon");
  std::optional<EmbeddingModel> pre;
  std::optional<Lexicon> lex;
  if (a.hyper.uses_pretrained()) pre = load_model(a.pretrained);
  if (a.hyper.uses_retrofit()) lex = Lexicon::read_file(a.lexicon);
  auto model = train_corpus(read_text_file(a.corpus), a.min_count, a.hyper, pre ? &*pre : nullptr,
                            lex ? &*lex : nullptr);
  save_model(model, a.out, a.format == "text" ? ModelFormat::Text : ModelFormat::Binary);
  std::printf("model: %zu words x %zu dims in %.2fs -> %s\n", model.vocab().size(), model.dim(),
              model.train_seconds(), a.out.c_str());
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  if (a.triples.empty() && a.documents.empty() && a.analogies.empty() && a.labels.empty()) {
    throw UsageError("eval needs at least one of --triples, --documents, --analogies, --labels");
  }
  const auto model = load_model(a.model);
  EvalSuite suite;
  if (!a.triples.empty()) suite.triples = read_triples_file(a.triples);
  if (!a.documents.empty()) suite.documents = read_documents_file(a.documents);
  if (!a.analogies.empty()) suite.analogies = read_analogies_file(a.analogies);
  suite.split_seed = a.split_seed;
  suite.analogy_options.restrict_vocab = a.restrict_vocab;
  std::optional<LabelStore> labels;
  if (!a.labels.empty()) labels = LabelStore::read_file(a.labels);
  const auto report = suite.evaluate(model, labels ? &*labels : nullptr);
  for (const auto& name : metric_names()) {
    auto v = report.score(name);
    if (!v) continue;
    std::printf("%s\t%s", name.c_str(), exact_decimal(*v).c_str());
    if (auto it = report.skipped.find(name); it != report.skipped.end() && it->second > 0) {
      std::printf("\tskipped=%zu", it->second);
    }
    std::printf("\n");
  }
  std::printf("evaluated %s: %zu metrics\n", a.model.c_str(), report.scores.size());
  return 0;
}

int cmd_sweep(const SweepArgs& a) {
  const auto config = load_sweep_config(a.config);
  SweepOptions opts;
  opts.parallelism = a.parallel;
  opts.state_path = a.state;
  const auto state = run_sweep(config, opts);
  const auto path = state_path_for(config, opts);
  for (const auto& e : state.entries) {
    if (e.status == Status::Failed) std::fprintf(stderr, "error: %s failed: %s\n", e.model_id.c_str(), e.error.c_str());
  }
  std::printf("sweep: %zu models, %zu trained, %zu failed -> %s\n", state.entries.size(), state.count(Status::Trained),
              state.count(Status::Failed), path.string().c_str());
  return state.count(Status::Failed) > 0 ? kExitData : 0;
}

int cmd_refine(const RefineArgs& a) {
  if (a.model.empty() == a.best.empty()) throw UsageError("refine needs exactly one of --model, --best");
  if (a.factor < 2) throw UsageError("--factor must be >= 2");
  const auto config = load_sweep_config(a.config);
  const fs::path state_path = a.state.empty() ? fs::path(config.resolve(config.state)) : fs::path(a.state);
  const auto state = load_state(state_path);
  const RunEntry* center = nullptr;
  if (!a.model.empty()) {
    center = state.find(a.model);
    if (!center) throw NotFound("model '" + a.model + "' is not in " + state_path.string());
  } else {
    center = &best_entry(state, a.best);
  }
  const auto refined = refine_config(config, center->hyper, a.factor);
  const std::string text = refined.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(a.out, text);
  }
  std::fprintf(a.out.empty() ? stderr : stdout, "refined around %s -> %s\n", center->model_id.c_str(),
               a.out.empty() ? "stdout" : a.out.c_str());
  return 0;
}

int cmd_export_state(const std::string& state_path, const std::string& out) {
  const auto state = load_state(state_path);
  const auto text = export_state(state);
  if (out.empty()) {
    std::cout << text;
    return 0;
  }
  write_file_atomic(out, text);
  std::printf("state: %zu models, %zu labels -> %s\n", state.entries.size(), state.labels.size(), out.c_str());
  return 0;
}

int cmd_report(const std::string& state_path, const std::string& out) {
  const auto state = load_state(state_path);
  write_report(state, out);
  std::printf("report: %zu models -> %s\n", state.entries.size(), (fs::path(out) / "index.html").string().c_str());
  return 0;
}

int cmd_serve(const ServeArgs& a) {
  ServerConfig cfg;
  if (!a.config.empty()) {
    cfg = ServerConfig::load(a.config);
  } else {
    cfg.apply_env();
  }
  if (!a.state.empty()) cfg.state = fs::absolute(a.state).string();
  if (!a.sweep_config.empty()) cfg.sweep_config = fs::absolute(a.sweep_config).string();
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  Workbench bench(cfg);
  Service service(bench);
  const int port = service.start(cfg.host, cfg.port);
  std::printf("serving %s on http://%s:%d\n", cfg.resolve(cfg.state).c_str(), cfg.host.c_str(), port);
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding hyperparameter workbench"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  std::function<int()> action;

  std::string vb_corpus, vb_out;
  std::uint32_t vb_min_count = kDefaultMinCount;
  auto* vb = app.add_subcommand("vocab-build", "Count tokens and write the vocabulary as TSV");
  vb->add_option("--corpus", vb_corpus, "Corpus text file")->required();
  vb->add_option("--min-count", vb_min_count, "Drop words rarer than this")->capture_default_str();
  vb->add_option("--out", vb_out, "Output TSV (word<TAB>count)")->required();
  vb->callback([&] { action = [&] { return cmd_vocab_build(vb_corpus, vb_min_count, vb_out); }; });

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train one model");
  tr->add_option("--corpus", ta.corpus, "Corpus text file")->required();
  tr->add_option("--out", ta.out, "Output model file")->required();
  tr->add_option("--format", ta.format, "binary or text")->check(CLI::IsMember({"binary", "text"}))->capture_default_str();
  tr->add_option("--min-count", ta.min_count, "Vocabulary cutoff")->capture_default_str();
  tr->add_option("--size", ta.hyper.size, "Vector dimensionality")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  tr->add_option("--window", ta.hyper.window, "Context window")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  tr->add_option("--architecture", ta.architecture, "skip-gram or cbow")
      ->check(CLI::IsMember({"skip-gram", "sg", "skipgram", "cbow"}))
      ->capture_default_str();
  tr->add_option("--hs", ta.hyper.hs, "Hierarchical softmax (0/1)")->capture_default_str();
  tr->add_option("--negative", ta.hyper.negative, "Negative samples")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--alpha", ta.hyper.alpha, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--iterations", ta.hyper.iterations, "Epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  tr->add_option("--subsample_t", ta.hyper.subsample_t, "Subsampling threshold, -1 disables")->capture_default_str();
  tr->add_option("--lockf", ta.hyper.lockf, "Pretrained blend weight in [0,1], -1 disables")->capture_default_str();
  tr->add_option("--retro", ta.hyper.retro, "Retrofitting strength in [0,2], -1 disables")->capture_default_str();
  tr->add_option("--seed", ta.hyper.seed, "Random seed")->capture_default_str();
  tr->add_option("--pretrained", ta.pretrained, "Pretrained model (with --lockf)");
  tr->add_option("--lexicon", ta.lexicon, "Lexicon file (with --retro)");
  tr->callback([&] { action = [&] { return cmd_train(ta); }; });

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate every point of a sweep config");
  sw->add_option("--config", sa.config, "Sweep config JSON")->required();
  sw->add_option("--parallel", sa.parallel, "Concurrent training jobs")->check(CLI::PositiveNumber)->capture_default_str();
  sw->add_option("--state", sa.state, "Run state path (overrides the config)");
  sw->callback([&] { action = [&] { return cmd_sweep(sa); }; });

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate one model");
  ev->add_option("--model", ea.model, "Model file")->required();
  ev->add_option("--triples", ea.triples, "Triples TSV");
  ev->add_option("--documents", ea.documents, "Labeled documents TSV");
  ev->add_option("--analogies", ea.analogies, "Analogy questions");
  ev->add_option("--labels", ea.labels, "Pair labels TSV");
  ev->add_option("--split-seed", ea.split_seed, "Train/test split seed")->capture_default_str();
  ev->add_option("--restrict-vocab", ea.restrict_vocab, "Analogy candidates, 0 = all")->capture_default_str();
  ev->callback([&] { action = [&] { return cmd_eval(ea); }; });

  RefineArgs ra;
  auto* rf = app.add_subcommand("refine", "Write a finer sweep config centered on one model");
  rf->add_option("--config", ra.config, "Sweep config JSON")->required();
  rf->add_option("--state", ra.state, "Run state (defaults to the config's)");
  rf->add_option("--model", ra.model, "Center model id");
  rf->add_option("--best", ra.best, "Center on the best model by this metric");
  rf->add_option("--factor", ra.factor, "Subdivision factor")->capture_default_str();
  rf->add_option("--out", ra.out, "Output config (default stdout)");
  rf->callback([&] { action = [&] { return cmd_refine(ra); }; });

  std::string xs_state, xs_out;
  auto* xs = app.add_subcommand("export-state", "Write the run state in canonical form");
  xs->add_option("--state", xs_state, "Run state")->required();
  xs->add_option("--out", xs_out, "Output path (default stdout)");
  xs->callback([&] { action = [&] { return cmd_export_state(xs_state, xs_out); }; });

  ServeArgs sv;
  auto* se = app.add_subcommand("serve", "Run the HTTP service");
  se->add_option("--config", sv.config, "Server config JSON");
  se->add_option("--state", sv.state, "Run state path");
  se->add_option("--sweep-config", sv.sweep_config, "Sweep config JSON");
  se->add_option("--host", sv.host, "Bind address");
  se->add_option("--port", sv.port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));
  se->callback([&] { action = [&] { return cmd_serve(sv); }; });

  std::string rp_state, rp_out = "report";
  auto* rp = app.add_subcommand("report", "Write an HTML and CSV report of a run");
  rp->add_option("--state", rp_state, "Run state")->required();
  rp->add_option("--out", rp_out, "Output directory")->capture_default_str();
  rp->callback([&] { action = [&] { return cmd_report(rp_state, rp_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\nRun with --help for more information.\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
