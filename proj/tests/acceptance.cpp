// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 run everything; exit 1 if anything failed
//   acceptance --only NAME     run one criterion; exit 77 if it was skipped
//   acceptance --list          print criterion names
//
// Data-dependent criteria read EMBENCH_TEXT8 (text8 file),
// EMBENCH_ANALOGIES (questions-words.txt) and EMBENCH_IMDB (aclImdb
// directory or a "label<TAB>text" file) and skip when they are missing.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "embench/service.hpp"
#include "embench/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace embench;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

// Collects failed expectations; the first few end up in the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  template <typename A, typename B>
  void expect_eq(const A& a, const B& b, const std::string& what) {
    expect(a == b, what);
  }
  void near(double a, double b, double tol, const std::string& what) {
    if (!(std::abs(a - b) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": " << a << " vs " << b;
      failures_.push_back(s.str());
    }
  }
  Outcome done(std::string summary) const {
    if (failures_.empty()) return {Verdict::Pass, std::move(summary)};
    std::string d = std::to_string(failures_.size()) + " failed: " + failures_.front();
    return {Verdict::Fail, d};
  }

 private:
  std::vector<std::string> failures_;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

EmbeddingModel random_unit_model(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::string> words;
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    words.push_back("w" + std::to_string(i));
    std::vector<double> r(d);
    double norm = 0;
    for (auto& x : r) {
      x = g(rng);
      norm += x * x;
    }
    std::vector<float> f;
    for (double x : r) f.push_back(static_cast<float>(x / std::sqrt(norm)));
    rows.push_back(f);
  }
  return fixtures::make_model(words, rows);
}

// ---------------------------------------------------------------------------

Outcome triples_oracle() {
  Check c;
  std::mt19937_64 rng(20);
  double worst = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 6 + rng() % 20;
    auto m = random_unit_model(n, 2 + rng() % 30, 500 + set);
    const int k = 1 + static_cast<int>(rng() % 25);
    std::vector<Triple> triples;
    double sum = 0;
    for (int t = 0; t < k; ++t) {
      std::size_t a = rng() % n, b, x;
      do b = rng() % n; while (b == a);
      do x = rng() % n; while (x == a || x == b);
      triples.push_back({m.vocab().word(a), m.vocab().word(b), m.vocab().word(x)});
      sum += oracles::direct_cos(m.row(a), m.row(b)) - oracles::direct_cos(m.row(a), m.row(x));
    }
    const double got = triples_score(m, triples).value;
    worst = std::max(worst, std::abs(got - sum / k));
    c.near(got, sum / k, 1e-10, "set " + std::to_string(set));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "100 sets, max |diff| %.2e", worst);
  return c.done(buf);
}

Outcome sgns_gradient() {
  Check c;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.4);
  const std::size_t d = 6;
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    // Five words: the input row, one positive and three negatives.
    std::vector<std::vector<double>> rows(5, std::vector<double>(d));
    for (auto& r : rows)
      for (auto& x : r) x = g(rng);
    const std::vector<int> labels{1, 0, 0, 0};
    auto loss = [&](const std::vector<std::vector<double>>& r) {
      std::vector<std::span<const double>> outs{r[1], r[2], r[3], r[4]};
      return logistic_targets_loss<double>(r[0], outs, labels);
    };
    const double alpha = 0.5;
    auto stepped = rows;
    std::vector<double> hidden_step(d, 0.0);
    std::vector<std::span<double>> outs{stepped[1], stepped[2], stepped[3], stepped[4]};
    logistic_targets_step<double>(rows[0], outs, labels, alpha, hidden_step);
    std::vector<double> analytic;
    for (double s : hidden_step) analytic.push_back(-s / alpha);
    for (int r = 1; r < 5; ++r)
      for (std::size_t k = 0; k < d; ++k) analytic.push_back(-(stepped[r][k] - rows[r][k]) / alpha);
    std::vector<double> numeric;
    const double h = 1e-6;
    for (int r = 0; r < 5; ++r)
      for (std::size_t k = 0; k < d; ++k) {
        auto plus = rows, minus = rows;
        plus[r][k] += h;
        minus[r][k] -= h;
        numeric.push_back((loss(plus) - loss(minus)) / (2 * h));
      }
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nb += numeric[i] * numeric[i];
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(na), std::sqrt(nb));
    worst = std::max(worst, rel);
    c.expect(rel < 1e-4, "trial " + std::to_string(trial) + " relative error " + std::to_string(rel));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max relative error %.2e", worst);
  return c.done(buf);
}

Outcome hs_normalization() {
  Check c;
  std::mt19937_64 rng(21);
  std::vector<std::uint64_t> counts(50);
  for (auto& x : counts) x = 1 + rng() % 5000;
  std::sort(counts.rbegin(), counts.rend());
  HuffmanTree tree(counts);
  const std::size_t d = 8;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> nodes(tree.internal_nodes() * d);
  for (auto& x : nodes) x = g(rng);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> hidden(d);
    for (auto& x : hidden) x = g(rng);
    double sum = 0;
    for (std::size_t w = 0; w < tree.leaves(); ++w) sum += tree.path_probability<double>(w, hidden, nodes);
    worst = std::max(worst, std::abs(sum - 1.0));
    c.near(sum, 1.0, 1e-6, "hidden " + std::to_string(t));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "20 hidden vectors, max |sum-1| %.2e", worst);
  return c.done(buf);
}

Outcome synthetic_clusters() {
  Check c;
  const auto started = std::chrono::steady_clock::now();
  const auto text = fixtures::two_topic_corpus(2000, 20, 10);
  HyperParams h;
  h.size = 16;
  h.window = 3;
  h.negative = 5;
  h.iterations = 5;
  h.subsample_t = kDisabled;
  h.seed = 4;
  const auto m = train_corpus(text, 1, h);
  double within = 0, cross = 0;
  int nw = 0, nc = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.rows(); ++j) {
      const double cs = oracles::direct_cos(m.row(i), m.row(j));
      if (m.vocab().word(i)[0] == m.vocab().word(j)[0]) {
        within += cs;
        ++nw;
      } else {
        cross += cs;
        ++nc;
      }
    }
  within /= nw;
  cross /= nc;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  c.expect(within - cross >= 0.2, "margin " + fmt(within - cross) + " < 0.2");
  c.expect(secs < 10.0, "took " + fmt(secs, 2) + "s");
  return c.done("within " + fmt(within) + ", cross " + fmt(cross) + ", margin " + fmt(within - cross) + " in " +
                fmt(secs, 2) + "s");
}

Outcome text8_replication() {
  const char* corpus = fixtures::env_path("EMBENCH_TEXT8");
  const char* questions = fixtures::env_path("EMBENCH_ANALOGIES");
  if (!corpus || !questions) return {Verdict::Skip, "set EMBENCH_TEXT8 and EMBENCH_ANALOGIES"};
  Check c;
  const std::string text = read_text_file(corpus);
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(text, 5));
  const auto analogies = read_analogies_file(questions);
  HyperParams h;
  h.size = 200;
  h.architecture = Architecture::SkipGram;
  h.negative = 15;
  h.window = 5;
  h.iterations = 5;
  h.subsample_t = 1e-4;
  const auto model = train(subsample_stream(*vocab, text, h.subsample_threshold(), h.seed), vocab, h);
  AnalogyOptions opt;
  opt.restrict_vocab = 30000;
  const double acc = analogy_accuracy(model, analogies, opt).value;
  c.near(acc, 0.28, 0.05, "analogy accuracy");

  // Speed ordering at equal size: adding hierarchical softmax costs time.
  HyperParams ns;
  ns.size = 100;
  ns.window = 5;
  ns.negative = 5;
  ns.iterations = 1;
  ns.subsample_t = 1e-4;
  HyperParams hs = ns;
  hs.hs = true;
  const auto stream = subsample_stream(*vocab, text, ns.subsample_threshold(), ns.seed);
  const double t_ns = train(stream, vocab, ns).train_seconds();
  const double t_hs = train(stream, vocab, hs).train_seconds();
  c.expect(t_hs > t_ns, "skip-gram+hs " + fmt(t_hs, 1) + "s not slower than ns " + fmt(t_ns, 1) + "s");
  return c.done("analogy " + fmt(acc) + "; train_seconds hs " + fmt(t_hs, 1) + " > ns " + fmt(t_ns, 1));
}

std::vector<LabeledDocument> read_imdb(const fs::path& p) {
  if (fs::is_regular_file(p)) return read_documents_file(p.string());
  std::vector<LabeledDocument> docs;
  for (const char* split : {"train", "test"})
    for (const auto& [sub, label] : {std::pair{"pos", 1}, std::pair{"neg", 0}}) {
      const fs::path dir = p / split / sub;
      if (!fs::is_directory(dir)) throw ConfigError("missing " + dir.string());
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) docs.push_back({read_text_file(f.string()), label});
    }
  return docs;
}

Outcome imdb_random_baseline() {
  const char* path = fixtures::env_path("EMBENCH_IMDB");
  if (!path) return {Verdict::Skip, "set EMBENCH_IMDB"};
  Check c;
  const auto docs = read_imdb(path);
  std::string text;
  for (const auto& d : docs) (text += d.text) += '\n';
  // Untrained vectors: the trainer's random initialization.
  HyperParams h;
  h.size = 100;
  h.iterations = 0;
  const auto model = train_corpus(text, 5, h);
  const double acc = sentiment_accuracy(model, docs, 13).value;
  c.near(acc, 0.745, 0.03, "f_A");
  return c.done(std::to_string(docs.size()) + " documents, f_A " + fmt(acc));
}

Outcome clustering_oracle() {
  Check c;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> rows(4, std::vector<double>(4));
    for (auto& r : rows)
      for (auto& x : r) x = u(rng);
    const auto got = hierarchical_cluster(rows).merges;
    const auto want = oracles::brute_force_merges(rows);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].left == want[i].left && got[i].right == want[i].right && got[i].size == want[i].size &&
             std::abs(got[i].distance - want[i].distance) <= 1e-12;
    }
    c.expect(same, "matrix " + std::to_string(trial));
  }
  return c.done("50 random 4x4 matrices, merge sequences identical");
}

std::vector<std::vector<double>> two_clusters(std::size_t per, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<std::vector<double>> x;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < per; ++i) {
      std::vector<double> r(10);
      for (auto& v : r) v = g(rng);
      r[0] += k == 0 ? 10.0 : -10.0;
      x.push_back(r);
    }
  return x;
}

Outcome tsne_properties() {
  Check c;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  double worst = 0;
  for (std::size_t n = 3; n <= 10; ++n) {
    std::vector<std::vector<double>> x(n, std::vector<double>(4));
    for (auto& r : x)
      for (auto& v : r) v = g(rng);
    const double perplexity = default_perplexity(n);
    const auto p = tsne_affinities(x, perplexity);
    const auto want = oracles::oracle_affinities(x, perplexity);
    for (std::size_t k = 0; k < n * n; ++k) worst = std::max(worst, std::abs(p[k] - want[k]));
  }
  c.expect(worst <= 1e-6, "affinity difference " + std::to_string(worst));

  const auto x = two_clusters(15, 4);
  TsneRunner runner(x, TsneOptions{});
  runner.run_until(1000);
  const auto& y = runner.layout();
  std::size_t own = 0;
  for (std::size_t i = 0; i < 30; ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 30; ++j) {
      if (i == j) continue;
      const double d = std::hypot(y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    own += i / 15 == best / 15 ? 1 : 0;
  }
  c.expect_eq(own, 30u, "own-cluster neighbors " + std::to_string(own) + "/30");

  TsneOptions opt;
  opt.seed = 5;
  TsneRunner a(x, opt), b(x, opt);
  a.run_until(1000);
  b.run_until(1000);
  c.expect(a.layout() == b.layout(), "same seed gave different layouts");

  char buf[128];
  std::snprintf(buf, sizeof buf, "affinity max |diff| %.1e (n=3..10); %zu/30 own-cluster neighbors; bit-identical rerun",
                worst, own);
  return c.done(buf);
}

Outcome sweep_determinism() {
  Check c;
  const auto config = parse_sweep_config(json::parse(R"({
    "corpus": "text8",
    "params": {
      "size": {"min": 100, "max": 400, "step": 50},
      "architecture": ["skip-gram", "cbow"],
      "hs": [true, false],
      "window": {"min": 3, "max": 7, "step": 2},
      "negative": {"min": 5, "max": 20, "step": 5}
    },
    "fixed": {"iterations": 5}
  })"));
  const auto pts = expand(config);
  c.expect_eq(pts.size(), 336u, "grid has " + std::to_string(pts.size()) + " points");
  // Documented order: declaration order, first field slowest, values ascending.
  std::size_t i = 0;
  bool ordered = pts.size() == 336;
  for (int size = 100; ordered && size <= 400; size += 50)
    for (auto arch : {Architecture::Cbow, Architecture::SkipGram})
      for (bool hs : {false, true})
        for (int window = 3; window <= 7; window += 2)
          for (int neg = 5; neg <= 20; neg += 5, ++i) {
            const auto& p = pts[i];
            ordered = ordered && p.size == size && p.architecture == arch && p.hs == hs && p.window == window &&
                      p.negative == neg;
          }
  c.expect(ordered, "grid order differs from nested ascending loops");
  std::set<std::string> ids;
  for (const auto& p : pts) ids.insert(make_model_id("text8", p));
  c.expect_eq(ids.size(), pts.size(), "model ids collide");

  const std::string random = R"({"strategy": {"random": {"n_samples": 40, "seed": SEED}},
    "params": {"alpha": {"distribution": "log-uniform", "min": 0.005, "max": 0.1},
               "size": {"distribution": "uniform", "min": 50, "max": 300},
               "window": {"choice": [3, 5, 7]}}})";
  auto with_seed = [&](int s) {
    std::string t = random;
    t.replace(t.find("SEED"), 4, std::to_string(s));
    return expand(parse_sweep_config(json::parse(t)));
  };
  c.expect(with_seed(7) == with_seed(7), "random strategy not reproducible");
  c.expect(with_seed(7) != with_seed(8), "random strategy ignores its seed");
  return c.done("336 grid points in nested order, unique ids; random draws reproducible per seed");
}

Outcome state_roundtrip() {
  Check c;
  fixtures::TempDir dir;
  const auto cfg = load_sweep_config(fixtures::copy_toy_workspace(dir));
  auto state = run_sweep(cfg);
  state.loaded_models = {state.entries[2].model_id, state.entries[0].model_id};
  const auto first = export_state(state);
  const auto second = export_state(import_state(first));
  c.expect(first == second, "export -> import -> export changed bytes");

  const auto suite = load_eval_suite(cfg);
  const auto v0 = state.labels.version();
  state.labels.add("happy", "nice", Relation::Synonym);
  state.labels.add("happy", "poor", Relation::Antonym);
  c.expect_eq(state.labels.version(), v0 + 2, "label version did not advance per mutation");
  std::size_t changed = 0;
  for (const auto& e : state.entries) {
    const auto model = load_model((dir.path() / e.model_path).string());
    // Full recomputation: every training triple plus every joined label triple.
    double sum = 0;
    int n = 0;
    for (const auto& t : suite.triples) {
      if (t.split != Split::Train) continue;
      const auto a = *model.vocab().find(t.anchor), b = *model.vocab().find(t.synonym),
                 x = *model.vocab().find(t.antonym);
      sum += oracles::direct_cos(model.row(a), model.row(b)) - oracles::direct_cos(model.row(a), model.row(x));
      ++n;
    }
    for (const auto& t : state.labels.to_triples()) {
      const auto a = *model.vocab().find(t.anchor), b = *model.vocab().find(t.synonym),
                 x = *model.vocab().find(t.antonym);
      sum += oracles::direct_cos(model.row(a), model.row(b)) - oracles::direct_cos(model.row(a), model.row(x));
      ++n;
    }
    const double rescored = suite.evaluate(model, &state.labels).scores.at(metric::kTriples);
    c.near(rescored, sum / n, 1e-12, e.model_id + " rescored f_T");
    changed += rescored != e.metrics.scores.at(metric::kTriples) ? 1 : 0;
  }
  c.expect_eq(changed, state.entries.size(), "label mutation left f_T unchanged");
  return c.done(std::to_string(first.size()) + "-byte state identical after round trip; " +
                std::to_string(changed) + " models rescored like full recomputation");
}

// ---------------------------------------------------------------------------
// Service contract

bool has_fields(const json& j, std::initializer_list<const char*> names) {
  if (!j.is_object()) return false;
  for (const char* n : names)
    if (!j.contains(n)) return false;
  return true;
}

Outcome service_contract() {
  Check c;
  fixtures::TempDir dir;
  const auto cfg = load_sweep_config(fixtures::copy_toy_workspace(dir));
  const auto population = run_sweep(cfg);
  auto id = [&](std::size_t i) { return population.entries.at(i).model_id; };

  ServerConfig sc;
  sc.base_dir = dir.path();
  sc.state = "run_state.json";
  sc.sweep_config = "sweep.json";
  sc.max_loaded_models = 3;
  Workbench bench(sc);
  TsneOptions quick;
  quick.total_iters = 300;
  bench.set_tsne_options(quick);
  Service service(bench);
  const int port = service.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);

  int requests = 0;
  auto call = [&](const std::string& method, const std::string& path, const json* body = nullptr) {
    ++requests;
    httplib::Result r = method == "GET"      ? client.Get(path)
                        : method == "DELETE" ? client.Delete(path)
                        : method == "PUT"    ? client.Put(path, body ? body->dump() : "", "application/json")
                                             : client.Post(path, body ? body->dump() : "", "application/json");
    if (!r) {
      c.expect(false, method + " " + path + ": no response");
      return std::pair<int, json>{0, json()};
    }
    json j;
    try {
      j = json::parse(r->body);
    } catch (const json::exception&) {
      c.expect(false, method + " " + path + ": body is not JSON");
    }
    return std::pair<int, json>{r->status, j};
  };
  auto expect_ok = [&](const std::string& method, const std::string& path, const json& body,
                       std::initializer_list<const char*> fields) {
    auto [status, j] = call(method, path, &body);
    c.expect_eq(status, 200, method + " " + path + " status " + std::to_string(status) + " " + j.dump());
    c.expect(has_fields(j, fields), method + " " + path + " payload missing fields: " + j.dump().substr(0, 200));
    c.expect(has_fields(j, {"label_store_version", "population_version"}) || path == "/state/export",
             method + " " + path + " lacks versions");
    return j;
  };
  auto expect_status = [&](const std::string& method, const std::string& path, const json& body, int want) {
    auto [status, j] = call(method, path, &body);
    c.expect_eq(status, want, method + " " + path + " gave " + std::to_string(status) + ", want " + std::to_string(want));
    c.expect(has_fields(j, {"error", "status"}), method + " " + path + " error payload lacks fields");
  };
  const json none = json::object();

  // Schemas.
  auto models = expect_ok("GET", "/models", none, {"models"});
  c.expect_eq(models["models"].size(), population.entries.size(), "/models size");
  for (const auto& m : models["models"]) {
    c.expect(has_fields(m, {"model_id", "status", "hyper", "metrics", "loaded", "triples_stale"}), "model schema");
  }
  expect_ok("POST", "/session/load", json{{"model_id", id(0)}}, {"loaded_models", "active_query", "filter"});
  expect_ok("POST", "/session/load", json{{"model_id", id(1)}}, {"loaded_models"});
  expect_ok("POST", "/session/query", json{{"query", "good"}}, {"active_query"});
  expect_ok("GET", "/session", none, {"loaded_models", "active_query", "filter"});
  auto heat = expect_ok("GET", "/views/heatmap?k=5&sort=cluster", none, {"rows", "columns", "cells", "query", "sort"});
  c.expect_eq(heat["rows"].size(), 2u, "heatmap rows");
  expect_ok("GET", "/views/heatmap?query=good%20-bad&sort=metric:triples", none, {"rows", "columns", "cells"});
  auto proj = expect_ok("GET", "/views/projection?model=" + id(0) + "&query=good&k=6", none,
                        {"model_id", "iteration", "kl", "done", "points"});
  c.expect(proj["iteration"].get<int>() >= 150, "projection returned before the pre-warm snapshot");
  expect_ok("GET", "/views/parallel", none, {"dimensions", "models"});
  expect_ok("GET", "/views/splom?dims=size,window,triples", none, {"dimensions", "pairs"});
  expect_ok("POST", "/filters", json{{"intervals", {{"size", {8, nullptr}}}}}, {"filter", "matched"});
  expect_ok("GET", "/filters", none, {"filter", "matched"});
  auto label = expect_ok("POST", "/labels", json{{"word_a", "happy"}, {"word_b", "nice"}, {"relation", "synonym"}},
                         {"label", "triples"});
  const auto lid = std::to_string(label["label"]["id"].get<std::uint64_t>());
  expect_ok("PUT", "/labels/" + lid, json{{"word_a", "happy"}, {"word_b", "lovely"}, {"relation", "synonym"}},
            {"label", "triples"});
  expect_ok("GET", "/labels", none, {"labels", "triples"});
  expect_ok("GET", "/sweep/status", none, {"running", "total", "trained", "failed", "pending"});
  const auto exported = client.Get("/state/export");
  c.expect(exported && exported->status == 200, "GET /state/export");
  if (exported) expect_ok("POST", "/state/import", json::parse(exported->body), {"loaded_models"});
  expect_ok("DELETE", "/labels/" + lid, none, {"triples"});
  bench.wait_for_projections();

  // Read idempotence.
  std::size_t idempotent = 0;
  const std::vector<std::string> reads{"/models", "/session", "/views/heatmap", "/views/parallel", "/views/splom",
                                       "/filters", "/labels", "/sweep/status", "/state/export"};
  for (const auto& path : reads) {
    auto a = client.Get(path);
    auto b = client.Get(path);
    requests += 2;
    const bool same = a && b && a->status == 200 && a->body == b->body;
    c.expect(same, "GET " + path + " not idempotent");
    idempotent += same ? 1 : 0;
  }

  // Error paths.
  expect_status("POST", "/session/load", json{{"model_id", "m0000000000000000"}}, 404);
  expect_status("DELETE", "/session/load/" + id(3), none, 404);
  expect_status("GET", "/views/projection?model=" + id(3) + "&query=good", none, 404);
  expect_status("PUT", "/labels/999", json{{"word_a", "good"}, {"word_b", "fine"}, {"relation", "synonym"}}, 404);
  expect_status("GET", "/no/such/route", none, 404);
  expect_status("GET", "/views/heatmap?query=good%20zzzunknown", none, 400);
  expect_status("GET", "/views/heatmap?query=good&k=abc", none, 400);
  expect_status("POST", "/session/load", none, 400);
  expect_status("POST", "/labels", json{{"word_a", "good"}, {"word_b", "fine"}, {"relation", "kinda"}}, 400);
  expect_status("POST", "/filters", json{{"intervals", {{"size", {10, 5}}}}}, 400);
  json broken = exported ? json::parse(exported->body) : json::object();
  broken.erase("labels");
  expect_status("POST", "/state/import", broken, 400);
  expect_ok("POST", "/labels", json{{"word_a", "fine"}, {"word_b", "poor"}, {"relation", "antonym"}}, {"label"});
  expect_status("POST", "/labels", json{{"word_a", "poor"}, {"word_b", "fine"}, {"relation", "synonym"}}, 409);
  expect_ok("POST", "/session/load", json{{"model_id", id(2)}}, {"loaded_models"});
  expect_status("POST", "/session/load", json{{"model_id", id(3)}}, 409);

  service.stop();
  return c.done(std::to_string(requests) + " requests; " + std::to_string(idempotent) + "/" +
                std::to_string(reads.size()) + " reads idempotent; 404/400/409 paths as specified");
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"triples-oracle", triples_oracle},
    {"sgns-gradient", sgns_gradient},
    {"hs-normalization", hs_normalization},
    {"synthetic-clusters", synthetic_clusters},
    {"text8", text8_replication},
    {"imdb", imdb_random_baseline},
    {"clustering-oracle", clustering_oracle},
    {"tsne-properties", tsne_properties},
    {"sweep-determinism", sweep_determinism},
    {"state-roundtrip", state_roundtrip},
    {"service-contract", service_contract},
};

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only = argv[++i];
    } else if (!std::strcmp(argv[i], "--list")) {
      for (const auto& c : kCriteria) std::printf("%s\n", c.name);
      return 0;
    } else {
      std::fprintf(stderr, "usage: acceptance [--only NAME] [--list]\n");
      return 2;
    }
  }
  int ran = 0, failed = 0, skipped = 0;
  for (const auto& crit : kCriteria) {
    if (!only.empty() && only != crit.name) continue;
    ++ran;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = crit.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("%s  %-20s %s (%.1fs)\n", tag, crit.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.verdict == Verdict::Fail ? 1 : 0;
    skipped += o.verdict == Verdict::Skip ? 1 : 0;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  std::printf("%d passed, %d failed, %d skipped\n", ran - failed - skipped, failed, skipped);
  if (failed) return 1;
  if (!only.empty() && skipped == ran) return 77;
  return 0;
}
