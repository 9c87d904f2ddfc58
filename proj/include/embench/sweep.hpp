#pragma once

// Sweep configuration, expansion into hyperparameter points, the job
// scheduler, and the persisted run state.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/errors.hpp"
#include "embench/eval.hpp"
#include "embench/hyperparams.hpp"
#include "embench/model.hpp"
#include "embench/random.hpp"
#include "embench/trainer.hpp"

namespace embench {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct ParamSpec {
  enum class Kind { List, Range, Uniform, LogUniform, Choice };

  Kind kind = Kind::List;
  std::vector<json> values;  // List and Choice
  double min = 0.0;
  double max = 0.0;
  double step = 0.0;  // Range
};

inline bool integer_field(std::string_view name) {
  return name == "size" || name == "window" || name == "negative" || name == "iterations" || name == "seed";
}

enum class Strategy { Grid, Random };

struct SweepConfig {
  json raw;                // document as given, persisted in the run state
  fs::path base_dir = ".";  // relative paths resolve against this

  std::string corpus;
  std::string corpus_id;
  std::uint32_t min_count = kDefaultMinCount;
  std::vector<std::pair<std::string, ParamSpec>> params;  // declaration order
  HyperParams fixed;
  Strategy strategy = Strategy::Grid;
  std::size_t n_samples = 0;
  std::uint64_t random_seed = 0;
  std::optional<std::size_t> max_loaded_models;

  std::string triples;
  std::string documents;
  std::string analogies;
  std::string labels;
  std::uint64_t split_seed = 13;
  std::size_t analogy_restrict_vocab = 0;
  std::string pretrained;
  std::string lexicon;
  std::string model_dir = "models";
  std::string state = "run_state.json";

  std::string resolve(const std::string& p) const {
    if (p.empty()) return p;
    const fs::path path(p);
    return path.is_absolute() ? p : (base_dir / path).lexically_normal().string();
  }
};

namespace detail {

inline double spec_number(const json& obj, const char* key, const std::string& param) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ConfigError("parameter '" + param + "' needs numeric '" + key + "'");
  }
  return obj[key].get<double>();
}

inline ParamSpec parse_param(const std::string& name, const json& v) {
  ParamSpec spec;
  if (v.is_array()) {
    spec.kind = ParamSpec::Kind::List;
    spec.values.assign(v.begin(), v.end());
    return spec;
  }
  if (!v.is_object()) {
    spec.kind = ParamSpec::Kind::List;
    spec.values = {v};
    return spec;
  }
  if (v.contains("choice")) {
    if (!v["choice"].is_array() || v["choice"].empty()) throw ConfigError("parameter '" + name + "': choice needs a non-empty list");
    spec.kind = ParamSpec::Kind::Choice;
    spec.values.assign(v["choice"].begin(), v["choice"].end());
    return spec;
  }
  if (v.contains("distribution")) {
    const auto dist = v["distribution"].get<std::string>();
    spec.min = spec_number(v, "min", name);
    spec.max = spec_number(v, "max", name);
    if (spec.min > spec.max) throw ConfigError("parameter '" + name + "': min > max");
    if (dist == "uniform") {
      spec.kind = ParamSpec::Kind::Uniform;
    } else if (dist == "log-uniform") {
      if (spec.min <= 0.0) throw ConfigError("parameter '" + name + "': log-uniform needs min > 0");
      spec.kind = ParamSpec::Kind::LogUniform;
    } else {
      throw ConfigError("parameter '" + name + "': unknown distribution '" + dist + "'");
    }
    return spec;
  }
  spec.kind = ParamSpec::Kind::Range;
  spec.min = spec_number(v, "min", name);
  spec.max = spec_number(v, "max", name);
  spec.step = spec_number(v, "step", name);
  if (spec.min > spec.max) throw ConfigError("parameter '" + name + "': min > max");
  if (!(spec.step > 0.0)) throw ConfigError("parameter '" + name + "': step must be > 0");
  return spec;
}

inline std::string opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace detail

/// Parses a sweep configuration document:
///
///   { "corpus": "text8", "corpus_id": "text8", "min_count": 5,
///     "strategy": "grid" | {"random": {"n_samples": 20, "seed": 7}},
///     "params": { "size": {"min": 100, "max": 400, "step": 50},
///                 "architecture": ["skip-gram", "cbow"],
///                 "alpha": {"distribution": "log-uniform", "min": 0.005, "max": 0.1},
///                 "window": {"choice": [3, 5, 7]} },
///     "fixed": { "iterations": 5, "subsample_t": 1e-4 },
///     "evaluation": { "triples": "...", "documents": "...", "analogies": "...",
///                     "labels": "...", "split_seed": 13, "analogy_restrict_vocab": 30000 },
///     "pretrained": "...", "lexicon": "...", "model_dir": "models",
///     "state": "run_state.json", "max_loaded_models": 15 }
inline SweepConfig parse_sweep_config(const json& j, const fs::path& base_dir = ".") {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  SweepConfig c;
  c.raw = j;
  c.base_dir = base_dir;
  try {
    c.corpus = detail::opt_string(j, "corpus");
    c.corpus_id = detail::opt_string(j, "corpus_id");
    if (c.corpus_id.empty()) c.corpus_id = fs::path(c.corpus).filename().string();
    if (j.contains("min_count")) {
      const auto mc = j["min_count"].get<std::int64_t>();
      if (mc < 1) throw ConfigError("min_count must be >= 1");
      c.min_count = static_cast<std::uint32_t>(mc);
    }
    if (j.contains("fixed")) {
      const auto& fixed = j["fixed"];
      if (!fixed.is_object()) throw ConfigError("'fixed' must be an object");
      for (auto it = fixed.begin(); it != fixed.end(); ++it) set_field(c.fixed, it.key(), it.value());
    }
    if (j.contains("params")) {
      const auto& params = j["params"];
      if (!params.is_object()) throw ConfigError("'params' must be an object");
      for (auto it = params.begin(); it != params.end(); ++it) {
        if (!is_hyper_field(it.key())) throw ConfigError("unknown hyperparameter '" + it.key() + "'");
        c.params.emplace_back(it.key(), detail::parse_param(it.key(), it.value()));
      }
    }
    const json strategy = j.value("strategy", json("grid"));
    if (strategy.is_string() && strategy.get<std::string>() == "grid") {
      c.strategy = Strategy::Grid;
    } else if (strategy.is_object() && strategy.contains("random")) {
      c.strategy = Strategy::Random;
      const auto& r = strategy["random"];
      const auto n = r.value("n_samples", std::int64_t{0});
      if (n < 1) throw ConfigError("random strategy needs n_samples >= 1");
      c.n_samples = static_cast<std::size_t>(n);
      c.random_seed = r.value("seed", std::uint64_t{0});
    } else {
      throw ConfigError("strategy must be \"grid\" or {\"random\": {...}}");
    }
    if (j.contains("max_loaded_models") && !j["max_loaded_models"].is_null()) {
      const auto m = j["max_loaded_models"].get<std::int64_t>();
      if (m < 1) throw ConfigError("max_loaded_models must be >= 1");
      c.max_loaded_models = static_cast<std::size_t>(m);
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      c.triples = detail::opt_string(e, "triples");
      c.documents = detail::opt_string(e, "documents");
      c.analogies = detail::opt_string(e, "analogies");
      c.labels = detail::opt_string(e, "labels");
      c.split_seed = e.value("split_seed", c.split_seed);
      c.analogy_restrict_vocab = e.value("analogy_restrict_vocab", std::size_t{0});
    }
    c.pretrained = detail::opt_string(j, "pretrained");
    c.lexicon = detail::opt_string(j, "lexicon");
    if (j.contains("model_dir")) c.model_dir = detail::opt_string(j, "model_dir");
    if (j.contains("state")) c.state = detail::opt_string(j, "state");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  return c;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("sweep config '" + path + "': " + e.what());
  }
  return parse_sweep_config(j, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Expansion

namespace detail {

inline bool json_less(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() < b.get<double>();
  if (a.is_boolean() && b.is_boolean()) return !a.get<bool>() && b.get<bool>();
  if (a.is_string() && b.is_string()) return a.get<std::string>() < b.get<std::string>();
  return a.type() < b.type();
}

inline json range_value(const std::string& name, double v) {
  if (integer_field(name)) return static_cast<std::int64_t>(std::llround(v));
  return v;
}

inline std::vector<json> range_values(const std::string& name, const ParamSpec& s) {
  std::vector<json> out;
  const double span = (s.max - s.min) / s.step;
  const auto count = static_cast<std::int64_t>(std::floor(span + 1e-9));
  for (std::int64_t i = 0; i <= count; ++i) out.push_back(range_value(name, s.min + static_cast<double>(i) * s.step));
  return out;
}

/// Grid values of one parameter, ascending.
inline std::vector<json> grid_values(const std::string& name, const ParamSpec& s) {
  std::vector<json> values;
  switch (s.kind) {
    case ParamSpec::Kind::List:
    case ParamSpec::Kind::Choice:
      values = s.values;
      std::stable_sort(values.begin(), values.end(), json_less);
      break;
    case ParamSpec::Kind::Range:
      values = range_values(name, s);
      break;
    case ParamSpec::Kind::Uniform:
    case ParamSpec::Kind::LogUniform:
      throw ConfigError("parameter '" + name + "' is a distribution and cannot be gridded");
  }
  return values;
}

inline json draw_value(const std::string& name, const ParamSpec& s, Rng& rng) {
  switch (s.kind) {
    case ParamSpec::Kind::List:
    case ParamSpec::Kind::Choice:
      if (s.values.empty()) throw ConfigError("parameter '" + name + "' has no values");
      return s.values[rng.below(s.values.size())];
    case ParamSpec::Kind::Range: {
      const auto vals = range_values(name, s);
      return vals[rng.below(vals.size())];
    }
    case ParamSpec::Kind::Uniform:
      return range_value(name, rng.uniform(s.min, s.max));
    case ParamSpec::Kind::LogUniform:
      return range_value(name, std::exp(rng.uniform(std::log(s.min), std::log(s.max))));
  }
  return nullptr;
}

inline HyperParams make_point(const HyperParams& base, const std::vector<std::pair<std::string, json>>& assignment) {
  HyperParams h = base;
  for (const auto& [name, value] : assignment) set_field(h, name, value);
  try {
    h.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("sweep point " + canonical_string(h) + ": " + e.what());
  }
  return h;
}

}  // namespace detail

/// Grid: Cartesian product, first declared parameter varying slowest,
/// values ascending. Random: n_samples independent draws in declaration
/// order from a generator seeded with the strategy seed; duplicates are
/// kept. Pure: touches neither corpus nor filesystem.
inline std::vector<HyperParams> expand(const SweepConfig& config) {
  std::vector<HyperParams> out;
  if (config.strategy == Strategy::Grid) {
    std::vector<std::vector<json>> axes;
    for (const auto& [name, spec] : config.params) axes.push_back(detail::grid_values(name, spec));
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].empty()) throw ConfigError("parameter '" + config.params[i].first + "' has no values: empty grid");
    }
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
      std::vector<std::pair<std::string, json>> assignment;
      for (std::size_t i = 0; i < axes.size(); ++i) assignment.emplace_back(config.params[i].first, axes[i][idx[i]]);
      out.push_back(detail::make_point(config.fixed, assignment));
      std::size_t pos = axes.size();
      while (pos > 0) {
        --pos;
        if (++idx[pos] < axes[pos].size()) break;
        idx[pos] = 0;
        if (pos == 0) return out;
      }
      if (axes.empty()) return out;
    }
  }
  if (config.n_samples == 0) throw ConfigError("random strategy with zero samples: empty sweep");
  Rng rng(config.random_seed);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    std::vector<std::pair<std::string, json>> assignment;
    for (const auto& [name, spec] : config.params) assignment.emplace_back(name, detail::draw_value(name, spec, rng));
    out.push_back(detail::make_point(config.fixed, assignment));
  }
  return out;
}

/// A finer sweep around `center`: each range becomes an explicit list
/// center + i * step/factor for |i * step/factor| <= step, clipped to the
/// original bounds (integer fields keep a step of at least 1);
/// distributions shrink to a window 1/factor as wide around the center;
/// lists collapse to the center value.
inline json refine_config(const SweepConfig& config, const HyperParams& center, int factor = 2) {
  if (factor < 2) throw ConfigError("refine factor must be >= 2");
  json out = config.raw;
  json params = json::object();
  const json center_json = to_json(center);
  for (const auto& [name, spec] : config.params) {
    const json cv = center_json.at(name);
    switch (spec.kind) {
      case ParamSpec::Kind::List:
      case ParamSpec::Kind::Choice:
        params[name] = json::array({cv});
        break;
      case ParamSpec::Kind::Range: {
        double fine = spec.step / factor;
        if (integer_field(name)) fine = std::max(1.0, std::floor(fine));
        const double c = cv.get<double>();
        const auto m = static_cast<std::int64_t>(std::floor(spec.step / fine + 1e-9));
        json values = json::array();
        for (std::int64_t i = -m; i <= m; ++i) {
          const double v = c + static_cast<double>(i) * fine;
          if (v < spec.min - 1e-9 * spec.step || v > spec.max + 1e-9 * spec.step) continue;
          values.push_back(detail::range_value(name, v));
        }
        params[name] = values;
        break;
      }
      case ParamSpec::Kind::Uniform:
      case ParamSpec::Kind::LogUniform: {
        const double c = cv.get<double>();
        json d;
        d["distribution"] = spec.kind == ParamSpec::Kind::Uniform ? "uniform" : "log-uniform";
        if (spec.kind == ParamSpec::Kind::Uniform) {
          const double half = (spec.max - spec.min) / (2.0 * factor);
          d["min"] = std::max(spec.min, c - half);
          d["max"] = std::min(spec.max, c + half);
        } else {
          const double half = (std::log(spec.max) - std::log(spec.min)) / (2.0 * factor);
          d["min"] = std::max(spec.min, std::exp(std::log(c) - half));
          d["max"] = std::min(spec.max, std::exp(std::log(c) + half));
        }
        params[name] = d;
        break;
      }
    }
  }
  out["params"] = params;
  return out;
}

/// Stable id from the corpus id and canonical hyperparameters (FNV-1a 64).
inline std::string make_model_id(const std::string& corpus_id, const HyperParams& h) {
  const std::string key = corpus_id + "\n" + canonical_string(h);
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : key) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "m%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

// ---------------------------------------------------------------------------
// Run state

enum class Status { Pending, Trained, Failed };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Pending: return "pending";
    case Status::Trained: return "trained";
    case Status::Failed: return "failed";
  }
  return "pending";
}

inline Status parse_status(std::string_view s) {
  if (s == "pending") return Status::Pending;
  if (s == "trained") return Status::Trained;
  if (s == "failed") return Status::Failed;
  throw FormatError("unknown status '" + std::string(s) + "'");
}

struct RunEntry {
  std::string model_id;
  HyperParams hyper;
  Status status = Status::Pending;
  MetricReport metrics;
  std::string model_path;  // relative to the state file
  std::string trained_at;
  std::string error;

  friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

struct RunState {
  json config = json::object();
  std::vector<RunEntry> entries;
  LabelStore labels;
  std::vector<std::string> loaded_models;

  RunEntry* find(const std::string& id) {
    for (auto& e : entries) {
      if (e.model_id == id) return &e;
    }
    return nullptr;
  }
  const RunEntry* find(const std::string& id) const { return const_cast<RunState*>(this)->find(id); }

  std::size_t count(Status s) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.status == s ? 1 : 0;
    return n;
  }
};

/// Trained entry with the highest value of `metric`; ties go to the
/// earlier entry. Throws MetricUnavailable when no entry has the metric.
inline const RunEntry& best_entry(const RunState& state, const std::string& metric = metric::kCombined) {
  const RunEntry* best = nullptr;
  for (const auto& e : state.entries) {
    if (e.status != Status::Trained) continue;
    auto v = e.metrics.score(metric);
    if (v && (!best || *v > *best->metrics.score(metric))) best = &e;
  }
  if (!best) throw MetricUnavailable("no trained model has metric '" + metric + "'");
  return *best;
}

inline constexpr const char* kRunStateFormat = "embench.runstate/1";

/// Exact decimal text for a double (17 significant digits round-trips).
inline std::string exact_decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json metrics_to_json(const MetricReport& m) {
  json j;
  json scores = json::object();
  for (const auto& [k, v] : m.scores) scores[k] = exact_decimal(v);
  json skipped = json::object();
  for (const auto& [k, v] : m.skipped) skipped[k] = v;
  j["scores"] = scores;
  j["skipped"] = skipped;
  return j;
}

inline MetricReport metrics_from_json(const json& j) {
  MetricReport m;
  for (auto it = j.at("scores").begin(); it != j.at("scores").end(); ++it) {
    const auto text = it.value().get<std::string>();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') throw FormatError("metric '" + it.key() + "' is not a decimal string");
    m.scores[it.key()] = v;
  }
  for (auto it = j.at("skipped").begin(); it != j.at("skipped").end(); ++it) {
    m.skipped[it.key()] = it.value().get<std::size_t>();
  }
  return m;
}

inline json labels_to_json(const LabelStore& store) {
  json j;
  j["version"] = store.version();
  j["next_id"] = store.next_id();
  json items = json::array();
  for (const auto& l : store.list()) {
    json item;
    item["id"] = l.id;
    item["word_a"] = l.word_a;
    item["word_b"] = l.word_b;
    item["relation"] = std::string(to_string(l.relation));
    item["created_at"] = l.created_at;
    items.push_back(item);
  }
  j["items"] = items;
  return j;
}

inline LabelStore labels_from_json(const json& j) {
  std::vector<PairLabel> labels;
  for (const auto& item : j.at("items")) {
    labels.push_back({item.at("id").get<std::uint64_t>(), item.at("word_a").get<std::string>(),
                      item.at("word_b").get<std::string>(), parse_relation(item.at("relation").get<std::string>()),
                      item.value("created_at", std::string{})});
  }
  return LabelStore::restore(std::move(labels), j.at("version").get<std::uint64_t>(),
                             j.value("next_id", std::uint64_t{1}));
}

inline json state_to_json(const RunState& s) {
  json j;
  j["format"] = kRunStateFormat;
  j["config"] = s.config;
  json models = json::array();
  for (const auto& e : s.entries) {
    json m;
    m["model_id"] = e.model_id;
    m["status"] = std::string(to_string(e.status));
    m["hyper"] = to_json(e.hyper);
    m["path"] = e.model_path;
    m["trained_at"] = e.trained_at;
    m["error"] = e.error;
    m["metrics"] = metrics_to_json(e.metrics);
    models.push_back(m);
  }
  j["models"] = models;
  j["labels"] = labels_to_json(s.labels);
  json session;
  session["loaded_models"] = s.loaded_models;
  j["session"] = session;
  return j;
}

inline std::string export_state(const RunState& s) { return state_to_json(s).dump(2) + "\n"; }

/// Parses a run state document. Missing sections raise FormatError naming
/// the section.
inline RunState import_state_json(const json& j) {
  if (!j.is_object()) throw FormatError("run state must be a JSON object");
  for (const char* section : {"format", "config", "models", "labels"}) {
    if (!j.contains(section)) throw FormatError(std::string("run state is missing the '") + section + "' section");
  }
  if (j["format"] != kRunStateFormat) throw FormatError("unsupported run state format " + j["format"].dump());
  RunState s;
  try {
    s.config = j["config"];
    for (const auto& m : j["models"]) {
      RunEntry e;
      e.model_id = m.at("model_id").get<std::string>();
      e.status = parse_status(m.at("status").get<std::string>());
      e.hyper = hyper_from_json(m.at("hyper"));
      e.model_path = m.value("path", std::string{});
      e.trained_at = m.value("trained_at", std::string{});
      e.error = m.value("error", std::string{});
      e.metrics = metrics_from_json(m.at("metrics"));
      if (s.find(e.model_id)) throw FormatError("duplicate model_id '" + e.model_id + "'");
      if (e.status == Status::Trained && e.metrics.scores.empty()) {
        throw FormatError("trained model '" + e.model_id + "' has no metrics");
      }
      s.entries.push_back(std::move(e));
    }
    try {
      s.labels = labels_from_json(j["labels"]);
    } catch (const json::exception& e) {
      throw FormatError(std::string("run state 'labels' section: ") + e.what());
    }
    if (j.contains("session")) {
      s.loaded_models = j["session"].value("loaded_models", std::vector<std::string>{});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("run state: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("run state: ") + e.what());
  }
  return s;
}

inline RunState import_state(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("run state is not valid JSON: ") + e.what());
  }
  return import_state_json(j);
}

/// Writes via a temporary file and rename so readers never see a partial
/// state.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline void save_state(const RunState& s, const fs::path& path) { write_file_atomic(path, export_state(s)); }

inline RunState load_state(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open run state '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return import_state(ss.str());
}

// ---------------------------------------------------------------------------
// Scheduler

struct SweepOptions {
  std::size_t parallelism = 1;
  /// Overrides the config's state path when non-empty.
  std::string state_path;
  /// Called under the writer lock after every state change.
  std::function<void(const RunState&)> on_update;
  /// Checked between jobs; set to stop scheduling new work.
  const std::atomic<bool>* cancel = nullptr;
};

inline EvalSuite load_eval_suite(const SweepConfig& c) {
  EvalSuite suite;
  if (!c.triples.empty()) suite.triples = read_triples_file(c.resolve(c.triples));
  if (!c.documents.empty()) suite.documents = read_documents_file(c.resolve(c.documents));
  if (!c.analogies.empty()) suite.analogies = read_analogies_file(c.resolve(c.analogies));
  suite.split_seed = c.split_seed;
  suite.analogy_options.restrict_vocab = c.analogy_restrict_vocab;
  return suite;
}

inline fs::path state_path_for(const SweepConfig& c, const SweepOptions& o) {
  return o.state_path.empty() ? fs::path(c.resolve(c.state)) : fs::path(o.state_path);
}

/// Trains and evaluates every point not already trained in the state file
/// at the state path (so an interrupted sweep resumes). Failures are
/// recorded per point. The state file is rewritten after every completed
/// job.
inline RunState run_points(const SweepConfig& config, const std::vector<HyperParams>& points,
                           const SweepOptions& options = {}) {
  if (options.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  const std::string corpus_path = config.resolve(config.corpus);
  if (corpus_path.empty() || !fs::is_regular_file(corpus_path)) {
    throw ConfigError("corpus '" + corpus_path + "' does not exist");
  }
  const fs::path state_path = state_path_for(config, options);
  const fs::path state_dir = state_path.has_parent_path() ? state_path.parent_path() : fs::path(".");
  const fs::path model_dir = config.resolve(config.model_dir);
  fs::create_directories(model_dir);

  RunState state;
  if (fs::exists(state_path)) {
    state = load_state(state_path);
  } else if (!config.labels.empty()) {
    state.labels = LabelStore::read_file(config.resolve(config.labels));
  }
  state.config = config.raw;

  const std::string text = read_text_file(corpus_path);
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(text, config.min_count));
  const EvalSuite suite = load_eval_suite(config);

  std::vector<std::size_t> todo;
  for (const auto& h : points) {
    const auto id = make_model_id(config.corpus_id, h);
    RunEntry* e = state.find(id);
    if (e && e->status == Status::Trained && fs::exists(state_dir / e->model_path)) continue;
    if (!e) {
      state.entries.push_back({id, h, Status::Pending, {}, {}, {}, {}});
      e = &state.entries.back();
    }
    e->status = Status::Pending;
    e->error.clear();
    if (std::find_if(todo.begin(), todo.end(), [&](std::size_t i) { return state.entries[i].model_id == id; }) ==
        todo.end()) {
      todo.push_back(static_cast<std::size_t>(e - state.entries.data()));
    }
  }
  std::mutex state_mutex;
  auto publish = [&] {
    save_state(state, state_path);
    if (options.on_update) options.on_update(state);
  };
  {
    std::lock_guard lock(state_mutex);
    publish();
  }

  std::mutex stream_mutex;
  std::map<std::pair<double, std::uint64_t>, std::shared_ptr<const TokenStream>> streams;
  auto stream_for = [&](const HyperParams& h) {
    std::lock_guard lock(stream_mutex);
    auto key = std::pair{h.subsample_t, h.seed};
    auto& slot = streams[key];
    if (!slot) slot = std::make_shared<const TokenStream>(subsample_stream(*vocab, text, h.subsample_threshold(), h.seed));
    return slot;
  };
  std::mutex resource_mutex;
  std::shared_ptr<const EmbeddingModel> pretrained;
  std::shared_ptr<const Lexicon> lexicon;
  auto get_pretrained = [&] {
    std::lock_guard lock(resource_mutex);
    if (config.pretrained.empty()) throw ConfigError("lockf is set but the sweep has no pretrained model");
    if (!pretrained) pretrained = std::make_shared<const EmbeddingModel>(load_model(config.resolve(config.pretrained)));
    return pretrained;
  };
  auto get_lexicon = [&] {
    std::lock_guard lock(resource_mutex);
    if (config.lexicon.empty()) throw ConfigError("retro is set but the sweep has no lexicon");
    if (!lexicon) lexicon = std::make_shared<const Lexicon>(Lexicon::read_file(config.resolve(config.lexicon)));
    return lexicon;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (options.cancel && options.cancel->load()) return;
      const std::size_t job = next.fetch_add(1);
      if (job >= todo.size()) return;
      HyperParams h;
      std::string id;
      {
        std::lock_guard lock(state_mutex);
        h = state.entries[todo[job]].hyper;
        id = state.entries[todo[job]].model_id;
      }
      RunEntry result{id, h, Status::Trained, {}, {}, {}, {}};
      try {
        std::shared_ptr<const EmbeddingModel> pre;
        std::shared_ptr<const Lexicon> lex;
        if (h.uses_pretrained()) pre = get_pretrained();
        if (h.uses_retrofit()) lex = get_lexicon();
        auto model = train(*stream_for(h), vocab, h, pre.get(), lex.get());
        model.set_model_id(id);
        const fs::path file = model_dir / (id + ".emb");
        save_model(model, file.string());
        result.model_path = fs::relative(file, state_dir).generic_string();
        LabelStore labels_snapshot;
        {
          std::lock_guard lock(state_mutex);
          labels_snapshot = state.labels;
        }
        result.metrics = suite.evaluate(model, &labels_snapshot);
        result.trained_at = utc_timestamp();
      } catch (const std::exception& e) {
        result.status = Status::Failed;
        result.error = e.what();
        result.metrics = {};
      }
      std::lock_guard lock(state_mutex);
      state.entries[todo[job]] = std::move(result);
      publish();
    }
  };
  {
    std::vector<std::jthread> threads;
    const std::size_t n = std::min(options.parallelism, std::max<std::size_t>(todo.size(), 1));
    for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  }
  return state;
}

inline RunState run_sweep(const SweepConfig& config, const SweepOptions& options = {}) {
  return run_points(config, expand(config), options);
}

}  // namespace embench
