#pragma once

// HTTP/JSON service over a model population: session (loaded models,
// active query, filter), views, labeling with live f_T feedback, sweep
// control and run-state import/export.
//
// Workbench holds all state and is usable without a socket; Service maps
// it onto routes.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "embench/analysis.hpp"
#include "embench/errors.hpp"
#include "embench/eval.hpp"
#include "embench/sweep.hpp"

namespace embench {

/// Status code for an exception raised while serving a request.
inline int http_status(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e)) return 409;
  if (dynamic_cast<const ConfigError*>(&e)) return 422;
  if (dynamic_cast<const EmptyCorpus*>(&e) || dynamic_cast<const EmptyVocabulary*>(&e)) return 422;
  if (dynamic_cast<const MetricUnavailable*>(&e)) return 422;
  if (dynamic_cast<const Error*>(&e)) return 400;
  if (dynamic_cast<const json::exception*>(&e)) return 400;
  return 500;
}

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state = "run_state.json";
  std::string sweep_config;  // optional; supplies evaluation inputs and the default sweep
  std::optional<std::size_t> max_loaded_models;
  fs::path base_dir = ".";

  std::string resolve(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base_dir / p).lexically_normal().string();
  }

  /// { "host": "...", "port": 8080, "state": "run_state.json",
  ///   "sweep_config": "sweep.json", "max_loaded_models": 15 }
  /// EMBENCH_PORT overrides the port.
  static ServerConfig from_json(const json& j, const fs::path& base_dir = ".") {
    if (!j.is_object()) throw ConfigError("server config must be a JSON object");
    ServerConfig c;
    c.base_dir = base_dir;
    try {
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.state = j.value("state", c.state);
      c.sweep_config = j.value("sweep_config", std::string{});
      if (j.contains("max_loaded_models") && !j["max_loaded_models"].is_null()) {
        const auto m = j["max_loaded_models"].get<std::int64_t>();
        if (m < 1) throw ConfigError("max_loaded_models must be >= 1");
        c.max_loaded_models = static_cast<std::size_t>(m);
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("server config: ") + e.what());
    }
    c.apply_env();
    return c;
  }

  static ServerConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open server config '" + path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("server config '" + path + "': " + e.what());
    }
    return from_json(j, fs::path(path).parent_path());
  }

  void apply_env() {
    if (const char* p = std::getenv("EMBENCH_PORT"); p && *p) {
      char* end = nullptr;
      const long v = std::strtol(p, &end, 10);
      if (*end != '\0' || v < 0 || v > 65535) throw ConfigError(std::string("EMBENCH_PORT is not a port: ") + p);
      port = static_cast<int>(v);
    }
  }
};

class Workbench {
 public:
  explicit Workbench(ServerConfig config) : config_(std::move(config)) {
    state_path_ = config_.resolve(config_.state);
    if (fs::exists(state_path_)) state_ = load_state(state_path_);
    if (!config_.sweep_config.empty()) {
      sweep_config_ = load_sweep_config(config_.resolve(config_.sweep_config));
      suite_ = load_eval_suite(*sweep_config_);
      if (!fs::exists(state_path_) && !sweep_config_->labels.empty()) {
        state_.labels = LabelStore::read_file(sweep_config_->resolve(sweep_config_->labels));
      }
    } else {
      suite_from_state();
    }
    max_loaded_ = config_.max_loaded_models;
    if (!max_loaded_ && sweep_config_) max_loaded_ = sweep_config_->max_loaded_models;
    for (const auto& e : state_.entries) scored_with_[e.model_id] = state_.labels.version();
    const auto wanted = state_.loaded_models;
    state_.loaded_models.clear();
    for (const auto& id : wanted) {
      try {
        load_locked(id);
      } catch (const Error&) {
        // Stale session entries are dropped.
      }
    }
  }

  ~Workbench() {
    stop_sweep_ = true;
    if (sweep_thread_.joinable()) sweep_thread_.join();
    std::vector<std::shared_ptr<ProjectionJob>> jobs;
    {
      std::lock_guard lock(projection_mutex_);
      for (auto& [key, job] : projections_) jobs.push_back(job);
    }
    for (auto& job : jobs) {
      job->cancel = true;
      if (job->thread.joinable()) job->thread.join();
    }
  }

  Workbench(const Workbench&) = delete;
  Workbench& operator=(const Workbench&) = delete;

  // -- reads ----------------------------------------------------------------

  json models() const {
    std::shared_lock lock(mutex_);
    json out = versions_locked();
    json items = json::array();
    for (const auto& e : state_.entries) items.push_back(entry_json_locked(e));
    out["models"] = items;
    return out;
  }

  json session() const {
    std::shared_lock lock(mutex_);
    return session_json_locked();
  }

  /// Query parameters: query (else the active query), sort, k, budget,
  /// active (model id whose columns are zoomed).
  json heatmap(const std::map<std::string, std::string>& params) const {
    std::shared_lock lock(mutex_);
    const auto query = query_param_locked(params);
    HeatmapOptions opt;
    opt.k = size_param(params, "k", kDefaultNeighbors);
    opt.word_budget = size_param(params, "budget", kDefaultColumnBudget);
    if (opt.k < 1) throw QueryError("k must be at least 1");
    if (opt.word_budget < 1) throw QueryError("budget must be at least 1");
    const auto spec = SortSpec::parse(param(params, "sort"));
    const auto loaded = loaded_locked();
    if (loaded.empty()) throw ConfigError("no models are loaded");
    if (auto a = param(params, "active"); !a.empty()) {
      auto it = std::find(state_.loaded_models.begin(), state_.loaded_models.end(), a);
      if (it == state_.loaded_models.end()) throw NotFound("model '" + a + "' is not loaded");
      opt.active = static_cast<std::size_t>(it - state_.loaded_models.begin());
    }
    const auto view = sort_heatmap(build_heatmap(loaded, query, opt), spec);
    json out = versions_locked();
    out["query"] = view.query;
    out["sort"] = view.sort.to_string();
    out["k"] = opt.k;
    json rows = json::array();
    for (std::size_t r = 0; r < view.rows.size(); ++r) {
      json row;
      row["model_id"] = view.rows[r].model_id;
      row["load_index"] = view.load_index[r];
      row["matched"] = matches(view.rows[r], filter_);
      row["hyper"] = to_json(view.rows[r].hyper);
      row["metrics"] = scores_json(view.rows[r].metrics);
      rows.push_back(row);
    }
    out["rows"] = rows;
    const auto variance = view.column_variance();
    json cols = json::array();
    for (std::size_t c = 0; c < view.col_words.size(); ++c) {
      json col;
      col["word"] = view.col_words[c];
      col["mode"] = std::string(to_string(view.col_mode[c]));
      col["rank"] = view.col_rank[c];
      col["variance"] = variance[c] ? json(*variance[c]) : json(nullptr);
      cols.push_back(col);
    }
    out["columns"] = cols;
    json cells = json::array();
    for (const auto& row : view.cells) {
      json r = json::array();
      for (const auto& c : row) r.push_back(c ? json(*c) : json(nullptr));
      cells.push_back(r);
    }
    out["cells"] = cells;
    return out;
  }

  /// Starts (or continues) a background t-SNE for (model, query, k) and
  /// returns the latest snapshot; the first response is the pre-warm one.
  json projection(const std::map<std::string, std::string>& params) {
    std::shared_ptr<const EmbeddingModel> model;
    std::string query;
    std::size_t k = 0;
    LabelStore labels;
    json versions;
    {
      std::shared_lock lock(mutex_);
      const auto id = param(params, "model");
      if (id.empty()) throw QueryError("missing 'model' parameter");
      auto it = models_.find(id);
      if (it == models_.end()) throw NotFound("model '" + id + "' is not loaded");
      model = it->second;
      query = query_param_locked(params);
      k = size_param(params, "k", kDefaultNeighbors);
      if (k < 1) throw QueryError("k must be at least 1");
      labels = state_.labels;
      versions = versions_locked();
    }
    const std::string key = model->model_id() + "\n" + query + "\n" + std::to_string(k) + "\n" +
                            std::to_string(labels.version());
    std::shared_ptr<ProjectionJob> job;
    {
      std::lock_guard lock(projection_mutex_);
      auto it = projections_.find(key);
      if (it == projections_.end()) {
        auto words = select_projection_words(*model, query, k, &labels);
        if (words.words.size() < 3) throw ConfigError("projection needs at least three words; raise k");
        auto fresh = std::make_shared<ProjectionJob>();
        fresh->words = std::move(words);
        std::optional<Projection> prior;
        if (auto p = last_projection_.find(model->model_id()); p != last_projection_.end()) prior = p->second;
        start_projection(fresh, model, prior, tsne_options_);
        it = projections_.emplace(key, std::move(fresh)).first;
      }
      job = it->second;
    }
    std::unique_lock lock(job->mutex);
    job->cv.wait(lock, [&] { return job->latest.has_value() || !job->error.empty(); });
    if (!job->error.empty()) throw QueryError(job->error);
    json out = versions;
    const auto& p = *job->latest;
    out["model_id"] = p.model_id;
    out["query"] = query;
    out["k"] = k;
    out["iteration"] = p.iteration;
    out["kl"] = p.kl;
    out["done"] = job->done;
    json pts = json::array();
    std::set<std::string> labeled;
    for (const auto& l : labels.list()) {
      labeled.insert(l.word_a);
      labeled.insert(l.word_b);
    }
    const std::set<std::string> focus(job->words.focus.begin(), job->words.focus.end());
    const std::set<std::string> injected(job->words.injected.begin(), job->words.injected.end());
    for (std::size_t i = 0; i < p.words.size(); ++i) {
      json pt;
      pt["word"] = p.words[i];
      pt["x"] = p.points[i].first;
      pt["y"] = p.points[i].second;
      pt["focus"] = focus.contains(p.words[i]);
      pt["injected"] = injected.contains(p.words[i]);
      pt["labeled"] = labeled.contains(p.words[i]);
      pts.push_back(pt);
    }
    out["points"] = pts;
    return out;
  }

  json parallel() const {
    std::shared_lock lock(mutex_);
    const auto pop = summaries_locked();
    json out = versions_locked();
    json dims = json::array();
    for (const auto& d : all_dimensions()) {
      json dim;
      dim["name"] = d.name;
      dim["kind"] = d.is_metric ? "metric" : "hyperparameter";
      dim["type"] = d.categorical() ? "categorical" : "numeric";
      dim["levels"] = d.levels;
      std::optional<double> lo, hi;
      for (const auto& m : pop) {
        if (auto v = dimension_value(m, d.name)) {
          lo = lo ? std::min(*lo, *v) : *v;
          hi = hi ? std::max(*hi, *v) : *v;
        }
      }
      dim["extent"] = lo ? json::array({*lo, *hi}) : json(nullptr);
      dim["flipped"] = false;
      dims.push_back(dim);
    }
    out["dimensions"] = dims;
    json models = json::array();
    for (const auto& m : pop) {
      json row;
      row["model_id"] = m.model_id;
      row["loaded"] = models_.contains(m.model_id);
      row["matched"] = matches(m, filter_);
      json values = json::object();
      for (const auto& d : all_dimensions()) {
        auto v = dimension_value(m, d.name);
        values[d.name] = v ? json(*v) : json(nullptr);
      }
      row["values"] = values;
      models.push_back(row);
    }
    out["models"] = models;
    return out;
  }

  /// dims: comma-separated dimension names (default: all).
  json splom(const std::map<std::string, std::string>& params) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> dims;
    if (auto d = param(params, "dims"); !d.empty()) {
      std::stringstream ss(d);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) dims.push_back(item);
      }
    }
    const auto pop = summaries_locked();
    const auto corr = pairwise_correlations(pop, dims);
    json out = versions_locked();
    json names = json::array();
    for (const auto& c : corr) {
      if (c.dim_x == c.dim_y) names.push_back(c.dim_x);
    }
    out["dimensions"] = names;
    json pairs = json::array();
    for (const auto& c : corr) {
      json p;
      p["x"] = c.dim_x;
      p["y"] = c.dim_y;
      p["r"] = c.r ? json(*c.r) : json(nullptr);
      p["n"] = c.points.size();
      json pts = json::array();
      for (const auto& [x, y] : c.points) pts.push_back(json::array({x, y}));
      p["points"] = pts;
      pairs.push_back(p);
    }
    out["pairs"] = pairs;
    return out;
  }

  json filters() const {
    std::shared_lock lock(mutex_);
    return filter_json_locked();
  }

  json labels() const {
    std::shared_lock lock(mutex_);
    json out = versions_locked();
    out["labels"] = labels_to_json(state_.labels)["items"];
    json triples = json::array();
    for (const auto& t : state_.labels.to_triples()) {
      triples.push_back(json::array({t.anchor, t.synonym, t.antonym}));
    }
    out["triples"] = triples;
    return out;
  }

  json sweep_status() const {
    std::shared_lock lock(mutex_);
    json out = versions_locked();
    out["running"] = sweep_running_.load();
    out["total"] = sweep_total_;
    out["trained"] = 0;
    out["failed"] = 0;
    out["pending"] = 0;
    std::size_t trained = 0, failed = 0, pending = 0;
    for (const auto& id : sweep_ids_) {
      const auto* e = state_.find(id);
      if (!e) continue;
      (e->status == Status::Trained ? trained : e->status == Status::Failed ? failed : pending) += 1;
    }
    out["trained"] = trained;
    out["failed"] = failed;
    out["pending"] = pending;
    out["error"] = sweep_error_;
    return out;
  }

  std::string export_text() const {
    std::shared_lock lock(mutex_);
    return export_state(state_);
  }

  // -- writes ---------------------------------------------------------------

  json load(const std::string& id) {
    std::unique_lock lock(mutex_);
    load_locked(id);
    return session_json_locked();
  }

  json unload(const std::string& id) {
    std::unique_lock lock(mutex_);
    auto it = std::find(state_.loaded_models.begin(), state_.loaded_models.end(), id);
    if (it == state_.loaded_models.end()) throw NotFound("model '" + id + "' is not loaded");
    state_.loaded_models.erase(it);
    models_.erase(id);
    return session_json_locked();
  }

  json set_query(const std::string& query) {
    QueryExpression::parse(query);
    std::unique_lock lock(mutex_);
    active_query_ = query;
    return session_json_locked();
  }

  /// {"intervals": {"size": [100, 200]}, "categories": {"architecture": ["cbow"]}}
  json set_filter(const json& body) {
    FilterSpec spec = filter_from_json(body);
    validate(spec);
    std::unique_lock lock(mutex_);
    filter_ = std::move(spec);
    return filter_json_locked();
  }

  json add_label(const json& body) {
    std::unique_lock lock(mutex_);
    const auto id = state_.labels.add(body.at("word_a").get<std::string>(), body.at("word_b").get<std::string>(),
                                      parse_relation(body.at("relation").get<std::string>()), vocab_check_locked());
    return label_change_locked(id);
  }

  json update_label(std::uint64_t id, const json& body) {
    std::unique_lock lock(mutex_);
    state_.labels.get(id);
    state_.labels.update(id, body.at("word_a").get<std::string>(), body.at("word_b").get<std::string>(),
                         parse_relation(body.at("relation").get<std::string>()), vocab_check_locked());
    return label_change_locked(id);
  }

  json remove_label(std::uint64_t id) {
    std::unique_lock lock(mutex_);
    state_.labels.remove(id);
    return label_change_locked(std::nullopt);
  }

  /// {"config": {...sweep config...}, "parallelism": 2}; without "config"
  /// the server's sweep config is used.
  json start_sweep(const json& body) {
    std::unique_lock lock(mutex_);
    if (sweep_running_) throw ConflictError("a sweep is already running");
    SweepConfig cfg;
    if (body.contains("config")) {
      cfg = parse_sweep_config(body["config"], config_.base_dir);
    } else if (sweep_config_) {
      cfg = *sweep_config_;
    } else {
      throw ConfigError("no sweep config given and the server has none");
    }
    const auto points = expand(cfg);
    SweepOptions opt;
    opt.parallelism = body.value("parallelism", std::size_t{1});
    if (opt.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    opt.state_path = state_path_;
    opt.cancel = &stop_sweep_;
    opt.on_update = [this](const RunState& s) { merge_sweep(s); };
    suite_ = load_eval_suite(cfg);
    // The scheduler resumes from the state file, so hand it the current
    // labels and population.
    save_state(state_, state_path_);
    if (sweep_thread_.joinable()) sweep_thread_.join();
    sweep_ids_.clear();
    for (const auto& p : points) {
      const auto id = make_model_id(cfg.corpus_id, p);
      if (std::find(sweep_ids_.begin(), sweep_ids_.end(), id) == sweep_ids_.end()) sweep_ids_.push_back(id);
    }
    sweep_total_ = sweep_ids_.size();
    sweep_error_.clear();
    sweep_running_ = true;
    sweep_thread_ = std::thread([this, cfg, points, opt] {
      try {
        run_points(cfg, points, opt);
      } catch (const std::exception& e) {
        std::unique_lock lock(mutex_);
        sweep_error_ = e.what();
      }
      sweep_running_ = false;
    });
    json out = versions_locked();
    out["running"] = true;
    out["total"] = sweep_total_;
    return out;
  }

  /// Blocks until the running sweep (if any) finishes.
  void wait_for_sweep() {
    while (sweep_running_) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  json import_text(const std::string& text) {
    RunState incoming = import_state(text);
    std::unique_lock lock(mutex_);
    if (sweep_running_) throw ConflictError("cannot import while a sweep is running");
    state_ = std::move(incoming);
    models_.clear();
    scored_with_.clear();
    for (const auto& e : state_.entries) scored_with_[e.model_id] = state_.labels.version();
    if (!sweep_config_) suite_from_state();
    const auto wanted = state_.loaded_models;
    state_.loaded_models.clear();
    for (const auto& id : wanted) {
      try {
        load_locked(id);
      } catch (const Error&) {
      }
    }
    ++population_version_;
    return session_json_locked();
  }

  /// Overrides t-SNE settings for new projections (tests shorten runs).
  void set_tsne_options(const TsneOptions& o) {
    std::lock_guard lock(projection_mutex_);
    tsne_options_ = o;
  }

  /// Blocks until every background projection has finished.
  void wait_for_projections() {
    std::vector<std::shared_ptr<ProjectionJob>> jobs;
    {
      std::lock_guard lock(projection_mutex_);
      for (auto& [k, j] : projections_) jobs.push_back(j);
    }
    for (auto& j : jobs) {
      std::unique_lock lock(j->mutex);
      j->cv.wait(lock, [&] { return j->done; });
    }
  }

 private:
  struct ProjectionJob {
    ProjectionWords words;
    std::mutex mutex;
    std::condition_variable cv;
    std::optional<Projection> latest;
    std::string error;
    bool done = false;
    std::atomic<bool> cancel{false};
    std::thread thread;
  };

  static std::string param(const std::map<std::string, std::string>& p, const std::string& key) {
    auto it = p.find(key);
    return it == p.end() ? std::string{} : it->second;
  }

  static std::size_t size_param(const std::map<std::string, std::string>& p, const std::string& key,
                                std::size_t fallback) {
    const auto v = param(p, key);
    if (v.empty()) return fallback;
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (*end != '\0' || n < 0) throw QueryError("parameter '" + key + "' must be a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
  }

  static json scores_json(const MetricReport& m) {
    json s = json::object();
    for (const auto& [k, v] : m.scores) s[k] = v;
    return s;
  }

  static FilterSpec filter_from_json(const json& body) {
    if (!body.is_object()) throw QueryError("filter must be a JSON object");
    FilterSpec spec;
    if (body.contains("intervals")) {
      for (auto it = body["intervals"].begin(); it != body["intervals"].end(); ++it) {
        const auto& v = it.value();
        if (!v.is_array() || v.size() != 2) throw QueryError("interval for '" + it.key() + "' must be [lo, hi]");
        Interval iv;
        if (!v[0].is_null()) iv.lo = v[0].get<double>();
        if (!v[1].is_null()) iv.hi = v[1].get<double>();
        spec.intervals[it.key()] = iv;
      }
    }
    if (body.contains("categories")) {
      for (auto it = body["categories"].begin(); it != body["categories"].end(); ++it) {
        spec.categories[it.key()] = it.value().get<std::set<std::string>>();
      }
    }
    return spec;
  }

  static json filter_to_json(const FilterSpec& spec) {
    json j;
    json iv = json::object();
    for (const auto& [k, v] : spec.intervals) {
      iv[k] = json::array({std::isfinite(v.lo) ? json(v.lo) : json(nullptr), std::isfinite(v.hi) ? json(v.hi) : json(nullptr)});
    }
    json cat = json::object();
    for (const auto& [k, v] : spec.categories) cat[k] = v;
    j["intervals"] = iv;
    j["categories"] = cat;
    return j;
  }

  void suite_from_state() {
    if (state_.config.is_object() && !state_.config.empty()) {
      try {
        suite_ = load_eval_suite(parse_sweep_config(state_.config, state_dir()));
      } catch (const Error&) {
        suite_ = {};
      }
    }
  }

  fs::path state_dir() const {
    const fs::path p(state_path_);
    return p.has_parent_path() ? p.parent_path() : fs::path(".");
  }

  json versions_locked() const {
    json j;
    j["label_store_version"] = state_.labels.version();
    j["population_version"] = population_version_;
    return j;
  }

  json session_json_locked() const {
    json j = versions_locked();
    j["loaded_models"] = state_.loaded_models;
    j["max_loaded_models"] = max_loaded_ ? json(*max_loaded_) : json(nullptr);
    j["active_query"] = active_query_;
    j["filter"] = filter_to_json(filter_);
    return j;
  }

  json filter_json_locked() const {
    json j = versions_locked();
    j["filter"] = filter_to_json(filter_);
    j["matched"] = filter_models(summaries_locked(), filter_);
    return j;
  }

  json entry_json_locked(const RunEntry& e) const {
    json m;
    m["model_id"] = e.model_id;
    m["status"] = std::string(to_string(e.status));
    m["hyper"] = to_json(e.hyper);
    m["metrics"] = scores_json(e.metrics);
    m["loaded"] = models_.contains(e.model_id);
    auto it = scored_with_.find(e.model_id);
    m["triples_stale"] = it != scored_with_.end() && it->second != state_.labels.version();
    if (!e.error.empty()) m["error"] = e.error;
    return m;
  }

  std::vector<ModelSummary> summaries_locked() const {
    std::vector<ModelSummary> out;
    for (const auto& e : state_.entries) {
      if (e.status == Status::Trained) out.push_back({e.model_id, e.hyper, e.metrics});
    }
    return out;
  }

  std::vector<LoadedModel> loaded_locked() const {
    std::vector<LoadedModel> out;
    for (const auto& id : state_.loaded_models) {
      const auto* e = state_.find(id);
      out.push_back({{id, e->hyper, e->metrics}, models_.at(id)});
    }
    return out;
  }

  std::string query_param_locked(const std::map<std::string, std::string>& params) const {
    auto q = param(params, "query");
    if (q.empty()) q = active_query_;
    if (q.empty()) throw QueryError("missing 'query' parameter and no active query");
    return q;
  }

  void load_locked(const std::string& id) {
    const auto* e = state_.find(id);
    if (!e) throw NotFound("model '" + id + "' not found");
    if (e->status != Status::Trained) throw NotFound("model '" + id + "' is not trained");
    if (models_.contains(id)) return;
    if (max_loaded_ && state_.loaded_models.size() >= *max_loaded_) {
      throw ConflictError("load cap of " + std::to_string(*max_loaded_) + " models reached; unload one first");
    }
    auto model = std::make_shared<const EmbeddingModel>(load_model((state_dir() / e->model_path).string()));
    models_[id] = std::move(model);
    state_.loaded_models.push_back(id);
  }

  LabelStore::VocabularyCheck vocab_check_locked() const {
    if (models_.empty()) return {};
    return [this](const std::string& w) {
      return std::any_of(models_.begin(), models_.end(), [&](const auto& m) { return m.second->vocab().contains(w); });
    };
  }

  /// Rescores f_T for every loaded model against the current labels.
  json label_change_locked(std::optional<std::uint64_t> id) {
    const auto triples = suite_.scoring_triples(&state_.labels);
    json scores = json::object();
    for (const auto& mid : state_.loaded_models) {
      auto* e = state_.find(mid);
      std::optional<double> v;
      if (!triples.empty()) {
        try {
          v = triples_score(*models_.at(mid), triples).value;
        } catch (const MetricUnavailable&) {
        }
      }
      if (v) {
        e->metrics.scores[metric::kTriples] = *v;
      } else {
        e->metrics.scores.erase(metric::kTriples);
      }
      EvalSuite::update_combined(e->metrics);
      scored_with_[mid] = state_.labels.version();
      scores[mid] = v ? json(*v) : json(nullptr);
    }
    json out = versions_locked();
    if (id) {
      const auto& l = state_.labels.get(*id);
      out["label"] = {{"id", l.id}, {"word_a", l.word_a}, {"word_b", l.word_b},
                      {"relation", std::string(to_string(l.relation))}, {"created_at", l.created_at}};
    }
    out["triples"] = scores;
    return out;
  }

  void merge_sweep(const RunState& s) {
    std::unique_lock lock(mutex_);
    for (const auto& e : s.entries) {
      if (auto* mine = state_.find(e.model_id)) {
        if (*mine == e) continue;
        *mine = e;
        models_.erase(e.model_id);
        auto it = std::find(state_.loaded_models.begin(), state_.loaded_models.end(), e.model_id);
        if (it != state_.loaded_models.end()) state_.loaded_models.erase(it);
      } else {
        state_.entries.push_back(e);
      }
      scored_with_[e.model_id] = s.labels.version();
    }
    state_.config = s.config;
    ++population_version_;
  }

  void start_projection(const std::shared_ptr<ProjectionJob>& job, std::shared_ptr<const EmbeddingModel> model,
                        std::optional<Projection> prior, TsneOptions options) {
    job->thread = std::thread([this, job, model, prior, options] {
      try {
        auto result = project_tsne(*model, job->words.words, options, prior ? &*prior : nullptr,
                                   [&](const Projection& p) {
                                     {
                                       std::lock_guard lock(job->mutex);
                                       job->latest = p;
                                     }
                                     job->cv.notify_all();
                                     return !job->cancel.load();
                                   });
        std::lock_guard lock(projection_mutex_);
        last_projection_[model->model_id()] = result;
      } catch (const std::exception& e) {
        std::lock_guard lock(job->mutex);
        job->error = e.what();
      }
      {
        std::lock_guard lock(job->mutex);
        job->done = true;
      }
      job->cv.notify_all();
    });
  }

  ServerConfig config_;
  std::string state_path_;
  std::optional<SweepConfig> sweep_config_;
  std::optional<std::size_t> max_loaded_;

  mutable std::shared_mutex mutex_;  // single writer for session, labels and population
  RunState state_;
  EvalSuite suite_;
  std::map<std::string, std::shared_ptr<const EmbeddingModel>> models_;
  std::map<std::string, std::uint64_t> scored_with_;  // label version behind each stored f_T
  std::uint64_t population_version_ = 1;
  std::string active_query_;
  FilterSpec filter_;

  std::mutex projection_mutex_;
  std::map<std::string, std::shared_ptr<ProjectionJob>> projections_;
  std::map<std::string, Projection> last_projection_;
  TsneOptions tsne_options_;

  std::thread sweep_thread_;
  std::atomic<bool> sweep_running_{false};
  std::atomic<bool> stop_sweep_{false};
  std::vector<std::string> sweep_ids_;
  std::size_t sweep_total_ = 0;
  std::string sweep_error_;
};

/// Routes HTTP requests onto a Workbench.
class Service {
 public:
  explicit Service(Workbench& bench) : bench_(bench) { routes(); }

  ~Service() { stop(); }

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  using Handler = std::function<json(const httplib::Request&)>;

  static std::map<std::string, std::string> query_params(const httplib::Request& req) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : req.params) out[k] = v;
    return out;
  }

  static json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw FormatError(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  static std::uint64_t id_param(const httplib::Request& req) {
    const auto s = req.matches[1].str();
    char* end = nullptr;
    const auto v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw QueryError("label id must be an integer, got '" + s + "'");
    return v;
  }

  static void send_error(httplib::Response& res, const std::exception& e) {
    res.status = http_status(e);
    json err;
    err["error"] = e.what();
    err["status"] = res.status;
    res.set_content(err.dump(), "application/json");
  }

  auto wrap(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(h(req).dump(), "application/json");
      } catch (const std::exception& e) {
        send_error(res, e);
      }
    };
  }

  void routes() {
    auto& b = bench_;
    server_.Get("/models", wrap([&b](const auto&) { return b.models(); }));
    server_.Get("/session", wrap([&b](const auto&) { return b.session(); }));
    server_.Post("/session/load", wrap([&b](const auto& req) {
      return b.load(body_json(req).at("model_id").template get<std::string>());
    }));
    server_.Delete(R"(/session/load/([^/]+))", wrap([&b](const auto& req) { return b.unload(req.matches[1].str()); }));
    server_.Post("/session/query", wrap([&b](const auto& req) {
      return b.set_query(body_json(req).at("query").template get<std::string>());
    }));
    server_.Get("/views/heatmap", wrap([&b](const auto& req) { return b.heatmap(query_params(req)); }));
    server_.Get("/views/projection", wrap([&b](const auto& req) { return b.projection(query_params(req)); }));
    server_.Get("/views/parallel", wrap([&b](const auto&) { return b.parallel(); }));
    server_.Get("/views/splom", wrap([&b](const auto& req) { return b.splom(query_params(req)); }));
    server_.Get("/filters", wrap([&b](const auto&) { return b.filters(); }));
    server_.Post("/filters", wrap([&b](const auto& req) { return b.set_filter(body_json(req)); }));
    server_.Get("/labels", wrap([&b](const auto&) { return b.labels(); }));
    server_.Post("/labels", wrap([&b](const auto& req) { return b.add_label(body_json(req)); }));
    server_.Put(R"(/labels/([^/]+))", wrap([&b](const auto& req) { return b.update_label(id_param(req), body_json(req)); }));
    server_.Delete(R"(/labels/([^/]+))", wrap([&b](const auto& req) { return b.remove_label(id_param(req)); }));
    server_.Post("/sweep", wrap([&b](const auto& req) { return b.start_sweep(body_json(req)); }));
    server_.Get("/sweep/status", wrap([&b](const auto&) { return b.sweep_status(); }));
    server_.Get("/state/export", [&b](const httplib::Request&, httplib::Response& res) {
      try {
        res.set_content(b.export_text(), "application/json");
      } catch (const std::exception& e) {
        send_error(res, e);
      }
    });
    server_.Post("/state/import", wrap([&b](const auto& req) { return b.import_text(req.body); }));
    server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      json err;
      err["error"] = res.status == 404 ? "no route for " + req.method + " " + req.path : "request failed";
      err["status"] = res.status;
      res.set_content(err.dump(), "application/json");
    });
  }

  Workbench& bench_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace embench
