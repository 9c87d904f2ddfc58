#pragma once

// Structures behind the comparison views: nearest-neighbor and compound
// queries, the nearest-neighbor heatmap and its orderings, agglomerative
// clustering, t-SNE projections, brushing filters and pairwise
// correlations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/errors.hpp"
#include "embench/eval.hpp"
#include "embench/hyperparams.hpp"
#include "embench/model.hpp"
#include "embench/random.hpp"

namespace embench {

inline constexpr std::size_t kDefaultNeighbors = 15;
inline constexpr std::size_t kDefaultColumnBudget = 60;

// ---------------------------------------------------------------------------
// Query expressions

/// Net coefficient per word of an expression such as "king -queen woman".
/// A leading '-', '--' or U+2212 negates a term, '+' is accepted and
/// ignored. Words whose coefficients cancel keep coefficient 0.
struct QueryExpression {
  std::vector<std::pair<std::string, int>> terms;  // first-appearance order

  static QueryExpression parse(std::string_view expr) {
    QueryExpression q;
    std::size_t pos = 0;
    while (pos < expr.size()) {
      while (pos < expr.size() && std::isspace(static_cast<unsigned char>(expr[pos]))) ++pos;
      if (pos >= expr.size()) break;
      std::size_t end = pos;
      while (end < expr.size() && !std::isspace(static_cast<unsigned char>(expr[end]))) ++end;
      std::string_view tok = expr.substr(pos, end - pos);
      pos = end;
      int sign = 1;
      for (;;) {
        if (tok.starts_with("-")) {
          sign = -1;
          tok.remove_prefix(1);
        } else if (tok.starts_with("\xE2\x88\x92")) {
          sign = -1;
          tok.remove_prefix(3);
        } else if (tok.starts_with("+")) {
          tok.remove_prefix(1);
        } else {
          break;
        }
      }
      std::string word = normalize_token(tok);
      if (word.empty()) throw QueryError("query contains an empty term");
      auto it = std::find_if(q.terms.begin(), q.terms.end(), [&](const auto& t) { return t.first == word; });
      if (it == q.terms.end()) {
        q.terms.emplace_back(std::move(word), sign);
      } else {
        it->second += sign;
      }
    }
    if (q.terms.empty()) throw QueryError("query is empty");
    return q;
  }

  /// Words with a non-zero net coefficient; these are excluded from
  /// neighbor lists.
  std::set<std::string> active_words() const {
    std::set<std::string> out;
    for (const auto& [w, c] : terms) {
      if (c != 0) out.insert(w);
    }
    return out;
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    for (const auto& t : terms) out.push_back(t.first);
    return out;
  }
};

/// Signed sum of unit-normalized word vectors. Throws QueryError naming
/// the first out-of-vocabulary word, or when the terms cancel out.
inline std::vector<double> query_vector(const EmbeddingModel& model, const QueryExpression& q) {
  std::vector<double> v(model.dim(), 0.0);
  for (const auto& [word, coef] : q.terms) {
    auto row = model.vector(word);
    if (!row) throw QueryError("word '" + word + "' is not in the vocabulary");
    if (coef == 0) continue;
    double n = 0.0;
    for (float x : *row) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    if (n == 0.0) continue;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += coef * (*row)[k] / n;
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  if (n == 0.0) throw QueryError("query vector is zero");
  return v;
}

struct Neighbor {
  std::string word;
  double cosine = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Orders by descending similarity, then lexicographically.
inline bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  return a.cosine != b.cosine ? a.cosine > b.cosine : a.word < b.word;
}

/// Top-k words by cosine to the query vector, excluding the query's own
/// words.
inline std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, std::string_view expr, std::size_t k) {
  if (k < 1) throw QueryError("k must be at least 1");
  const auto q = QueryExpression::parse(expr);
  const auto qv = query_vector(model, q);
  const auto exclude = q.active_words();
  std::vector<Neighbor> all;
  all.reserve(model.rows());
  const std::span<const double> qs(qv);
  for (std::size_t i = 0; i < model.rows(); ++i) {
    const auto& w = model.vocab().word(i);
    if (exclude.contains(w)) continue;
    all.push_back({w, cosine(qs, model.row(i))});
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), neighbor_before);
  all.resize(take);
  return all;
}

// ---------------------------------------------------------------------------
// Population dimensions

/// What the views know about one model: provenance and metrics.
struct ModelSummary {
  std::string model_id;
  HyperParams hyper;
  MetricReport metrics;

  friend bool operator==(const ModelSummary&, const ModelSummary&) = default;
};

struct LoadedModel {
  ModelSummary summary;
  std::shared_ptr<const EmbeddingModel> model;
};

/// Hyperparameter axes followed by metric axes.
inline std::vector<Dimension> all_dimensions() {
  std::vector<Dimension> dims = hyper_dimensions();
  for (const auto& m : metric_names()) dims.push_back({m, true, {}});
  return dims;
}

inline const Dimension& find_dimension(std::string_view name) {
  static const std::vector<Dimension> dims = all_dimensions();
  for (const auto& d : dims) {
    if (d.name == name) return d;
  }
  throw QueryError("unknown dimension '" + std::string(name) + "'");
}

/// Numeric value of a dimension (categorical ones as level index).
inline std::optional<double> dimension_value(const ModelSummary& m, std::string_view name) {
  const auto& dim = find_dimension(name);
  if (dim.is_metric) return m.metrics.score(dim.name);
  return hyper_value(m.hyper, name);
}

// ---------------------------------------------------------------------------
// Hierarchical clustering

struct Dendrogram {
  /// Merge i creates cluster id n + i from clusters `left` and `right`
  /// (leaf ids are 0..n-1). `left` holds the smaller leaf index.
  struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double distance = 0.0;
    std::size_t size = 0;

    friend bool operator==(const Merge&, const Merge&) = default;
  };

  std::vector<Merge> merges;
  std::vector<std::size_t> leaf_order;
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Agglomerative clustering with average linkage on Euclidean distance,
/// using Lance-Williams updates. Among equally distant pairs the one with
/// the smaller (min leaf, min leaf) pair merges first.
inline Dendrogram hierarchical_cluster(const std::vector<std::vector<double>>& rows) {
  Dendrogram out;
  const std::size_t n = rows.size();
  if (n == 0) return out;
  if (n == 1) {
    out.leaf_order = {0};
    return out;
  }
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = euclidean(rows[i], rows[j]);
  }
  // Slot i tracks the active cluster whose smallest leaf is i.
  std::vector<bool> active(n, true);
  std::vector<std::size_t> cluster_id(n);
  std::vector<std::size_t> size(n, 1);
  std::iota(cluster_id.begin(), cluster_id.end(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> children;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = n;
    std::size_t bj = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.push_back({cluster_id[bi], cluster_id[bj], best, size[bi] + size[bj]});
    children.emplace_back(cluster_id[bi], cluster_id[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double d = (static_cast<double>(size[bi]) * dist[bi][k] + static_cast<double>(size[bj]) * dist[bj][k]) /
                       static_cast<double>(size[bi] + size[bj]);
      dist[bi][k] = dist[k][bi] = d;
    }
    active[bj] = false;
    size[bi] += size[bj];
    cluster_id[bi] = n + step;
  }
  // Iterative left-first traversal from the root.
  std::vector<std::size_t> stack{2 * n - 2};
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    if (c < n) {
      out.leaf_order.push_back(c);
    } else {
      stack.push_back(children[c - n].second);
      stack.push_back(children[c - n].first);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap

enum class ColumnMode { Compact, Zoomed };

inline std::string_view to_string(ColumnMode m) { return m == ColumnMode::Compact ? "compact" : "zoomed"; }

enum class SortMode { Loading, Cluster, Hyperparameter, Metric };

struct SortSpec {
  SortMode mode = SortMode::Loading;
  std::string key;  // dimension name for Hyperparameter / Metric

  /// "loading", "cluster", "hyperparameter:<name>" or "metric:<name>".
  static SortSpec parse(std::string_view s) {
    if (s.empty() || s == "loading") return {};
    if (s == "cluster") return {SortMode::Cluster, {}};
    const auto colon = s.find(':');
    if (colon != std::string_view::npos) {
      const auto kind = s.substr(0, colon);
      std::string key(s.substr(colon + 1));
      if (kind == "hyperparameter") {
        if (!is_hyper_field(key) || key == "seed") throw QueryError("unknown hyperparameter '" + key + "'");
        return {SortMode::Hyperparameter, key};
      }
      if (kind == "metric") {
        const auto& names = metric_names();
        if (std::find(names.begin(), names.end(), key) == names.end()) {
          throw QueryError("unknown metric '" + key + "'");
        }
        return {SortMode::Metric, key};
      }
    }
    throw QueryError("unknown sort mode '" + std::string(s) + "'");
  }

  std::string to_string() const {
    switch (mode) {
      case SortMode::Loading: return "loading";
      case SortMode::Cluster: return "cluster";
      case SortMode::Hyperparameter: return "hyperparameter:" + key;
      case SortMode::Metric: return "metric:" + key;
    }
    return "loading";
  }
};

struct HeatmapView {
  std::string query;
  std::vector<ModelSummary> rows;
  std::vector<std::size_t> load_index;  // per row
  std::vector<std::string> col_words;
  std::vector<ColumnMode> col_mode;     // per column
  std::vector<std::size_t> col_rank;    // per column, position in the default order
  std::vector<std::vector<std::optional<double>>> cells;
  SortSpec sort;

  std::vector<std::string> row_models() const {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.model_id);
    return out;
  }

  /// Variance of the non-null cells of each column; a low-agreement hook
  /// for column zoom modes.
  std::vector<std::optional<double>> column_variance() const {
    std::vector<std::optional<double>> out(col_words.size());
    for (std::size_t c = 0; c < col_words.size(); ++c) {
      double sum = 0.0;
      double sq = 0.0;
      std::size_t n = 0;
      for (const auto& row : cells) {
        if (!row[c]) continue;
        sum += *row[c];
        sq += *row[c] * *row[c];
        ++n;
      }
      if (n == 0) continue;
      const double mean = sum / static_cast<double>(n);
      out[c] = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    }
    return out;
  }
};

struct HeatmapOptions {
  std::size_t k = kDefaultNeighbors;
  std::size_t word_budget = kDefaultColumnBudget;
  /// Model whose top-k columns are zoomed; defaults to the last loaded.
  std::optional<std::size_t> active;
};

/// Rows follow the given (load) order. Columns are the union of every
/// model's top-k neighbors, ranked by best rank across models (then the
/// earliest model achieving it, then the word) and truncated to the budget.
inline HeatmapView build_heatmap(std::span<const LoadedModel> models, std::string_view expr,
                                 const HeatmapOptions& options = {}) {
  if (models.empty()) throw QueryError("heatmap needs at least one loaded model");
  const auto q = QueryExpression::parse(expr);
  const std::size_t active = options.active.value_or(models.size() - 1);
  if (active >= models.size()) throw QueryError("active model index out of range");

  std::vector<std::optional<std::vector<double>>> qvecs(models.size());
  std::vector<std::vector<Neighbor>> lists(models.size());
  std::string first_error;
  for (std::size_t m = 0; m < models.size(); ++m) {
    try {
      qvecs[m] = query_vector(*models[m].model, q);
    } catch (const QueryError& e) {
      if (first_error.empty()) first_error = e.what();
      continue;
    }
    lists[m] = nearest_neighbors(*models[m].model, expr, options.k);
  }
  if (std::none_of(qvecs.begin(), qvecs.end(), [](const auto& v) { return v.has_value(); })) {
    throw QueryError(first_error);
  }

  struct Candidate {
    std::size_t rank;
    std::size_t model;
  };
  std::map<std::string, Candidate> best;
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t r = 0; r < lists[m].size(); ++r) {
      auto [it, inserted] = best.try_emplace(lists[m][r].word, Candidate{r, m});
      if (!inserted && (r < it->second.rank || (r == it->second.rank && m < it->second.model))) {
        it->second = {r, m};
      }
    }
  }
  std::vector<std::pair<std::string, Candidate>> cols(best.begin(), best.end());
  std::stable_sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) {
    if (a.second.rank != b.second.rank) return a.second.rank < b.second.rank;
    if (a.second.model != b.second.model) return a.second.model < b.second.model;
    return a.first < b.first;
  });
  if (cols.size() > options.word_budget) cols.resize(options.word_budget);

  std::set<std::string> zoomed;
  for (const auto& nb : lists[active]) zoomed.insert(nb.word);

  HeatmapView view;
  view.query = std::string(expr);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    view.col_words.push_back(cols[c].first);
    view.col_mode.push_back(zoomed.contains(cols[c].first) ? ColumnMode::Zoomed : ColumnMode::Compact);
    view.col_rank.push_back(c);
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    view.rows.push_back(models[m].summary);
    view.load_index.push_back(m);
    std::vector<std::optional<double>> row(cols.size());
    if (qvecs[m]) {
      const std::span<const double> qs(*qvecs[m]);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (auto v = models[m].model->vector(cols[c].first)) row[c] = cosine(qs, *v);
      }
    }
    view.cells.push_back(std::move(row));
  }
  return view;
}

namespace detail {

inline void permute_rows(HeatmapView& v, const std::vector<std::size_t>& order) {
  HeatmapView out = v;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.rows[i] = v.rows[order[i]];
    out.load_index[i] = v.load_index[order[i]];
    out.cells[i] = v.cells[order[i]];
  }
  v = std::move(out);
}

inline void permute_columns(HeatmapView& v, const std::vector<std::size_t>& order) {
  HeatmapView out = v;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.col_words[i] = v.col_words[order[i]];
    out.col_mode[i] = v.col_mode[order[i]];
    out.col_rank[i] = v.col_rank[order[i]];
    for (std::size_t r = 0; r < v.cells.size(); ++r) out.cells[r][i] = v.cells[r][order[i]];
  }
  v = std::move(out);
}

}  // namespace detail

/// Reorders rows (and, for cluster sorting, columns). Every mode is a
/// permutation of the rows. Non-cluster modes restore the default column
/// order.
inline HeatmapView sort_heatmap(HeatmapView view, const SortSpec& spec) {
  const std::size_t nr = view.rows.size();
  const std::size_t nc = view.col_words.size();
  std::vector<std::size_t> rows(nr);
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> cols(nc);
  std::iota(cols.begin(), cols.end(), 0);
  std::sort(cols.begin(), cols.end(), [&](auto a, auto b) { return view.col_rank[a] < view.col_rank[b]; });

  switch (spec.mode) {
    case SortMode::Loading:
      std::sort(rows.begin(), rows.end(), [&](auto a, auto b) { return view.load_index[a] < view.load_index[b]; });
      break;
    case SortMode::Hyperparameter:
    case SortMode::Metric: {
      const auto& dim = find_dimension(spec.key);
      if (dim.is_metric != (spec.mode == SortMode::Metric)) throw QueryError("dimension '" + spec.key + "' has the wrong kind");
      std::vector<std::optional<double>> value(nr);
      for (std::size_t r = 0; r < nr; ++r) value[r] = dimension_value(view.rows[r], spec.key);
      std::sort(rows.begin(), rows.end(), [&](auto a, auto b) {
        // Missing values sort last.
        if (value[a].has_value() != value[b].has_value()) return value[a].has_value();
        if (value[a] && *value[a] != *value[b]) return *value[a] < *value[b];
        return view.load_index[a] < view.load_index[b];
      });
      break;
    }
    case SortMode::Cluster: {
      // Cluster from the loading order so the result is independent of the
      // previous sort.
      std::sort(rows.begin(), rows.end(), [&](auto a, auto b) { return view.load_index[a] < view.load_index[b]; });
      std::vector<std::vector<double>> matrix(nr, std::vector<double>(nc, 0.0));
      for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t c = 0; c < nc; ++c) matrix[r][c] = view.cells[rows[r]][cols[c]].value_or(0.0);
      }
      const auto row_tree = hierarchical_cluster(matrix);
      std::vector<std::size_t> row_order;
      for (auto leaf : row_tree.leaf_order) row_order.push_back(rows[leaf]);
      rows = std::move(row_order);
      if (nc >= 2) {
        std::vector<std::vector<double>> transposed(nc, std::vector<double>(nr, 0.0));
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t c = 0; c < nc; ++c) transposed[c][r] = matrix[r][c];
        }
        const auto col_tree = hierarchical_cluster(transposed);
        std::vector<std::size_t> col_order;
        for (auto leaf : col_tree.leaf_order) col_order.push_back(cols[leaf]);
        cols = std::move(col_order);
      }
      break;
    }
  }
  detail::permute_rows(view, rows);
  detail::permute_columns(view, cols);
  view.sort = spec;
  return view;
}

// ---------------------------------------------------------------------------
// Filtering

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Conjunction of per-dimension tests. Numeric dimensions use closed
/// intervals; categorical dimensions use value sets (an interval on a
/// categorical dimension tests its level index).
struct FilterSpec {
  std::map<std::string, Interval> intervals;
  std::map<std::string, std::set<std::string>> categories;

  bool empty() const { return intervals.empty() && categories.empty(); }
  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

inline void validate(const FilterSpec& spec) {
  for (const auto& [name, iv] : spec.intervals) {
    find_dimension(name);
    if (iv.lo > iv.hi) throw QueryError("interval for '" + name + "' has lo > hi");
  }
  for (const auto& [name, values] : spec.categories) {
    const auto& dim = find_dimension(name);
    if (!dim.categorical()) throw QueryError("dimension '" + name + "' is not categorical");
    for (const auto& v : values) {
      if (std::find(dim.levels.begin(), dim.levels.end(), v) == dim.levels.end()) {
        throw QueryError("'" + v + "' is not a level of '" + name + "'");
      }
    }
  }
}

inline bool matches(const ModelSummary& m, const FilterSpec& spec) {
  for (const auto& [name, iv] : spec.intervals) {
    auto v = dimension_value(m, name);
    if (!v || !iv.contains(*v)) return false;
  }
  for (const auto& [name, values] : spec.categories) {
    const auto& dim = find_dimension(name);
    auto v = dimension_value(m, name);
    if (!v) return false;
    const auto level = static_cast<std::size_t>(*v);
    if (level >= dim.levels.size() || !values.contains(dim.levels[level])) return false;
  }
  return true;
}

/// Ids of the models passing every test, in population order.
inline std::vector<std::string> filter_models(std::span<const ModelSummary> population, const FilterSpec& spec) {
  validate(spec);
  std::vector<std::string> out;
  for (const auto& m : population) {
    if (matches(m, spec)) out.push_back(m.model_id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise correlations

struct Correlation {
  std::string dim_x;
  std::string dim_y;
  std::optional<double> r;
  std::vector<std::pair<double, double>> points;
};

inline std::optional<double> pearson(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2) return std::nullopt;
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

/// Pearson r for every pair of dimensions (upper triangle including the
/// diagonal) over the models that have both values. Categorical
/// dimensions use their level index.
inline std::vector<Correlation> pairwise_correlations(std::span<const ModelSummary> population,
                                                      const std::vector<std::string>& dims = {}) {
  std::vector<std::string> names = dims;
  if (names.empty()) {
    for (const auto& d : all_dimensions()) names.push_back(d.name);
  }
  for (const auto& n : names) find_dimension(n);
  std::vector<Correlation> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i; j < names.size(); ++j) {
      Correlation c{names[i], names[j], std::nullopt, {}};
      for (const auto& m : population) {
        auto x = dimension_value(m, names[i]);
        auto y = dimension_value(m, names[j]);
        if (x && y) c.points.emplace_back(*x, *y);
      }
      c.r = pearson(c.points);
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// t-SNE

struct TsneOptions {
  /// 0 selects min(30, max(1, (n - 1) / 3)).
  double perplexity = 0.0;
  std::uint64_t seed = 1;
  int prewarm_iters = 150;
  int total_iters = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iters = 100;
  int momentum_switch = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
};

inline double default_perplexity(std::size_t n) {
  return std::min(30.0, std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0));
}

/// Pairwise squared Euclidean distances, row-major n x n.
inline std::vector<double> squared_distances(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) s += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
      d[i * n + j] = d[j * n + i] = s;
    }
  }
  return d;
}

/// Joint input affinities: per-point Gaussian conditionals whose precision
/// is bisected until the entropy equals log(perplexity), then symmetrized
/// as (p_j|i + p_i|j) / 2n. Row-major n x n.
inline std::vector<double> tsne_affinities(const std::vector<std::vector<double>>& x, double perplexity) {
  const std::size_t n = x.size();
  if (n < 2) throw ConfigError("t-SNE needs at least two points");
  if (!(perplexity >= 1.0 && perplexity <= static_cast<double>(n - 1))) {
    throw ConfigError("perplexity " + std::to_string(perplexity) + " is infeasible for " + std::to_string(n) +
                      " points (must lie in [1, n-1])");
  }
  const auto d = squared_distances(x);
  const double target = std::log(perplexity);
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, d[i * n + j]);
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = d[i * n + j] - dmin;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) cond[i * n + j] = row[j] / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-12) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  }
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n));
  }
  return p;
}

/// Exact t-SNE with momentum, per-parameter gains and early exaggeration.
/// Layout is row-major n x 2.
class TsneRunner {
 public:
  /// `initial` optionally fixes starting coordinates per point; points
  /// without one start at small seeded Gaussian noise.
  TsneRunner(const std::vector<std::vector<double>>& x, TsneOptions options,
             const std::vector<std::optional<std::pair<double, double>>>& initial = {})
      : options_(options), n_(x.size()) {
    if (n_ < 3) throw ConfigError("t-SNE needs at least three points");
    if (options_.perplexity == 0.0) options_.perplexity = default_perplexity(n_);
    p_ = tsne_affinities(x, options_.perplexity);
    y_.assign(n_ * 2, 0.0);
    Rng rng(options_.seed);
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = rng.normal() * 1e-4;
      const double b = rng.normal() * 1e-4;
      if (i < initial.size() && initial[i]) {
        y_[2 * i] = initial[i]->first;
        y_[2 * i + 1] = initial[i]->second;
      } else {
        y_[2 * i] = a;
        y_[2 * i + 1] = b;
      }
    }
    update_.assign(n_ * 2, 0.0);
    gains_.assign(n_ * 2, 1.0);
  }

  int iteration() const { return iteration_; }
  const std::vector<double>& layout() const { return y_; }
  const std::vector<double>& affinities() const { return p_; }
  const TsneOptions& options() const { return options_; }

  void step() {
    const double exag = iteration_ < options_.exaggeration_iters ? options_.exaggeration : 1.0;
    const double momentum = iteration_ < options_.momentum_switch ? options_.initial_momentum : options_.final_momentum;
    std::vector<double> num(n_ * n_, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double dx = y_[2 * i] - y_[2 * j];
        const double dy = y_[2 * i + 1] - y_[2 * j + 1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n_ + j] = num[j * n_ + i] = v;
        sum += 2.0 * v;
      }
    }
    std::vector<double> grad(n_ * 2, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (i == j) continue;
        const double q = num[i * n_ + j] / sum;
        const double mult = 4.0 * (exag * p_[i * n_ + j] - q) * num[i * n_ + j];
        grad[2 * i] += mult * (y_[2 * i] - y_[2 * j]);
        grad[2 * i + 1] += mult * (y_[2 * i + 1] - y_[2 * j + 1]);
      }
    }
    for (std::size_t k = 0; k < n_ * 2; ++k) {
      const bool same_sign = (grad[k] > 0) == (update_[k] > 0);
      gains_[k] = same_sign ? std::max(gains_[k] * 0.8, 0.01) : gains_[k] + 0.2;
      update_[k] = momentum * update_[k] - options_.learning_rate * gains_[k] * grad[k];
      y_[k] += update_[k];
    }
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      cx += y_[2 * i];
      cy += y_[2 * i + 1];
    }
    cx /= static_cast<double>(n_);
    cy /= static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      y_[2 * i] -= cx;
      y_[2 * i + 1] -= cy;
    }
    ++iteration_;
  }

  void run_until(int iteration) {
    while (iteration_ < iteration) step();
  }

  /// KL(P || Q) for the current layout, without exaggeration.
  double kl_divergence() const {
    double sum = 0.0;
    std::vector<double> num(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (i == j) continue;
        const double dx = y_[2 * i] - y_[2 * j];
        const double dy = y_[2 * i + 1] - y_[2 * j + 1];
        num[i * n_ + j] = 1.0 / (1.0 + dx * dx + dy * dy);
        sum += num[i * n_ + j];
      }
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < n_ * n_; ++k) {
      if (p_[k] > 0.0) kl += p_[k] * std::log(p_[k] / std::max(num[k] / sum, 1e-300));
    }
    return kl;
  }

 private:
  TsneOptions options_;
  std::size_t n_;
  std::vector<double> p_;
  std::vector<double> y_;
  std::vector<double> update_;
  std::vector<double> gains_;
  int iteration_ = 0;
};

struct Projection {
  std::string model_id;
  std::vector<std::string> words;
  std::vector<std::pair<double, double>> points;  // per word
  std::vector<std::string> focus;
  std::vector<std::string> injected;
  int iteration = 0;
  double kl = 0.0;

  std::optional<std::pair<double, double>> point(std::string_view w) const {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (words[i] == w) return points[i];
    }
    return std::nullopt;
  }
};

/// Words shown by the explorer: the query's words, the top-k neighbors,
/// and any labeled partner of those that the neighbors missed.
struct ProjectionWords {
  std::vector<std::string> words;
  std::vector<std::string> focus;
  std::vector<std::string> injected;
};

inline ProjectionWords select_projection_words(const EmbeddingModel& model, std::string_view expr, std::size_t k,
                                               const LabelStore* labels = nullptr) {
  ProjectionWords out;
  const auto q = QueryExpression::parse(expr);
  for (const auto& w : q.words()) {
    if (!model.vocab().contains(w)) throw QueryError("word '" + w + "' is not in the vocabulary");
    out.focus.push_back(w);
  }
  std::set<std::string> present(out.focus.begin(), out.focus.end());
  out.words = out.focus;
  for (const auto& nb : nearest_neighbors(model, expr, k)) {
    if (present.insert(nb.word).second) out.words.push_back(nb.word);
  }
  if (labels) {
    const std::set<std::string> shown = present;
    for (const auto& l : labels->list()) {
      for (const auto& [mine, other] : {std::pair{l.word_a, l.word_b}, std::pair{l.word_b, l.word_a}}) {
        if (shown.contains(mine) && !present.contains(other) && model.vocab().contains(other)) {
          present.insert(other);
          out.words.push_back(other);
          out.injected.push_back(other);
        }
      }
    }
  }
  return out;
}

/// Callback receiving layout snapshots: after the pre-warm iterations,
/// then every `snapshot_every` iterations, then at the end. Returning
/// false cancels the run.
using SnapshotFn = std::function<bool(const Projection&)>;

/// Projects the given words of a model (unit-normalized vectors). Words
/// shared with `prior` start at their prior coordinates.
inline Projection project_tsne(const EmbeddingModel& model, const std::vector<std::string>& words,
                               const TsneOptions& options = {}, const Projection* prior = nullptr,
                               const SnapshotFn& on_snapshot = {}, int snapshot_every = 50) {
  if (words.size() < 3) throw ConfigError("projection needs at least three words");
  std::vector<std::vector<double>> x;
  std::vector<std::optional<std::pair<double, double>>> init;
  for (const auto& w : words) {
    auto v = model.vector(w);
    if (!v) throw QueryError("word '" + w + "' is not in the vocabulary");
    std::vector<double> row(v->begin(), v->end());
    double n = 0.0;
    for (double c : row) n += c * c;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& c : row) c /= n;
    }
    x.push_back(std::move(row));
    init.push_back(prior ? prior->point(w) : std::nullopt);
  }
  TsneRunner runner(x, options, init);
  Projection proj;
  proj.model_id = model.model_id();
  proj.words = words;
  auto snapshot = [&]() {
    proj.iteration = runner.iteration();
    proj.kl = runner.kl_divergence();
    proj.points.clear();
    const auto& y = runner.layout();
    for (std::size_t i = 0; i < words.size(); ++i) proj.points.emplace_back(y[2 * i], y[2 * i + 1]);
    return !on_snapshot || on_snapshot(proj);
  };
  const int total = std::max(options.total_iters, options.prewarm_iters);
  runner.run_until(options.prewarm_iters);
  if (!snapshot()) return proj;
  while (runner.iteration() < total) {
    runner.run_until(std::min(total, runner.iteration() + std::max(snapshot_every, 1)));
    if (runner.iteration() < total && !snapshot()) return proj;
  }
  snapshot();
  return proj;
}

}  // namespace embench
