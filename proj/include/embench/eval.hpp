#pragma once

// Per-model metrics (triples score, sentiment accuracy, analogy accuracy)
// and the synonym/antonym label store that feeds the triples score.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/errors.hpp"
#include "embench/model.hpp"
#include "embench/random.hpp"

namespace embench {

namespace metric {
inline constexpr const char* kTriples = "triples";
inline constexpr const char* kAccuracy = "accuracy";
inline constexpr const char* kAnalogy = "analogy";
inline constexpr const char* kTrainSeconds = "train_seconds";
inline constexpr const char* kCombined = "combined";
}  // namespace metric

/// Metric names in axis order.
inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{metric::kTriples, metric::kAccuracy, metric::kAnalogy,
                                              metric::kCombined, metric::kTrainSeconds};
  return names;
}

struct MetricValue {
  double value = 0.0;
  std::size_t skipped = 0;
};

struct MetricReport {
  std::map<std::string, double> scores;
  std::map<std::string, std::size_t> skipped;

  std::optional<double> score(const std::string& name) const {
    auto it = scores.find(name);
    return it == scores.end() ? std::nullopt : std::optional<double>(it->second);
  }

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

template <typename A, typename B>
double cosine(std::span<const A> a, std::span<const B> b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    aa += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    bb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Triples score

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct Triple {
  std::string anchor;
  std::string synonym;
  std::string antonym;
  Split split = Split::Train;

  friend bool operator==(const Triple&, const Triple&) = default;
};

/// "anchor<TAB>synonym<TAB>antonym<TAB>train|test"; a missing split
/// column means train. Blank lines and '#' comments are skipped.
inline std::vector<Triple> read_triples(std::istream& in) {
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string a, b, c, split;
    if (!(ss >> a >> b >> c)) throw FormatError("triples line " + std::to_string(lineno) + ": expected 3 or 4 fields");
    ss >> split;
    Triple t{normalize_token(a), normalize_token(b), normalize_token(c), Split::Train};
    if (split == "test") {
      t.split = Split::Test;
    } else if (!split.empty() && split != "train") {
      throw FormatError("triples line " + std::to_string(lineno) + ": split must be train or test");
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Triple> read_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open triples file '" + path + "'");
  return read_triples(in);
}

inline void write_triples(const std::vector<Triple>& triples, std::ostream& out) {
  for (const auto& t : triples) {
    out << t.anchor << '\t' << t.synonym << '\t' << t.antonym << '\t' << to_string(t.split) << '\n';
  }
}

/// Mean over usable triples of cos(anchor, synonym) - cos(anchor, antonym).
/// Triples with repeated words or out-of-vocabulary words are skipped and
/// counted.
inline MetricValue triples_score(const EmbeddingModel& model, std::span<const Triple> triples) {
  double sum = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
  for (const auto& t : triples) {
    auto a = model.vector(t.anchor);
    auto b = model.vector(t.synonym);
    auto c = model.vector(t.antonym);
    if (!a || !b || !c || t.anchor == t.synonym || t.anchor == t.antonym || t.synonym == t.antonym) {
      ++skipped;
      continue;
    }
    sum += cosine(*a, *b) - cosine(*a, *c);
    ++used;
  }
  if (used == 0) throw MetricUnavailable("triples: every triple was skipped");
  return {sum / static_cast<double>(used), skipped};
}

// ---------------------------------------------------------------------------
// Sentiment accuracy

struct LabeledDocument {
  std::string text;
  int label = 0;  // 1 positive, 0 negative
};

/// "label<TAB>text" lines where label is pos/neg/positive/negative/1/0.
inline std::vector<LabeledDocument> read_documents(std::istream& in) {
  std::vector<LabeledDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("documents line " + std::to_string(lineno) + ": missing tab");
    const std::string label = line.substr(0, tab);
    LabeledDocument d;
    if (label == "pos" || label == "positive" || label == "1" || label == "+") {
      d.label = 1;
    } else if (label == "neg" || label == "negative" || label == "0" || label == "-") {
      d.label = 0;
    } else {
      throw FormatError("documents line " + std::to_string(lineno) + ": unknown label '" + label + "'");
    }
    d.text = line.substr(tab + 1);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::vector<LabeledDocument> read_documents_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open documents file '" + path + "'");
  return read_documents(in);
}

/// Seeded 80/20 partition of [0, n): first element is the training set.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed,
                                                                                  double train_fraction = 0.8) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {std::move(train), std::move(test)};
}

struct LogisticOptions {
  int steps = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
};

/// Binary logistic regression with bias, fit by full-batch gradient
/// descent on mean log-loss + (l2/2)|w|^2.
class LogisticRegression {
 public:
  void fit(const std::vector<std::vector<double>>& x, std::span<const int> y, const LogisticOptions& opt = {}) {
    const std::size_t n = x.size();
    const std::size_t d = n == 0 ? 0 : x[0].size();
    weights_.assign(d, 0.0);
    bias_ = 0.0;
    std::vector<double> grad(d);
    for (int step = 0; step < opt.steps; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double err = sigmoid_(decision(x[i])) - static_cast<double>(y[i]);
        for (std::size_t c = 0; c < d; ++c) grad[c] += err * x[i][c];
        grad_b += err;
      }
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t c = 0; c < d; ++c) weights_[c] -= opt.learning_rate * (grad[c] * inv + opt.l2 * weights_[c]);
      bias_ -= opt.learning_rate * grad_b * inv;
    }
  }

  double decision(std::span<const double> x) const {
    double s = bias_;
    for (std::size_t c = 0; c < weights_.size(); ++c) s += weights_[c] * x[c];
    return s;
  }

  int predict(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : 0; }

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  static double sigmoid_(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Mean of the in-vocabulary token vectors, or nothing when the document
/// has none.
inline std::optional<std::vector<double>> document_centroid(const EmbeddingModel& model, std::string_view text) {
  std::vector<double> c(model.dim(), 0.0);
  std::size_t n = 0;
  for_each_token(
      text,
      [&](std::string&& t) {
        auto v = model.vector(t);
        if (!v) return;
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += (*v)[k];
        ++n;
      },
      [] {});
  if (n == 0) return std::nullopt;
  for (auto& x : c) x /= static_cast<double>(n);
  return c;
}

/// Features are z-scored with training-split statistics before fitting.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& x) {
    Standardizer s;
    const std::size_t d = x.empty() ? 0 : x[0].size();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    if (x.empty()) return s;
    for (const auto& r : x) {
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += r[c];
    }
    for (auto& m : s.mean) m /= static_cast<double>(x.size());
    std::vector<double> var(d, 0.0);
    for (const auto& r : x) {
      for (std::size_t c = 0; c < d; ++c) var[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(var[c] / static_cast<double>(x.size()));
      s.scale[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  void apply(std::vector<double>& r) const {
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = (r[c] - mean[c]) / scale[c];
  }
};

/// Held-out accuracy of a logistic-regression sentiment classifier over
/// document centroids. Documents with no in-vocabulary token are skipped.
inline MetricValue sentiment_accuracy(const EmbeddingModel& model, std::span<const LabeledDocument> docs,
                                      std::uint64_t split_seed, const LogisticOptions& options = {}) {
  if (docs.empty()) throw MetricUnavailable("accuracy: no documents");
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::size_t skipped = 0;
  for (const auto& d : docs) {
    auto c = document_centroid(model, d.text);
    if (!c) {
      ++skipped;
      continue;
    }
    features.push_back(std::move(*c));
    labels.push_back(d.label);
  }
  auto [train_idx, test_idx] = split_indices(features.size(), split_seed);
  auto has_both = [&](const std::vector<std::size_t>& idx) {
    bool pos = false;
    bool neg = false;
    for (auto i : idx) (labels[i] ? pos : neg) = true;
    return pos && neg;
  };
  if (!has_both(train_idx) || !has_both(test_idx)) {
    throw MetricUnavailable("accuracy: a class is absent from the train or test split");
  }
  std::vector<std::vector<double>> x_train;
  std::vector<int> y_train;
  for (auto i : train_idx) {
    x_train.push_back(features[i]);
    y_train.push_back(labels[i]);
  }
  const auto scaler = Standardizer::fit(x_train);
  for (auto& r : x_train) scaler.apply(r);
  LogisticRegression clf;
  clf.fit(x_train, y_train, options);
  std::size_t correct = 0;
  for (auto i : test_idx) {
    auto r = features[i];
    scaler.apply(r);
    if (clf.predict(r) == labels[i]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(test_idx.size()), skipped};
}

// ---------------------------------------------------------------------------
// Analogies

struct AnalogyQuestion {
  std::string a, b, c, expected;
};

/// Four whitespace-separated words per line; ':' section headers and
/// malformed lines are ignored. Words are normalized like corpus tokens.
inline std::vector<AnalogyQuestion> read_analogies(std::istream& in) {
  std::vector<AnalogyQuestion> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == ':') continue;
    std::istringstream ss(line);
    std::string a, b, c, d, extra;
    if (!(ss >> a >> b >> c >> d) || (ss >> extra)) continue;
    out.push_back({normalize_token(a), normalize_token(b), normalize_token(c), normalize_token(d)});
  }
  return out;
}

inline std::vector<AnalogyQuestion> read_analogies_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open analogy file '" + path + "'");
  return read_analogies(in);
}

/// Row-normalized copy of the model's vectors.
inline std::vector<float> normalized_rows(const EmbeddingModel& model) {
  const std::size_t d = model.dim();
  std::vector<float> out(model.data().begin(), model.data().end());
  for (std::size_t i = 0; i < model.rows(); ++i) {
    double n = 0.0;
    for (std::size_t k = 0; k < d; ++k) n += static_cast<double>(out[i * d + k]) * out[i * d + k];
    n = std::sqrt(n);
    if (n > 0.0) {
      for (std::size_t k = 0; k < d; ++k) out[i * d + k] = static_cast<float>(out[i * d + k] / n);
    }
  }
  return out;
}

struct AnalogyOptions {
  /// Consider only the most frequent N words as candidates and skip
  /// questions outside them; 0 means the whole vocabulary.
  std::size_t restrict_vocab = 0;
};

/// 3CosAdd: predict argmax_w cos(w, b - a + c) over unit vectors,
/// excluding a, b and c. Ties go to the lexicographically smaller word.
inline MetricValue analogy_accuracy(const EmbeddingModel& model, std::span<const AnalogyQuestion> questions,
                                    const AnalogyOptions& options = {}) {
  if (questions.empty()) throw MetricUnavailable("analogy: no questions");
  const std::size_t d = model.dim();
  const std::size_t limit =
      options.restrict_vocab == 0 ? model.rows() : std::min(options.restrict_vocab, model.rows());
  const auto unit = normalized_rows(model);
  const auto& vocab = model.vocab();
  std::size_t correct = 0;
  std::size_t answered = 0;
  std::size_t skipped = 0;
  std::vector<float> target(d);
  for (const auto& q : questions) {
    auto ia = vocab.find(q.a);
    auto ib = vocab.find(q.b);
    auto ic = vocab.find(q.c);
    auto ie = vocab.find(q.expected);
    if (!ia || !ib || !ic || !ie || *ia >= limit || *ib >= limit || *ic >= limit || *ie >= limit) {
      ++skipped;
      continue;
    }
    // Candidates are unit length, so dot products rank like cosines.
    for (std::size_t k = 0; k < d; ++k) target[k] = unit[*ib * d + k] - unit[*ia * d + k] + unit[*ic * d + k];
    std::size_t best = limit;
    float best_score = -std::numeric_limits<float>::infinity();
    for (std::size_t w = 0; w < limit; ++w) {
      if (w == *ia || w == *ib || w == *ic) continue;
      float s = 0.0f;
      const float* row = unit.data() + w * d;
      for (std::size_t k = 0; k < d; ++k) s += row[k] * target[k];
      if (s > best_score || (s == best_score && best < limit && vocab.word(w) < vocab.word(best))) {
        best_score = s;
        best = w;
      }
    }
    ++answered;
    if (best == *ie) ++correct;
  }
  if (answered == 0) throw MetricUnavailable("analogy: every question was skipped");
  return {static_cast<double>(correct) / static_cast<double>(answered), skipped};
}

// ---------------------------------------------------------------------------
// Label store

enum class Relation { Synonym, Antonym };

inline std::string_view to_string(Relation r) { return r == Relation::Synonym ? "synonym" : "antonym"; }

inline Relation parse_relation(std::string_view s) {
  if (s == "synonym") return Relation::Synonym;
  if (s == "antonym") return Relation::Antonym;
  throw FormatError("relation must be synonym or antonym, got '" + std::string(s) + "'");
}

struct PairLabel {
  std::uint64_t id = 0;
  std::string word_a;
  std::string word_b;
  Relation relation = Relation::Synonym;
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const PairLabel&, const PairLabel&) = default;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Synonym/antonym word-pair labels. Every successful mutation bumps the
/// version. Not internally synchronized; owners serialize writes.
class LabelStore {
 public:
  using VocabularyCheck = std::function<bool(const std::string&)>;

  /// Adds an unordered pair. Re-adding an identical pair returns the
  /// existing id without a version bump; the opposite relation for an
  /// existing pair throws ConflictError.
  std::uint64_t add(const std::string& a, const std::string& b, Relation rel, const VocabularyCheck& in_vocab = {},
                    std::string created_at = {}) {
    const auto wa = normalize_token(a);
    const auto wb = normalize_token(b);
    check_pair(wa, wb, in_vocab);
    if (auto* existing = find_pair(wa, wb)) {
      if (existing->relation != rel) throw conflict(*existing);
      return existing->id;
    }
    PairLabel label{next_id_++, wa, wb, rel, created_at.empty() ? utc_timestamp() : std::move(created_at)};
    labels_.push_back(std::move(label));
    ++version_;
    return labels_.back().id;
  }

  void update(std::uint64_t id, const std::string& a, const std::string& b, Relation rel,
              const VocabularyCheck& in_vocab = {}) {
    auto it = find_id(id);
    const auto wa = normalize_token(a);
    const auto wb = normalize_token(b);
    check_pair(wa, wb, in_vocab);
    if (auto* other = find_pair(wa, wb); other && other->id != id) {
      if (other->relation != rel) throw conflict(*other);
      throw ConflictError("pair (" + wa + ", " + wb + ") is already label " + std::to_string(other->id));
    }
    it->word_a = wa;
    it->word_b = wb;
    it->relation = rel;
    ++version_;
  }

  void remove(std::uint64_t id) {
    labels_.erase(find_id(id));
    ++version_;
  }

  const std::vector<PairLabel>& list() const { return labels_; }
  std::uint64_t version() const { return version_; }
  std::uint64_t next_id() const { return next_id_; }
  std::size_t size() const { return labels_.size(); }

  const PairLabel& get(std::uint64_t id) const {
    for (const auto& l : labels_) {
      if (l.id == id) return l;
    }
    throw NotFound("label " + std::to_string(id) + " not found");
  }

  /// Rebuilds a store from persisted parts without touching timestamps.
  static LabelStore restore(std::vector<PairLabel> labels, std::uint64_t version, std::uint64_t next_id) {
    LabelStore s;
    s.labels_ = std::move(labels);
    s.version_ = version;
    s.next_id_ = next_id;
    for (const auto& l : s.labels_) s.next_id_ = std::max(s.next_id_, l.id + 1);
    return s;
  }

  /// Joins synonym and antonym pairs that share a word into triples with
  /// that word as anchor, sorted by (anchor, synonym, antonym).
  std::vector<Triple> to_triples(Split split = Split::Train) const {
    std::map<std::string, std::pair<std::set<std::string>, std::set<std::string>>> by_word;
    for (const auto& l : labels_) {
      auto& a = by_word[l.word_a];
      auto& b = by_word[l.word_b];
      if (l.relation == Relation::Synonym) {
        a.first.insert(l.word_b);
        b.first.insert(l.word_a);
      } else {
        a.second.insert(l.word_b);
        b.second.insert(l.word_a);
      }
    }
    std::vector<Triple> out;
    for (const auto& [anchor, rel] : by_word) {
      for (const auto& syn : rel.first) {
        for (const auto& ant : rel.second) {
          if (syn != ant) out.push_back({anchor, syn, ant, split});
        }
      }
    }
    return out;
  }

  /// "word_a<TAB>word_b<TAB>synonym|antonym" lines.
  void write(std::ostream& out) const {
    for (const auto& l : labels_) out << l.word_a << '\t' << l.word_b << '\t' << to_string(l.relation) << '\n';
  }

  static LabelStore read(std::istream& in) {
    LabelStore s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string a, b, rel;
      if (!(ss >> a >> b >> rel)) throw FormatError("label line " + std::to_string(lineno) + ": expected 3 fields");
      s.add(a, b, parse_relation(rel));
    }
    return s;
  }

  static LabelStore read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open label file '" + path + "'");
    return read(in);
  }

 private:
  static void check_pair(const std::string& a, const std::string& b, const VocabularyCheck& in_vocab) {
    if (a.empty() || b.empty()) throw QueryError("label words must be non-empty");
    if (a == b) throw QueryError("a label must join two different words ('" + a + "')");
    if (in_vocab) {
      if (!in_vocab(a)) throw QueryError("word '" + a + "' is not in the active vocabulary");
      if (!in_vocab(b)) throw QueryError("word '" + b + "' is not in the active vocabulary");
    }
  }

  PairLabel* find_pair(const std::string& a, const std::string& b) {
    for (auto& l : labels_) {
      if ((l.word_a == a && l.word_b == b) || (l.word_a == b && l.word_b == a)) return &l;
    }
    return nullptr;
  }

  std::vector<PairLabel>::iterator find_id(std::uint64_t id) {
    auto it = std::find_if(labels_.begin(), labels_.end(), [&](const PairLabel& l) { return l.id == id; });
    if (it == labels_.end()) throw NotFound("label " + std::to_string(id) + " not found");
    return it;
  }

  static ConflictError conflict(const PairLabel& existing) {
    return ConflictError("pair (" + existing.word_a + ", " + existing.word_b + ") is already labeled " +
                         std::string(to_string(existing.relation)));
  }

  std::vector<PairLabel> labels_;
  std::uint64_t version_ = 0;
  std::uint64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Evaluation suite

/// Inputs shared by every model of a population.
struct EvalSuite {
  std::vector<Triple> triples;
  std::vector<LabeledDocument> documents;
  std::vector<AnalogyQuestion> analogies;
  std::uint64_t split_seed = 13;
  AnalogyOptions analogy_options;

  /// Triples used for the triples metric: training-split triples from the
  /// triples file plus those derived from the label store.
  std::vector<Triple> scoring_triples(const LabelStore* labels) const {
    std::vector<Triple> out;
    for (const auto& t : triples) {
      if (t.split == Split::Train) out.push_back(t);
    }
    if (labels) {
      auto extra = labels->to_triples();
      out.insert(out.end(), extra.begin(), extra.end());
    }
    return out;
  }

  /// Computes every available metric; unavailable ones are omitted from
  /// scores. train_seconds comes from the model.
  MetricReport evaluate(const EmbeddingModel& model, const LabelStore* labels = nullptr) const {
    MetricReport r;
    auto record = [&](const char* name, auto&& fn) {
      try {
        const MetricValue v = fn();
        r.scores[name] = v.value;
        r.skipped[name] = v.skipped;
      } catch (const MetricUnavailable&) {
        r.skipped[name] = 0;
      }
    };
    const auto ts = scoring_triples(labels);
    if (!ts.empty()) record(metric::kTriples, [&] { return triples_score(model, ts); });
    if (!documents.empty()) record(metric::kAccuracy, [&] { return sentiment_accuracy(model, documents, split_seed); });
    if (!analogies.empty()) record(metric::kAnalogy, [&] { return analogy_accuracy(model, analogies, analogy_options); });
    update_combined(r);
    r.scores[metric::kTrainSeconds] = model.train_seconds();
    return r;
  }

  static void update_combined(MetricReport& r) {
    auto t = r.score(metric::kTriples);
    auto a = r.score(metric::kAccuracy);
    if (t && a) {
      r.scores[metric::kCombined] = (*t + *a) / 2.0;
    } else {
      r.scores.erase(metric::kCombined);
    }
  }
};

}  // namespace embench
