#pragma once

// word2vec-style trainer: skip-gram or CBOW, negative sampling and/or
// hierarchical softmax, optional pretrained initialization (lockf) and
// post-hoc retrofitting to a semantic lexicon (retro).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/errors.hpp"
#include "embench/hyperparams.hpp"
#include "embench/model.hpp"
#include "embench/random.hpp"

namespace embench {

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Binary logistic loss over a set of output rows sharing one hidden
/// vector: sum over targets of -log sigma(s * u.h) with s = +1 for label 1
/// and -1 for label 0. Negative sampling uses one positive and k negative
/// targets; hierarchical softmax uses the Huffman path with label 1 - code.
template <typename T>
T logistic_targets_loss(std::span<const T> hidden, std::span<const std::span<const T>> outputs,
                        std::span<const int> labels) {
  T loss = T(0);
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const T f = dot(outputs[t], hidden);
    const T p = sigmoid(labels[t] ? f : -f);
    loss -= std::log(p);
  }
  return loss;
}

/// One stochastic gradient step on logistic_targets_loss. Output rows are
/// updated in place by -alpha * dL/du; the step for the hidden vector,
/// -alpha * dL/dh, is accumulated into `hidden_step` (not applied) so the
/// caller can route it to the input rows. Targets must be distinct rows.
template <typename T>
void logistic_targets_step(std::span<const T> hidden, std::span<const std::span<T>> outputs,
                           std::span<const int> labels, T alpha, std::span<T> hidden_step) {
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    auto u = outputs[t];
    T f = T(0);
    for (std::size_t c = 0; c < hidden.size(); ++c) f += u[c] * hidden[c];
    const T g = (T(labels[t]) - sigmoid(f)) * alpha;
    for (std::size_t c = 0; c < hidden.size(); ++c) hidden_step[c] += g * u[c];
    for (std::size_t c = 0; c < hidden.size(); ++c) u[c] += g * hidden[c];
  }
}

/// Huffman tree over vocabulary counts. Internal nodes are numbered
/// 0..V-2; node V-2 is the root. For each word, `points` lists the
/// internal nodes from the root down and `codes` the branch taken.
class HuffmanTree {
 public:
  HuffmanTree() = default;

  explicit HuffmanTree(std::span<const std::uint64_t> counts) {
    const std::size_t v = counts.size();
    codes_.assign(v, {});
    points_.assign(v, {});
    if (v < 2) return;
    // Two-queue construction: leaves sorted ascending, internal nodes are
    // produced in non-decreasing weight order.
    std::vector<std::size_t> leaf_order(v);
    for (std::size_t i = 0; i < v; ++i) leaf_order[i] = i;
    std::stable_sort(leaf_order.begin(), leaf_order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
    // Node ids: leaves 0..v-1, internal v..2v-2.
    std::vector<std::uint64_t> weight(2 * v - 1, 0);
    std::vector<std::size_t> parent(2 * v - 1, 0);
    std::vector<int> branch(2 * v - 1, 0);
    for (std::size_t i = 0; i < v; ++i) weight[i] = std::max<std::uint64_t>(counts[i], 1);
    std::size_t leaf_pos = 0;
    std::size_t internal_pos = v;
    std::size_t next_internal = v;
    auto pop_min = [&]() {
      const bool take_leaf =
          leaf_pos < v && (internal_pos >= next_internal || weight[leaf_order[leaf_pos]] <= weight[internal_pos]);
      return take_leaf ? leaf_order[leaf_pos++] : internal_pos++;
    };
    for (std::size_t k = 0; k + 1 < v; ++k) {
      const std::size_t a = pop_min();
      const std::size_t b = pop_min();
      const std::size_t node = next_internal++;
      weight[node] = weight[a] + weight[b];
      parent[a] = node;
      parent[b] = node;
      branch[a] = 0;
      branch[b] = 1;
    }
    const std::size_t root = 2 * v - 2;
    for (std::size_t w = 0; w < v; ++w) {
      std::vector<int> code;
      std::vector<std::uint32_t> point;
      for (std::size_t node = w; node != root; node = parent[node]) {
        code.push_back(branch[node]);
        point.push_back(static_cast<std::uint32_t>(parent[node] - v));
      }
      std::reverse(code.begin(), code.end());
      std::reverse(point.begin(), point.end());
      codes_[w] = std::move(code);
      points_[w] = std::move(point);
    }
  }

  std::size_t leaves() const { return codes_.size(); }
  std::size_t internal_nodes() const { return codes_.empty() ? 0 : codes_.size() - 1; }
  std::span<const int> code(std::size_t w) const { return codes_[w]; }
  std::span<const std::uint32_t> points(std::size_t w) const { return points_[w]; }

  /// Product over the path of sigma(+-u_node . h). `node_vectors` holds
  /// internal_nodes() rows of hidden.size() values.
  template <typename T>
  T path_probability(std::size_t w, std::span<const T> hidden, std::span<const T> node_vectors) const {
    const std::size_t d = hidden.size();
    T p = T(1);
    for (std::size_t i = 0; i < codes_[w].size(); ++i) {
      const T f = dot(node_vectors.subspan(points_[w][i] * d, d), hidden);
      p *= sigmoid(codes_[w][i] == 0 ? f : -f);
    }
    return p;
  }

 private:
  std::vector<std::vector<int>> codes_;
  std::vector<std::vector<std::uint32_t>> points_;
};

/// Draws words from the unigram distribution raised to 0.75.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75) {
    cumulative_.reserve(counts.size());
    double acc = 0.0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(std::max<std::uint64_t>(c, 1)), power);
      cumulative_.push_back(acc);
    }
  }

  std::uint32_t sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative_.begin());
  }

  double probability(std::size_t w) const {
    const double prev = w == 0 ? 0.0 : cumulative_[w - 1];
    return (cumulative_[w] - prev) / cumulative_.back();
  }

 private:
  std::vector<double> cumulative_;
};

/// Unordered word pairs used for retrofitting.
class Lexicon {
 public:
  Lexicon() = default;

  void add(const std::string& a, const std::string& b) {
    if (a == b) throw ConfigError("lexicon pair '" + a + "' links a word to itself");
    edges_.insert(a < b ? std::pair{a, b} : std::pair{b, a});
  }

  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

  /// Reads "word neighbor1 neighbor2 ..." lines (the usual retrofitting
  /// lexicon layout; a two-column TSV is the special case of one
  /// neighbor). Words are normalized like corpus tokens; self links are
  /// ignored.
  static Lexicon read(std::istream& in) {
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
      auto words = tokenize(line);
      for (std::size_t i = 1; i < words.size(); ++i) {
        if (words[i] != words[0]) lex.add(words[0], words[i]);
      }
    }
    return lex;
  }

  static Lexicon read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon '" + path + "'");
    return read(in);
  }

 private:
  std::set<std::pair<std::string, std::string>> edges_;
};

inline constexpr double kRetroEpsilon = 1e-3;

/// Weight of a word's own pre-retrofit vector. Continuous and increasing
/// in retro: 0.05 * degree at retro = 0, about 2000 * degree at retro = 2
/// (the vector barely moves).
inline double retrofit_alpha(double retro, std::size_t degree) {
  return (0.05 + retro / (2.0 - retro + kRetroEpsilon)) * static_cast<double>(degree);
}

struct RetrofitOptions {
  double tolerance = 1e-4;
  int max_rounds = 50;
  /// Called after each round with the round number (1-based) and the
  /// largest per-word L2 change of that round.
  std::function<void(int, double)> on_round;
};

/// Jacobi retrofitting: every round replaces each linked vector q_i by
/// (alpha_i * qhat_i + sum_j beta_ij q_j) / (alpha_i + sum_j beta_ij) with
/// beta_ij = 1/|N(i)|. Words without in-vocabulary neighbors are unchanged.
inline EmbeddingModel retrofit(const EmbeddingModel& model, const Lexicon& lexicon, double retro,
                               const RetrofitOptions& options = {}) {
  if (!(retro >= 0.0 && retro <= 2.0)) throw ConfigError("retro must lie in [0, 2]");
  const auto& vocab = model.vocab();
  const std::size_t n = vocab.size();
  const std::size_t d = model.dim();
  std::vector<std::vector<std::uint32_t>> neighbors(n);
  for (const auto& [a, b] : lexicon.edges()) {
    auto ia = vocab.find(a);
    auto ib = vocab.find(b);
    if (!ia || !ib) continue;
    neighbors[*ia].push_back(*ib);
    neighbors[*ib].push_back(*ia);
  }
  std::vector<double> original(model.data().begin(), model.data().end());
  std::vector<double> current = original;
  std::vector<double> next = original;
  for (int round = 1; round <= options.max_rounds; ++round) {
    double max_change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = neighbors[i];
      if (nb.empty()) continue;
      const double alpha = retrofit_alpha(retro, nb.size());
      const double beta = 1.0 / static_cast<double>(nb.size());
      const double denom = alpha + beta * static_cast<double>(nb.size());
      double change = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double s = alpha * original[i * d + c];
        for (auto j : nb) s += beta * current[j * d + c];
        const double v = s / denom;
        change += (v - current[i * d + c]) * (v - current[i * d + c]);
        next[i * d + c] = v;
      }
      max_change = std::max(max_change, std::sqrt(change));
    }
    current.swap(next);
    next = current;
    if (options.on_round) options.on_round(round, max_change);
    if (max_change < options.tolerance) break;
  }
  std::vector<float> out(current.begin(), current.end());
  return EmbeddingModel(model.vocab_ptr(), d, std::move(out), model.hyper(), model.train_seconds(), model.model_id());
}

/// Initial input vectors: uniform in [-0.5/size, 0.5/size], blended with
/// pretrained rows as lockf * pretrained + (1 - lockf) * random when lockf
/// is enabled.
inline std::vector<float> initial_vectors(const Vocabulary& vocab, const HyperParams& hyper,
                                          const EmbeddingModel* pretrained, Rng& rng) {
  const std::size_t d = static_cast<std::size_t>(hyper.size);
  std::vector<float> v(vocab.size() * d);
  for (auto& x : v) x = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(d));
  if (pretrained && hyper.uses_pretrained()) {
    const double lockf = hyper.lockf;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      auto p = pretrained->vector(vocab.word(i));
      if (!p) continue;
      for (std::size_t c = 0; c < d; ++c) {
        v[i * d + c] = lockf == 1.0 ? (*p)[c]
                                    : static_cast<float>(lockf * (*p)[c] + (1.0 - lockf) * v[i * d + c]);
      }
    }
  }
  return v;
}

namespace detail {

class Trainer {
 public:
  Trainer(const TokenStream& stream, const Vocabulary& vocab, const HyperParams& hyper, std::vector<float>& input)
      : stream_(stream),
        vocab_(vocab),
        hyper_(hyper),
        d_(static_cast<std::size_t>(hyper.size)),
        input_(input),
        rng_(hyper.seed ^ 0x9e3779b97f4a7c15ULL),
        sampler_(vocab.counts()) {
    if (hyper_.hs) {
      tree_ = HuffmanTree(vocab.counts());
      hs_out_.assign(std::max<std::size_t>(tree_.internal_nodes(), 1) * d_, 0.0f);
    }
    if (hyper_.negative > 0) ns_out_.assign(vocab.size() * d_, 0.0f);
    hidden_.resize(d_);
    step_.resize(d_);
  }

  void run() {
    const double total =
        static_cast<double>(stream_.token_count()) * static_cast<double>(std::max(hyper_.iterations, 1)) + 1.0;
    std::uint64_t processed = 0;
    for (int it = 0; it < hyper_.iterations; ++it) {
      for (std::size_t s = 0; s < stream_.sentence_count(); ++s) {
        auto sentence = stream_.sentence(s);
        for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
          const double progress = static_cast<double>(processed++) / total;
          const float alpha = static_cast<float>(hyper_.alpha * std::max(1e-4, 1.0 - progress));
          const int shrink = static_cast<int>(rng_.below(static_cast<std::uint64_t>(hyper_.window)));
          const int reach = hyper_.window - shrink;
          if (hyper_.architecture == Architecture::SkipGram) {
            skip_gram(sentence, pos, reach, alpha);
          } else {
            cbow(sentence, pos, reach, alpha);
          }
        }
      }
    }
  }

 private:
  std::span<float> input_row(std::size_t w) { return std::span<float>(input_).subspan(w * d_, d_); }

  // Updates output rows for predicting `target` from hidden_, accumulating
  // the hidden step.
  void predict(std::uint32_t target, float alpha) {
    std::fill(step_.begin(), step_.end(), 0.0f);
    if (hyper_.hs) {
      auto code = tree_.code(target);
      auto points = tree_.points(target);
      outputs_.clear();
      labels_.clear();
      for (std::size_t i = 0; i < code.size(); ++i) {
        outputs_.push_back(std::span<float>(hs_out_).subspan(points[i] * d_, d_));
        labels_.push_back(1 - code[i]);
      }
      logistic_targets_step<float>(hidden_, outputs_, labels_, alpha, step_);
    }
    if (hyper_.negative > 0) {
      outputs_.clear();
      labels_.clear();
      outputs_.push_back(std::span<float>(ns_out_).subspan(target * d_, d_));
      labels_.push_back(1);
      for (int k = 0; k < hyper_.negative; ++k) {
        const std::uint32_t neg = sampler_.sample(rng_);
        if (neg == target) continue;
        outputs_.push_back(std::span<float>(ns_out_).subspan(neg * d_, d_));
        labels_.push_back(0);
      }
      // Repeated negatives are applied as separate steps so every target
      // row in a call is distinct.
      dedupe_and_step(alpha);
    }
  }

  void dedupe_and_step(float alpha) {
    std::size_t start = 0;
    while (start < outputs_.size()) {
      std::size_t end = start + 1;
      auto seen = [&](std::size_t upto, const float* p) {
        for (std::size_t i = start; i < upto; ++i) {
          if (outputs_[i].data() == p) return true;
        }
        return false;
      };
      while (end < outputs_.size() && !seen(end, outputs_[end].data())) ++end;
      logistic_targets_step<float>(hidden_, std::span(outputs_).subspan(start, end - start),
                                   std::span<const int>(labels_).subspan(start, end - start), alpha, step_);
      start = end;
    }
  }

  void skip_gram(std::span<const std::uint32_t> sentence, std::size_t pos, int reach, float alpha) {
    const std::uint32_t center = sentence[pos];
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sentence.size());
    for (std::ptrdiff_t off = -reach; off <= reach; ++off) {
      if (off == 0) continue;
      const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(pos) + off;
      if (c < 0 || c >= n) continue;
      auto in = input_row(sentence[static_cast<std::size_t>(c)]);
      std::copy(in.begin(), in.end(), hidden_.begin());
      predict(center, alpha);
      for (std::size_t k = 0; k < d_; ++k) in[k] += step_[k];
    }
  }

  void cbow(std::span<const std::uint32_t> sentence, std::size_t pos, int reach, float alpha) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sentence.size());
    std::fill(hidden_.begin(), hidden_.end(), 0.0f);
    int used = 0;
    for (std::ptrdiff_t off = -reach; off <= reach; ++off) {
      const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(pos) + off;
      if (off == 0 || c < 0 || c >= n) continue;
      auto in = input_row(sentence[static_cast<std::size_t>(c)]);
      for (std::size_t k = 0; k < d_; ++k) hidden_[k] += in[k];
      ++used;
    }
    if (used == 0) return;
    for (auto& h : hidden_) h /= static_cast<float>(used);
    predict(sentence[pos], alpha);
    for (std::ptrdiff_t off = -reach; off <= reach; ++off) {
      const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(pos) + off;
      if (off == 0 || c < 0 || c >= n) continue;
      auto in = input_row(sentence[static_cast<std::size_t>(c)]);
      for (std::size_t k = 0; k < d_; ++k) in[k] += step_[k];
    }
  }

  const TokenStream& stream_;
  const Vocabulary& vocab_;
  const HyperParams& hyper_;
  std::size_t d_;
  std::vector<float>& input_;
  Rng rng_;
  NegativeSampler sampler_;
  HuffmanTree tree_;
  std::vector<float> hs_out_;
  std::vector<float> ns_out_;
  std::vector<float> hidden_;
  std::vector<float> step_;
  std::vector<std::span<float>> outputs_;
  std::vector<int> labels_;
};

}  // namespace detail

/// Trains one model. `pretrained` must be given exactly when lockf is
/// enabled and `lexicon` exactly when retro is enabled. Single-threaded,
/// so a fixed (stream, hyper) pair always yields the same vectors.
inline EmbeddingModel train(const TokenStream& stream, std::shared_ptr<const Vocabulary> vocab,
                            const HyperParams& hyper, const EmbeddingModel* pretrained = nullptr,
                            const Lexicon* lexicon = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  hyper.validate();
  if (!vocab || vocab->empty()) throw EmptyVocabulary("training requires a non-empty vocabulary");
  if (hyper.uses_pretrained() != (pretrained != nullptr)) {
    throw ConfigError(hyper.uses_pretrained() ? "lockf is set but no pretrained model was supplied"
                                              : "a pretrained model was supplied but lockf is -1");
  }
  if (hyper.uses_retrofit() != (lexicon != nullptr)) {
    throw ConfigError(hyper.uses_retrofit() ? "retro is set but no lexicon was supplied"
                                            : "a lexicon was supplied but retro is -1");
  }
  if (pretrained && pretrained->dim() != static_cast<std::size_t>(hyper.size)) {
    throw ConfigError("pretrained dimension " + std::to_string(pretrained->dim()) + " does not match size " +
                      std::to_string(hyper.size));
  }
  if (stream.empty()) throw EmptyCorpus("token stream is empty");
  for (auto t : stream.tokens()) {
    if (t >= vocab->size()) throw ConfigError("token stream does not belong to this vocabulary");
  }

  Rng init_rng(hyper.seed);
  std::vector<float> input = initial_vectors(*vocab, hyper, pretrained, init_rng);
  detail::Trainer(stream, *vocab, hyper, input).run();

  EmbeddingModel model(vocab, static_cast<std::size_t>(hyper.size), std::move(input), hyper);
  if (lexicon) model = retrofit(model, *lexicon, hyper.retro);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  model.set_train_seconds(elapsed.count());
  return model;
}

/// Vocabulary, subsampled stream and model from raw corpus text, the way a
/// sweep trains each point.
inline EmbeddingModel train_corpus(std::string_view corpus_text, std::uint32_t min_count, const HyperParams& hyper,
                                   const EmbeddingModel* pretrained = nullptr, const Lexicon* lexicon = nullptr) {
  hyper.validate();
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(corpus_text, min_count));
  const auto stream = subsample_stream(*vocab, corpus_text, hyper.subsample_threshold(), hyper.seed);
  return train(stream, vocab, hyper, pretrained, lexicon);
}

}  // namespace embench
