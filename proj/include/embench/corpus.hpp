#pragma once

// Corpus ingestion: tokenization, frequency-ordered vocabularies and
// subsampled token streams.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "embench/errors.hpp"
#include "embench/random.hpp"

namespace embench {

/// Sentences longer than this are split into consecutive chunks. text8 is a
/// single 17M-token line; chunking only ever adds boundaries.
inline constexpr std::size_t kMaxSentenceLength = 1000;

inline constexpr std::uint32_t kDefaultMinCount = 5;

namespace detail {

inline bool is_edge_char(unsigned char c) {
  // Bytes >= 0x80 belong to UTF-8 sequences and are kept.
  return c < 0x80 && !std::isalnum(c);
}

}  // namespace detail

/// Lowercases ASCII letters and strips non-alphanumeric characters from
/// both ends. Returns an empty string when nothing survives.
inline std::string normalize_token(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && detail::is_edge_char(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && detail::is_edge_char(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Calls `on_token(std::string&&)` for every normalized token and
/// `on_sentence_end()` after every line (and every kMaxSentenceLength
/// tokens within a line).
template <typename OnToken, typename OnSentenceEnd>
void for_each_token(std::string_view text, OnToken&& on_token, OnSentenceEnd&& on_sentence_end) {
  std::size_t pos = 0;
  std::size_t in_sentence = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    const char c = text[pos];
    if (c == '\n') {
      if (in_sentence > 0) on_sentence_end();
      in_sentence = 0;
      ++pos;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < n && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    std::string token = normalize_token(text.substr(pos, end - pos));
    pos = end;
    if (token.empty()) continue;
    on_token(std::move(token));
    if (++in_sentence == kMaxSentenceLength) {
      on_sentence_end();
      in_sentence = 0;
    }
  }
  if (in_sentence > 0) on_sentence_end();
}

/// Normalized tokens of a single line or document, ignoring sentence
/// structure.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for_each_token(text, [&](std::string&& t) { out.push_back(std::move(t)); }, [] {});
  return out;
}

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Takes ownership of words and counts. Throws FormatError when the
  /// invariants (unique words, counts >= min_count, sum <= total) fail.
  Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts,
             std::uint64_t total_tokens, std::uint32_t min_count)
      : words_(std::move(words)),
        counts_(std::move(counts)),
        total_tokens_(total_tokens),
        min_count_(min_count) {
    if (words_.size() != counts_.size()) {
      throw FormatError("vocabulary: words and counts differ in length");
    }
    std::uint64_t sum = 0;
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (counts_[i] < min_count_) {
        throw FormatError("vocabulary: count of '" + words_[i] + "' below min_count");
      }
      sum += counts_[i];
      if (!index_.emplace(words_[i], static_cast<std::uint32_t>(i)).second) {
        throw FormatError("vocabulary: duplicate word '" + words_[i] + "'");
      }
    }
    if (sum > total_tokens_) throw FormatError("vocabulary: counts exceed total_tokens");
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::uint64_t count(std::size_t i) const { return counts_[i]; }
  std::span<const std::string> words() const { return words_; }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::uint32_t min_count() const { return min_count_; }

  std::optional<std::uint32_t> find(std::string_view w) const {
    auto it = index_.find(std::string(w));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view w) const { return find(w).has_value(); }

  /// count / total_tokens, or 0 for an empty corpus.
  double frequency(std::size_t i) const {
    return total_tokens_ == 0 ? 0.0 : static_cast<double>(counts_[i]) / static_cast<double>(total_tokens_);
  }

  /// Writes "word<TAB>count" lines in vocabulary order.
  void write_tsv(std::ostream& out) const {
    for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << counts_[i] << '\n';
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.counts_ == b.counts_ && a.total_tokens_ == b.total_tokens_ &&
           a.min_count_ == b.min_count_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_tokens_ = 0;
  std::uint32_t min_count_ = 0;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Counts tokens and keeps those with count >= min_count, ordered by
/// descending count with lexicographic tie-break.
inline Vocabulary build_vocabulary(std::string_view corpus_text, std::uint32_t min_count = kDefaultMinCount) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for_each_token(
      corpus_text,
      [&](std::string&& t) {
        ++counts[std::move(t)];
        ++total;
      },
      [] {});
  if (total == 0) throw EmptyCorpus();

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  if (kept.empty()) {
    throw EmptyVocabulary("no token occurs at least " + std::to_string(min_count) + " times");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  std::vector<std::uint64_t> cs;
  words.reserve(kept.size());
  cs.reserve(kept.size());
  for (auto& [w, c] : kept) {
    words.push_back(std::move(w));
    cs.push_back(c);
  }
  return Vocabulary(std::move(words), std::move(cs), total, min_count);
}

/// Probability that one occurrence of a word with corpus frequency `freq`
/// is discarded: max(0, 1 - sqrt(t / freq)).
inline double discard_probability(double freq, double threshold) {
  if (freq <= 0.0) return 0.0;
  return std::max(0.0, 1.0 - std::sqrt(threshold / freq));
}

/// Sentences of vocabulary indices, stored flat.
class TokenStream {
 public:
  TokenStream() = default;
  explicit TokenStream(std::uint64_t seed) : seed_(seed) {}

  void push(std::uint32_t token) { tokens_.push_back(token); }
  void end_sentence() {
    if (tokens_.size() > offsets_.back()) offsets_.push_back(tokens_.size());
  }

  std::size_t sentence_count() const { return offsets_.size() - 1; }
  std::span<const std::uint32_t> sentence(std::size_t i) const {
    return std::span<const std::uint32_t>(tokens_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  std::size_t token_count() const { return tokens_.size(); }
  std::span<const std::uint32_t> tokens() const { return tokens_; }
  std::uint64_t seed() const { return seed_; }
  bool empty() const { return tokens_.empty(); }

  friend bool operator==(const TokenStream& a, const TokenStream& b) {
    return a.seed_ == b.seed_ && a.tokens_ == b.tokens_ && a.offsets_ == b.offsets_;
  }

 private:
  std::uint64_t seed_ = 0;
  std::vector<std::uint32_t> tokens_;
  std::vector<std::size_t> offsets_{0};
};

/// Maps the corpus onto vocabulary indices, dropping out-of-vocabulary
/// tokens and discarding each occurrence of word w with
/// discard_probability(f(w), threshold). A missing threshold keeps every
/// in-vocabulary token. Exactly one uniform draw is consumed per
/// in-vocabulary token, so lowering the threshold can only remove tokens.
inline TokenStream subsample_stream(const Vocabulary& vocab, std::string_view corpus_text,
                                    std::optional<double> threshold, std::uint64_t seed) {
  if (threshold && !(*threshold > 0.0 && *threshold <= 1.0)) {
    throw ConfigError("subsample threshold must lie in (0, 1]");
  }
  std::vector<double> discard(vocab.size(), 0.0);
  if (threshold) {
    for (std::size_t i = 0; i < vocab.size(); ++i) discard[i] = discard_probability(vocab.frequency(i), *threshold);
  }
  Rng rng(seed);
  TokenStream stream(seed);
  for_each_token(
      corpus_text,
      [&](std::string&& t) {
        auto idx = vocab.find(t);
        if (!idx) return;
        const double u = rng.uniform();
        if (u >= discard[*idx]) stream.push(*idx);
      },
      [&] { stream.end_sentence(); });
  stream.end_sentence();
  return stream;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace embench
