#pragma once

// Trained embedding model and its on-disk formats.
//
// Binary layout (all integers and floats little-endian):
//   "EMB1" | u32 vocab_size | u32 dim | vocab_size * dim f32 rows
//   | per word: u32 byte length, UTF-8 bytes, u64 count
//   | u64 total_tokens | u32 min_count | u32 n, n bytes of JSON metadata
// Text layout: "vocab_size dim\n" then "word v1 ... vd\n" per row, six
// significant digits.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/errors.hpp"
#include "embench/hyperparams.hpp"

namespace embench {

class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  EmbeddingModel(std::shared_ptr<const Vocabulary> vocab, std::size_t dim, std::vector<float> vectors,
                 HyperParams hyper = {}, double train_seconds = 0.0, std::string model_id = {})
      : vocab_(std::move(vocab)),
        dim_(dim),
        vectors_(std::move(vectors)),
        hyper_(hyper),
        train_seconds_(train_seconds),
        model_id_(std::move(model_id)) {
    if (!vocab_) throw ConfigError("model requires a vocabulary");
    if (dim_ == 0) throw ConfigError("model dimension must be positive");
    if (vectors_.size() != vocab_->size() * dim_) throw FormatError("model matrix does not match vocabulary size x dim");
    for (float v : vectors_) {
      if (!std::isfinite(v)) throw FormatError("model contains non-finite values");
    }
  }

  const Vocabulary& vocab() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return vocab_ ? vocab_->size() : 0; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(vectors_).subspan(i * dim_, dim_);
  }
  std::span<const float> data() const { return vectors_; }

  std::optional<std::span<const float>> vector(std::string_view word) const {
    auto idx = vocab_->find(word);
    if (!idx) return std::nullopt;
    return row(*idx);
  }

  const HyperParams& hyper() const { return hyper_; }
  double train_seconds() const { return train_seconds_; }
  const std::string& model_id() const { return model_id_; }
  void set_model_id(std::string id) { model_id_ = std::move(id); }
  void set_train_seconds(double s) { train_seconds_ = s; }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::size_t dim_ = 0;
  std::vector<float> vectors_;
  HyperParams hyper_;
  double train_seconds_ = 0.0;
  std::string model_id_;
};

enum class ModelFormat { Binary, Text };

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("model file truncated");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

}  // namespace detail

inline void write_binary(const EmbeddingModel& m, std::ostream& out) {
  out.write("EMB1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  const auto& vocab = m.vocab();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& w = vocab.word(i);
    detail::put_u32(out, static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
    detail::put_u64(out, vocab.count(i));
  }
  detail::put_u64(out, vocab.total_tokens());
  detail::put_u32(out, vocab.min_count());
  json meta;
  meta["model_id"] = m.model_id();
  meta["train_seconds"] = m.train_seconds();
  meta["hyper"] = to_json(m.hyper());
  const std::string s = meta.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline EmbeddingModel read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "EMB1") throw FormatError("missing EMB1 magic");
  const std::uint32_t n = detail::get_u32(in);
  const std::uint32_t dim = detail::get_u32(in);
  if (dim == 0) throw FormatError("model header declares zero dimension");
  std::vector<float> vectors(static_cast<std::size_t>(n) * dim);
  for (float& v : vectors) v = std::bit_cast<float>(detail::get_u32(in));
  std::vector<std::string> words(n);
  std::vector<std::uint64_t> counts(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = detail::get_u32(in);
    if (len > (1u << 20)) throw FormatError("implausible word length in model file");
    words[i].resize(len);
    if (!in.read(words[i].data(), len)) throw FormatError("model file truncated");
    counts[i] = detail::get_u64(in);
  }
  const std::uint64_t total = detail::get_u64(in);
  const std::uint32_t min_count = detail::get_u32(in);
  const std::uint32_t meta_len = detail::get_u32(in);
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), meta_len)) throw FormatError("model file truncated");
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  }
  auto vocab = std::make_shared<const Vocabulary>(std::move(words), std::move(counts), total, min_count);
  HyperParams hyper;
  try {
    hyper = hyper_from_json(meta.at("hyper"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  }
  return EmbeddingModel(std::move(vocab), dim, std::move(vectors), hyper, meta.value("train_seconds", 0.0),
                        meta.value("model_id", std::string{}));
}

inline void write_text(const EmbeddingModel& m, std::ostream& out) {
  out << m.rows() << ' ' << m.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << m.vocab().word(i);
    for (float v : m.row(i)) {
      std::snprintf(buf, sizeof buf, " %.6g", static_cast<double>(v));
      out << buf;
    }
    out << '\n';
  }
}

/// Reads the interchange text format. Counts are not part of it, so the
/// vocabulary carries zero counts in file order.
inline EmbeddingModel read_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty model file");
  std::istringstream header(line);
  long long n = -1;
  long long dim = -1;
  std::string extra;
  if (!(header >> n >> dim) || (header >> extra) || n < 0 || dim <= 0) {
    throw FormatError("malformed header '" + line + "' (expected 'vocab_size dim')");
  }
  std::vector<std::string> words;
  std::vector<float> vectors;
  words.reserve(static_cast<std::size_t>(n));
  vectors.reserve(static_cast<std::size_t>(n * dim));
  for (long long r = 0; r < n; ++r) {
    if (!std::getline(in, line)) throw FormatError("expected " + std::to_string(n) + " rows, found " + std::to_string(r));
    std::istringstream row(line);
    std::string word;
    if (!(row >> word)) throw FormatError("empty row " + std::to_string(r + 1));
    long long got = 0;
    std::string tok;
    while (row >> tok) {
      char* end = nullptr;
      const float v = std::strtof(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw FormatError("non-numeric value '" + tok + "' in row of '" + word + "'");
      vectors.push_back(v);
      ++got;
    }
    if (got != dim) {
      throw FormatError("row '" + word + "' has " + std::to_string(got) + " values, header declares " +
                        std::to_string(dim));
    }
    words.push_back(std::move(word));
  }
  std::vector<std::uint64_t> counts(words.size(), 0);
  auto vocab = std::make_shared<const Vocabulary>(std::move(words), std::move(counts), 0, 0);
  return EmbeddingModel(std::move(vocab), static_cast<std::size_t>(dim), std::move(vectors));
}

inline void save_model(const EmbeddingModel& m, const std::string& path, ModelFormat format = ModelFormat::Binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  if (format == ModelFormat::Binary) {
    write_binary(m, out);
  } else {
    write_text(m, out);
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

/// Detects the format from the leading magic bytes.
inline EmbeddingModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::string_view(magic, 4) == "EMB1";
  in.clear();
  in.seekg(0);
  return binary ? read_binary(in) : read_text(in);
}

}  // namespace embench
