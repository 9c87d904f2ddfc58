#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "embench/corpus.hpp"
#include "embench/model.hpp"

namespace embench::fixtures {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("embench-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << contents;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

/// Model over the given words with explicit row vectors.
inline EmbeddingModel make_model(const std::vector<std::string>& words, const std::vector<std::vector<float>>& rows,
                                 const std::string& id = "toy") {
  std::vector<std::uint64_t> counts(words.size(), 1);
  auto vocab = std::make_shared<const Vocabulary>(words, counts, words.size(), 1);
  std::vector<float> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  EmbeddingModel m(vocab, rows.at(0).size(), flat);
  m.set_model_id(id);
  return m;
}

/// Two disjoint topics: every line draws `words_per_line` words from one
/// topic's vocabulary. Returns newline-separated text.
inline std::string two_topic_corpus(std::size_t lines, std::size_t topic_words = 8, std::size_t words_per_line = 10,
                                    std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::string out;
  for (std::size_t l = 0; l < lines; ++l) {
    const char topic = (l % 2 == 0) ? 'a' : 'b';
    for (std::size_t w = 0; w < words_per_line; ++w) {
      out += topic;
      out += static_cast<char>('a' + rng() % topic_words);
      out += ' ';
    }
    out += '\n';
  }
  return out;
}

/// Copies the bundled toy workspace (corpus, evaluation files, sweep
/// config) into `dir` and returns the config path.
inline std::string copy_toy_workspace(const TempDir& dir) {
  for (const auto& e : std::filesystem::directory_iterator(EMBENCH_TOY_DIR)) {
    if (e.is_regular_file()) std::filesystem::copy_file(e.path(), dir.path() / e.path().filename());
  }
  return dir.file("sweep.json");
}

inline const char* env_path(const char* name) {
  const char* v = std::getenv(name);
  return (v && *v && std::filesystem::exists(v)) ? v : nullptr;
}

}  // namespace embench::fixtures
