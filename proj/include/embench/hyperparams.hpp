#pragma once

// One point in hyperparameter space, its JSON form, and the catalog of
// dimensions that the comparison views sort, filter and correlate on.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "embench/errors.hpp"

namespace embench {

using json = nlohmann::ordered_json;

enum class Architecture { SkipGram, Cbow };

inline std::string_view to_string(Architecture a) { return a == Architecture::SkipGram ? "skip-gram" : "cbow"; }

inline Architecture parse_architecture(std::string_view s) {
  if (s == "skip-gram" || s == "sg" || s == "skipgram") return Architecture::SkipGram;
  if (s == "cbow") return Architecture::Cbow;
  throw ConfigError("unknown architecture '" + std::string(s) + "' (expected skip-gram or cbow)");
}

/// Sentinel used by lockf, retro and subsample_t for "disabled".
inline constexpr double kDisabled = -1.0;

/// Hierarchical softmax and negative sampling are independent switches as
/// in word2vec: both may be active at once, at least one must be.
struct HyperParams {
  int size = 100;
  int window = 5;
  Architecture architecture = Architecture::SkipGram;
  bool hs = false;
  int negative = 5;
  double alpha = 0.025;
  int iterations = 5;
  double subsample_t = 1e-3;
  double lockf = kDisabled;
  double retro = kDisabled;
  std::uint64_t seed = 1;

  bool subsampling() const { return subsample_t != kDisabled; }
  bool uses_pretrained() const { return lockf != kDisabled; }
  bool uses_retrofit() const { return retro != kDisabled; }

  std::optional<double> subsample_threshold() const {
    return subsampling() ? std::optional<double>(subsample_t) : std::nullopt;
  }

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    if (size < 1) throw ConfigError("size must be a positive integer");
    if (window < 1) throw ConfigError("window must be a positive integer");
    if (negative < 0) throw ConfigError("negative must be >= 0");
    if (!hs && negative == 0) throw ConfigError("negative must be > 0 when hs is off");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (subsample_t != kDisabled && !(subsample_t > 0.0 && subsample_t <= 1.0)) {
      throw ConfigError("subsample_t must lie in (0, 1] or be -1");
    }
    if (lockf != kDisabled && !(lockf >= 0.0 && lockf <= 1.0)) throw ConfigError("lockf must lie in [0, 1] or be -1");
    if (retro != kDisabled && !(retro >= 0.0 && retro <= 2.0)) throw ConfigError("retro must lie in [0, 2] or be -1");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Field names in canonical order. Sweep configs and CLI flags use these
/// names verbatim.
inline const std::vector<std::string>& hyper_field_names() {
  static const std::vector<std::string> names{"size",       "window",      "architecture", "hs",
                                              "negative",   "alpha",       "iterations",   "subsample_t",
                                              "lockf",      "retro",       "seed"};
  return names;
}

inline bool is_hyper_field(std::string_view name) {
  for (const auto& n : hyper_field_names()) {
    if (n == name) return true;
  }
  return false;
}

inline json to_json(const HyperParams& h) {
  json j;
  j["size"] = h.size;
  j["window"] = h.window;
  j["architecture"] = std::string(to_string(h.architecture));
  j["hs"] = h.hs;
  j["negative"] = h.negative;
  j["alpha"] = h.alpha;
  j["iterations"] = h.iterations;
  j["subsample_t"] = h.subsample_t;
  j["lockf"] = h.lockf;
  j["retro"] = h.retro;
  j["seed"] = h.seed;
  return j;
}

namespace detail {

inline int json_int(const json& v, std::string_view field) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return static_cast<int>(d);
  }
  throw ConfigError(std::string(field) + " must be an integer");
}

inline double json_real(const json& v, std::string_view field) {
  if (v.is_number()) return v.get<double>();
  throw ConfigError(std::string(field) + " must be a number");
}

}  // namespace detail

/// Sets one field from a JSON value. Throws ConfigError for unknown names
/// or ill-typed values.
inline void set_field(HyperParams& h, std::string_view name, const json& v) {
  if (name == "size") {
    h.size = detail::json_int(v, name);
  } else if (name == "window") {
    h.window = detail::json_int(v, name);
  } else if (name == "architecture") {
    if (!v.is_string()) throw ConfigError("architecture must be a string");
    h.architecture = parse_architecture(v.get<std::string>());
  } else if (name == "hs") {
    if (v.is_boolean()) {
      h.hs = v.get<bool>();
    } else {
      h.hs = detail::json_int(v, name) != 0;
    }
  } else if (name == "negative") {
    h.negative = detail::json_int(v, name);
  } else if (name == "alpha") {
    h.alpha = detail::json_real(v, name);
  } else if (name == "iterations") {
    h.iterations = detail::json_int(v, name);
  } else if (name == "subsample_t") {
    h.subsample_t = v.is_null() ? kDisabled : detail::json_real(v, name);
  } else if (name == "lockf") {
    h.lockf = detail::json_real(v, name);
  } else if (name == "retro") {
    h.retro = detail::json_real(v, name);
  } else if (name == "seed") {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError("seed must be a non-negative integer");
    h.seed = v.get<std::uint64_t>();
  } else {
    throw ConfigError("unknown hyperparameter '" + std::string(name) + "'");
  }
}

inline HyperParams hyper_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("hyperparameters must be a JSON object");
  HyperParams h;
  for (auto it = j.begin(); it != j.end(); ++it) set_field(h, it.key(), it.value());
  h.validate();
  return h;
}

/// Canonical text used for hashing: fixed field order, shortest
/// round-trip number formatting.
inline std::string canonical_string(const HyperParams& h) { return to_json(h).dump(); }

/// A dimension shown on a parallel-coordinates axis. Categorical
/// dimensions are encoded by the index of their level.
struct Dimension {
  std::string name;
  bool is_metric = false;
  std::vector<std::string> levels;  // empty for numeric dimensions

  bool categorical() const { return !levels.empty(); }
};

inline const std::vector<Dimension>& hyper_dimensions() {
  static const std::vector<Dimension> dims{
      {"size", false, {}},        {"window", false, {}},
      {"architecture", false, {"cbow", "skip-gram"}},
      {"hs", false, {"false", "true"}},
      {"negative", false, {}},    {"alpha", false, {}},
      {"iterations", false, {}},  {"subsample_t", false, {}},
      {"lockf", false, {}},       {"retro", false, {}},
  };
  return dims;
}

inline std::optional<double> hyper_value(const HyperParams& h, std::string_view name) {
  if (name == "size") return h.size;
  if (name == "window") return h.window;
  if (name == "architecture") return h.architecture == Architecture::SkipGram ? 1.0 : 0.0;
  if (name == "hs") return h.hs ? 1.0 : 0.0;
  if (name == "negative") return h.negative;
  if (name == "alpha") return h.alpha;
  if (name == "iterations") return h.iterations;
  if (name == "subsample_t") return h.subsample_t;
  if (name == "lockf") return h.lockf;
  if (name == "retro") return h.retro;
  if (name == "seed") return static_cast<double>(h.seed);
  return std::nullopt;
}

}  // namespace embench
