#pragma once

#include <stdexcept>
#include <string>

namespace embench {

/// Root of every error thrown by the library. The CLI maps `UsageError`
/// to exit code 1 and everything else to exit code 2; the service maps
/// the concrete types onto HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("corpus contains no tokens") {}
  explicit EmptyCorpus(const std::string& what) : Error(what) {}
};

class EmptyVocabulary : public Error {
 public:
  explicit EmptyVocabulary(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class MetricUnavailable : public Error {
 public:
  using Error::Error;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace embench
