#pragma once

#include <stdexcept>
#include <string>

namespace nag {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  config = 1,    // bad flags, incompatible settings
  data = 2,      // malformed or inconsistent input files
  internal = 3,  // violated invariant (shape mismatch, bad index)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

// Binary artifact load failures (token cache, model file).
enum class LoadFailure {
  not_found,
  bad_magic,
  version_mismatch,
  truncated,
  trailing_bytes,
  manifest_mismatch,
  hash_mismatch,
};

class LoadError : public DataError {
 public:
  LoadError(LoadFailure failure, const std::string& what)
      : DataError(what), failure_(failure) {}
  LoadFailure failure() const noexcept { return failure_; }

 private:
  LoadFailure failure_;
};

}  // namespace nag
