#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glimg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a precondition (bad ratio, negative sigma, k > m ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A rating file line could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input data is structurally unusable (empty rating set, unknown user, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// The per-cluster system could not be factorized.
class NumericalError : public Error {
 public:
  NumericalError(int cluster_id, const std::string& what)
      : Error("cluster " + std::to_string(cluster_id) + ": " + what), cluster_id_(cluster_id) {}

  int cluster_id() const noexcept { return cluster_id_; }

 private:
  int cluster_id_;
};

/// Model file has the wrong magic bytes or an unsupported version.
class ModelVersionError : public Error {
 public:
  using Error::Error;
};

/// Model file is truncated or internally inconsistent.
class CorruptModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace glimg
