#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace saenad {

// Every failure surfaced by the library derives from Error. The kind lets the
// CLI map failures to distinct exit statuses without string matching.
enum class ErrorKind {
  Parse,
  Validation,
  Referential,
  EmptyDataset,
  Split,
  Index,
  DegenerateUser,
  Numeric,
  Divergence,
  Shape,
  Cutoff,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class ReferentialError : public Error {
 public:
  explicit ReferentialError(const std::string& what) : Error(ErrorKind::Referential, what) {}
};

class EmptyDatasetError : public Error {
 public:
  explicit EmptyDatasetError(const std::string& what) : Error(ErrorKind::EmptyDataset, what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error(ErrorKind::Split, what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(ErrorKind::Index, what) {}
};

class DegenerateUserError : public Error {
 public:
  explicit DegenerateUserError(const std::string& what) : Error(ErrorKind::DegenerateUser, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : Error(ErrorKind::Divergence, "training diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::Shape, what) {}
};

class CutoffError : public Error {
 public:
  explicit CutoffError(const std::string& what) : Error(ErrorKind::Cutoff, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace saenad
