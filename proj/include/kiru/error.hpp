#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kiru {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input text that is not valid UTF-8.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Corpus line that violates the one-space-between-words format.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  enum class Kind { kBadMagic, kVersion, kChecksum, kTruncated, kMalformed };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace kiru
