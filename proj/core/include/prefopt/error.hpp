// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace prefopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (JSONL rows, schema violations, broken invariants).
class DataError : public Error {
 public:
  using Error::Error;
};

/// File-system failures; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A judge or scorer could not produce an outcome.
class JudgeError : public Error {
 public:
  using Error::Error;
};

/// A judge reply without a usable verdict tag. Keeps the raw reply text.
class ParseError : public JudgeError {
 public:
  explicit ParseError(std::string raw)
      : JudgeError("no parsable <verdict> tag in judge reply"), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Training diverged; the message holds a diagnostic snapshot.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace prefopt
