#pragma once

#include <stdexcept>
#include <string>

namespace idseq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data or violated invariant (schema, split overlap, bad config).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or undecodable media.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Corrupted, truncated or incompatible binary artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace idseq
