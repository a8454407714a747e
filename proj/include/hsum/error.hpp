#pragma once

#include <stdexcept>
#include <string>

namespace hsum {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A referenced file is missing or cannot be read/written.
class FileError : public Error {
 public:
  using Error::Error;
};

// A document parses but does not follow the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class DuplicateIdError : public Error {
 public:
  using Error::Error;
};

// A value lies outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Array dimensions disagree with the manifest or with each other.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A domain invariant (segment bounds, label values, ...) is violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsum
