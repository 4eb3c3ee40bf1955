#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace quadtask {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (e.g. passed nil to get_chunk).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class InvalidHandle : public Error {
 public:
  using Error::Error;
};

class OutOfMemory : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DeadlockError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::int64_t index)
      : Error("matrix is not positive definite: non-positive pivot at diagonal index " +
              std::to_string(index)),
        index_(index) {}

  std::int64_t index() const noexcept { return index_; }

 private:
  std::int64_t index_;
};

}  // namespace quadtask
