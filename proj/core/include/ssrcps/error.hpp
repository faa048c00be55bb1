#pragma once

#include <stdexcept>
#include <string>

namespace ssrcps {

// Malformed or inconsistent input data (unparseable CSV, schema mismatch,
// non-binary losses where binary ones are required, overlapping stages).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A root search that did not reach its tolerance within the iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ssrcps
