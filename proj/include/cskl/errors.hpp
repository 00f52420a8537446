#pragma once

#include <stdexcept>
#include <string>

namespace cskl {

// Two sketches (or a sketch and a map spec) with different fingerprints.
class IncompatibleSketchError : public std::runtime_error {
 public:
  explicit IncompatibleSketchError(const std::string& what)
      : std::runtime_error(what) {}
};

// A privatized sketch is terminal: no update/merge/delete/re-privatize.
class SealedSketchError : public std::runtime_error {
 public:
  explicit SealedSketchError(const std::string& what)
      : std::runtime_error(what) {}
};

// Malformed serialized data (bad magic, version, truncation, CSV rows).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (ill-conditioned solve, non-finite objective).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace cskl
