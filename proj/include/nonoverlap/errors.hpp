#pragma once

#include <stdexcept>
#include <string>

namespace nonoverlap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tuning parameter lies outside its domain (threshold, smoothness, alpha, B, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a contract: non-finite values, outcome outside [0,1],
/// non-binary treatment, missing or non-numeric CSV cells.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A cross-fitting training set lacks treated or control units.
class FoldDegeneracyError : public DataError {
 public:
  FoldDegeneracyError(int fold, const std::string& what)
      : DataError(what), fold_(fold) {}
  int fold() const noexcept { return fold_; }

 private:
  int fold_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling cannot (or did not) produce an accepted dataset.
class FeasibilityError : public Error {
 public:
  using Error::Error;
};

/// An invariant that the inputs should have guaranteed was broken.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nonoverlap
