#ifndef SHAPING_ERRORS_HPP
#define SHAPING_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shaping {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (bad distribution, bad shape, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// All constellation points at the origin; power cannot be normalized.
class DegenerateConstellationError : public Error {
 public:
  using Error::Error;
};

// Least-squares system without full column rank.
class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

// Non-finite or unphysical intermediate result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace shaping

#endif  // SHAPING_ERRORS_HPP
