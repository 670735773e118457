#pragma once

#include <stdexcept>
#include <string>

namespace narrative {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition breach on caller-supplied data (bad ids, out-of-range k, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of an operation (zero-sum profile, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace narrative
