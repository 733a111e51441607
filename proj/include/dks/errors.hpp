#pragma once

#include <stdexcept>
#include <string>

namespace dks {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on a numeric argument was violated (|c| > 1, q <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The integrand produced NaN or infinity at a quadrature node.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double node)
      : Error(what), node_(node) {}
  double node() const { return node_; }

 private:
  double node_;
};

class UnknownActivationError : public Error {
 public:
  using Error::Error;
};

// phi(alpha x + beta) has zero variance under the standard normal.
class DegenerateActivationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace dks
