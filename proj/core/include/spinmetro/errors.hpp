#pragma once

#include <stdexcept>
#include <string>

namespace spinmetro {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// <J_x> vanishes, so squeezing parameters normalized by it are undefined.
class DegenerateOrientation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UndefinedKurtosis : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidAllocation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoRootError : public std::runtime_error {
 public:
  NoRootError(const std::string& what, double lo, double hi, int step = -1)
      : std::runtime_error(what), lo_(lo), hi_(hi), step_(step) {}
  double bracket_lo() const { return lo_; }
  double bracket_hi() const { return hi_; }
  // Schedule step (1-based) the failing solve belonged to, -1 if standalone.
  int step() const { return step_; }

 private:
  double lo_;
  double hi_;
  int step_;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spinmetro
