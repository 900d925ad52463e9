#ifndef PHOTHERM_ERRORS_HPP
#define PHOTHERM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace photherm {

/// Argument outside the mathematical domain of an operation (e.g. a
/// non-positive energy handed to the Planck factor).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// A constructed object would violate one of its type invariants.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Scenario is missing a parameter that the requested branch needs.
class ConfigurationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An exciton transition sits exactly on a cavity mode energy.
class SingularityError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Caller broke an ordering or sizing contract.
class ContractError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Iterative numerics failed (step underflow, Newton divergence, ...).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class StiffnessError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

} // namespace photherm

#endif // PHOTHERM_ERRORS_HPP
