#pragma once

#include <stdexcept>
#include <string>

namespace vpmb {

/// A caller broke a documented precondition (dimension mismatch, bad weights, k = 0, ...).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// A matrix that must be positive definite or invertible was not.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Every completion of an assignment problem hits a forbidden pairing.
class InfeasibleAssignment : public std::runtime_error {
public:
    explicit InfeasibleAssignment(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vpmb
