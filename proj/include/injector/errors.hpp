#pragma once

#include <stdexcept>
#include <string>

namespace injector {

// Mismatched tensor extents, bad reshapes, non-vector/matrix arguments.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Out-of-range token/attribute/class ids.
class VocabularyError : public std::runtime_error {
public:
    explicit VocabularyError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration values (dimension divisibility, rates, split sizes).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Violated call contracts (non-scalar output where a scalar is required, etc.).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Input files that cannot be parsed.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged or produced non-finite values.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A requested model would exceed the configured parameter-memory budget.
class AllocationBudgetError : public std::runtime_error {
public:
    explicit AllocationBudgetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace injector
