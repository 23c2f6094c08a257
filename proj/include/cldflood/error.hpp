#pragma once

#include <stdexcept>
#include <string>

namespace cldflood {

/// Invalid user configuration or parameters that violate a precondition.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Query or input outside the domain on which an operation is defined.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or numerical blowup.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Programming-contract violation: mismatched shapes, stale caches.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed or unreadable files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cldflood
