#pragma once

#include <stdexcept>
#include <string>

namespace radpose {

// Precondition or invariant violated by an input value.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A bounded resource (voxel budget, placement retries) was exhausted.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Geometric configuration is rank deficient (collinear, coplanar, ...).
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be read, written or parsed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace radpose
