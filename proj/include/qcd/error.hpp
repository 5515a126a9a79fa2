#pragma once

#include <stdexcept>
#include <string>

namespace qcd {

// Base of everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameters, malformed specs, contract violations.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Evaluation outside a model's support (tabulated grids).
class OutOfDomain : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace qcd
