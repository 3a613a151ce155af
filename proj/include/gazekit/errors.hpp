#pragma once

#include <stdexcept>
#include <string>

namespace gazekit {

// Error taxonomy; the C API maps each class to a status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be opened / read / written.
class IoError : public Error {
public:
    using Error::Error;
};

// Input text does not conform to the expected schema.
class ParseError : public Error {
public:
    using Error::Error;
};

// Input is well-formed but violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A function argument is outside its contract.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace gazekit
