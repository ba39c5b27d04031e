#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pwsc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression or configuration text. `offset()` is a 0-based byte
/// offset into the parsed source.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Arithmetic outside the domain of an operation (sqrt of a negative number,
/// division by zero, overflow).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A root, equilibrium, bracket or crossing that was searched for is absent.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// A standing hypothesis of the model or of an analysis is violated.
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Integration could not reach the requested end point.
class IntegrationError : public Error {
public:
    using Error::Error;
};

}  // namespace pwsc
