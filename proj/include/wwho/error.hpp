#pragma once

#include <stdexcept>
#include <string>

namespace wwho {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (schema, tokenizer, rank file) or malformed text.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A loaded object violates a structural invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Training could not produce a model.
class TrainError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the operation's domain (id out of range, empty denominators).
class RangeError : public Error {
public:
    using Error::Error;
};

} // namespace wwho
