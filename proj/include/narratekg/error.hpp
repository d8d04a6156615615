#pragma once

#include <stdexcept>
#include <string>

namespace narratekg {

// Root of every error the library raises. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Lookup of an event, entity, collection, ... that is not registered.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// Data violates a structural invariant (unknown type, dangling reference,
// cyclic taxonomy, ...). Carries the offending record line when known.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// A function was called outside its domain (e.g. role_of for a non-participant).
class DomainError : public Error {
public:
    using Error::Error;
};

// An API was used for the wrong kind of input (e.g. a subjective attribution
// passed to the objective path).
class MisuseError : public Error {
public:
    using Error::Error;
};

}  // namespace narratekg
