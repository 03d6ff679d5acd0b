#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace overgen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record could not be parsed. `line()` is 1-based; 0 means unknown.
class ParseError : public Error {
public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path_(std::move(path)), line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

/// A value violates a documented invariant of its type.
class InvariantError : public Error {
public:
    InvariantError(std::string id, const std::string& what)
        : Error("invariant violated for '" + id + "': " + what), id_(std::move(id)) {}

    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::string id)
        : Error("duplicate id '" + id + "'"), id_(std::move(id)) {}

    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class SchemaVersionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Caller supplied arguments that break an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace overgen
