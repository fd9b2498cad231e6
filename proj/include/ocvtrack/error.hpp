#pragma once

#include <stdexcept>
#include <string>

namespace ocvtrack {

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorKind {
    Internal = 1,
    MissingInput = 2,
    Config = 3,
    Data = 4,
    InsufficientData = 5,
    Domain = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class MissingInput : public Error {
public:
    explicit MissingInput(const std::string& path)
        : Error(ErrorKind::MissingInput, "input not found: " + path) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& what) : Error(ErrorKind::InsufficientData, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

}  // namespace ocvtrack
