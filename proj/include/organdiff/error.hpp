#pragma once

#include <stdexcept>
#include <string>

namespace organdiff {

// Error categories map onto CLI exit codes (usage 1, data 2, numeric 3).
enum class ErrorKind { Usage, Data, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Malformed input file. Carries the 1-based line (text formats) or byte offset (binary formats).
class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t location, bool is_line, const std::string& msg)
        : DataError(path + (is_line ? ":" + std::to_string(location) : "@" + std::to_string(location)) + ": " + msg),
          location_(location) {}
    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

class EmptyMeshError : public DataError {
public:
    explicit EmptyMeshError(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace organdiff
