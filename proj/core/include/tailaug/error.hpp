#pragma once

#include <stdexcept>
#include <string>

namespace tailaug {

// Every failure raised by the library derives from Error so callers can
// catch one type at stage boundaries and still discriminate when needed.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::size_t row, std::string column)
        : Error(what), row_(row), column_(std::move(column)) {}
    explicit ValidationError(const std::string& what) : Error(what) {}

    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_ = 0;
    std::string column_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class CapabilityError : public Error {
public:
    using Error::Error;
};

class ContaminationError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}

    /// Unparsed payload that triggered the failure.
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

}  // namespace tailaug
