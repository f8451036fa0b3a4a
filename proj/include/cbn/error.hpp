#ifndef CBN_ERROR_HPP
#define CBN_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cbn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: unknown ids, bad states, schema mismatch,
/// violated preconditions. The CLI maps these to the validation exit code.
class ValidationError : public Error {
public:
    using Error::Error;
};

class UnknownNode : public ValidationError {
public:
    explicit UnknownNode(const std::string& name)
        : ValidationError("unknown node '" + name + "'"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class CycleCreated : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConstraintViolated : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EdgeStateMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InfeasibleKnowledge : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Text input that does not follow its format. Carries 1-based line/column
/// when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : ValidationError(format(what, line, column)), line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        std::string s = what + " (line " + std::to_string(line);
        if (column != 0) s += ", column " + std::to_string(column);
        return s + ")";
    }
    std::size_t line_;
    std::size_t column_;
};

/// Evidence with probability zero under the network. Never turned into NaN or
/// a uniform fallback.
class ZeroProbabilityEvidence : public Error {
public:
    explicit ZeroProbabilityEvidence(const std::string& what,
                                     std::optional<std::size_t> record = std::nullopt)
        : Error(record ? what + " (record " + std::to_string(*record) + ")" : what),
          record_(record) {}
    std::optional<std::size_t> record() const noexcept { return record_; }

private:
    std::optional<std::size_t> record_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cbn

#endif  // CBN_ERROR_HPP
