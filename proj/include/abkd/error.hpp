#pragma once

#include <stdexcept>
#include <string>

namespace abkd {

// Error taxonomy shared by the whole library. The CLI maps categories to
// exit codes, so every throw site picks the category deliberately.
enum class ErrorCategory {
    InvalidInput,     // malformed data handed to an operation (bad simplex, NaN logit)
    InvalidParameter, // out-of-range knob (temperature <= 0, alpha at a forbidden value)
    NumericOverflow,  // an intermediate blew past the representable budget
    Configuration,    // unsatisfiable or inconsistent run configuration
    DataFormat,       // malformed persisted data (CSV/JSON)
    TrainingFailure,  // NaN loss or divergence during optimization
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::InvalidInput: return "invalid-input";
        case ErrorCategory::InvalidParameter: return "invalid-parameter";
        case ErrorCategory::NumericOverflow: return "numeric-overflow";
        case ErrorCategory::Configuration: return "configuration";
        case ErrorCategory::DataFormat: return "data-format";
        case ErrorCategory::TrainingFailure: return "training-failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct InputError : Error {
    explicit InputError(const std::string& m) : Error(ErrorCategory::InvalidInput, m) {}
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& m) : Error(ErrorCategory::InvalidParameter, m) {}
};

struct OverflowError : Error {
    explicit OverflowError(const std::string& m) : Error(ErrorCategory::NumericOverflow, m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorCategory::Configuration, m) {}
};

struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorCategory::DataFormat, m) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& m) : Error(ErrorCategory::TrainingFailure, m) {}
};

} // namespace abkd
