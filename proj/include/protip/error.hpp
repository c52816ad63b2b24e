#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protip {

enum class ErrorCode {
    InvalidInput,
    MethodInapplicable,
    ExhaustedPerturbations,
    NumericalFailure,
    OracleUnavailable,
    DegenerateSample,
    InsufficientSample,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::MethodInapplicable: return "MethodInapplicable";
        case ErrorCode::ExhaustedPerturbations: return "ExhaustedPerturbations";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::OracleUnavailable: return "OracleUnavailable";
        case ErrorCode::DegenerateSample: return "DegenerateSample";
        case ErrorCode::InsufficientSample: return "InsufficientSample";
    }
    return "Unknown";
}

#define PROTIP_REQUIRE(cond, code, msg)                      \
    do {                                                     \
        if (!(cond)) throw ::protip::Error((code), (msg));   \
    } while (0)

}  // namespace protip
