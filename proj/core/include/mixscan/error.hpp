#pragma once

#include <stdexcept>
#include <string>

namespace mixscan {

enum class ErrorCode {
    MalformedJson,
    MissingField,
    BadField,
    BadAmount,
    PrecisionExceeded,
    BadTxid,
    DuplicateTx,
    OutOfOrderHeight,
    DoubleSpend,
    UnknownOutpoint,
    RateGap,
    EmptyCorpus,
    SingleClassCorpus,
    Config,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedJson: return "MalformedJson";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::BadField: return "BadField";
        case ErrorCode::BadAmount: return "BadAmount";
        case ErrorCode::PrecisionExceeded: return "PrecisionExceeded";
        case ErrorCode::BadTxid: return "BadTxid";
        case ErrorCode::DuplicateTx: return "DuplicateTx";
        case ErrorCode::OutOfOrderHeight: return "OutOfOrderHeight";
        case ErrorCode::DoubleSpend: return "DoubleSpend";
        case ErrorCode::UnknownOutpoint: return "UnknownOutpoint";
        case ErrorCode::RateGap: return "RateGap";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::SingleClassCorpus: return "SingleClassCorpus";
        case ErrorCode::Config: return "Config";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace mixscan
