#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace insomnet {

enum class ErrorCode {
    ParseError,
    ChannelNotFound,
    BadScaling,
    IoError,
    InvalidSignal,
    UnsupportedRate,
    InvalidSpec,
    NumericalError,
    TooShort,
    DegenerateSignal,
    AlignmentError,
    ConstantFeature,
    InsufficientData,
    NoFeaturesSelected,
    ShapeError,
    DegenerateDataset,
    NoData,
    IncompatibleModel,
    StageOrderError,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ChannelNotFound: return "ChannelNotFound";
    case ErrorCode::BadScaling: return "BadScaling";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidSignal: return "InvalidSignal";
    case ErrorCode::UnsupportedRate: return "UnsupportedRate";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::DegenerateSignal: return "DegenerateSignal";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::ConstantFeature: return "ConstantFeature";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoFeaturesSelected: return "NoFeaturesSelected";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DegenerateDataset: return "DegenerateDataset";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::IncompatibleModel: return "IncompatibleModel";
    case ErrorCode::StageOrderError: return "StageOrderError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can print a machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace insomnet
