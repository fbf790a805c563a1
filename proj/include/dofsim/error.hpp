// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DOFSIM_ERROR_HPP
#define DOFSIM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dofsim {

enum class ErrorCode {
    DimensionMismatch,
    NonFiniteValue,
    NonPositiveDepth,
    OddDimensions,
    QuantizedDomain,
    SingularCcm,
    EvenKernel,
    NonOddKernel,
    WeightStackMismatch,
    ImageTooLarge,
    ImageTooSmall,
    MalformedHeader,
    NormalizationOutOfRange,
    SigmaOutOfRange,
    IsoOutOfRange,
    NegativeVariance,
    DegenerateRange,
    PatchOutOfBounds,
    CropLargerThanImage,
    MalformedShard,
    ConfigHashMismatch,
    EmptyDataset,
    InvalidArgument,
    IoError,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::DimensionMismatch:       return "DimensionMismatch";
    case ErrorCode::NonFiniteValue:          return "NonFiniteValue";
    case ErrorCode::NonPositiveDepth:        return "NonPositiveDepth";
    case ErrorCode::OddDimensions:           return "OddDimensions";
    case ErrorCode::QuantizedDomain:         return "QuantizedDomain";
    case ErrorCode::SingularCcm:             return "SingularCcm";
    case ErrorCode::EvenKernel:              return "EvenKernel";
    case ErrorCode::NonOddKernel:            return "NonOddKernel";
    case ErrorCode::WeightStackMismatch:     return "WeightStackMismatch";
    case ErrorCode::ImageTooLarge:           return "ImageTooLarge";
    case ErrorCode::ImageTooSmall:           return "ImageTooSmall";
    case ErrorCode::MalformedHeader:         return "MalformedHeader";
    case ErrorCode::NormalizationOutOfRange: return "NormalizationOutOfRange";
    case ErrorCode::SigmaOutOfRange:         return "SigmaOutOfRange";
    case ErrorCode::IsoOutOfRange:           return "IsoOutOfRange";
    case ErrorCode::NegativeVariance:        return "NegativeVariance";
    case ErrorCode::DegenerateRange:         return "DegenerateRange";
    case ErrorCode::PatchOutOfBounds:        return "PatchOutOfBounds";
    case ErrorCode::CropLargerThanImage:     return "CropLargerThanImage";
    case ErrorCode::MalformedShard:          return "MalformedShard";
    case ErrorCode::ConfigHashMismatch:      return "ConfigHashMismatch";
    case ErrorCode::EmptyDataset:            return "EmptyDataset";
    case ErrorCode::InvalidArgument:         return "InvalidArgument";
    case ErrorCode::IoError:                 return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition)
        fail(code, message);
}

}  // namespace dofsim

#endif  // DOFSIM_ERROR_HPP
