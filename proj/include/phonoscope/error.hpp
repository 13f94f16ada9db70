#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phonoscope {

enum class ErrorKind {
    // interchange
    MalformedHeader,
    TruncatedTier,
    NonMonotoneIntervals,
    MalformedTextGrid,
    MissingFile,
    MalformedFile,
    ManifestInvalid,
    RowCountMismatch,
    DimMismatch,
    OrphanToken,
    UnmappedRow,
    DuplicateRow,
    OverlappingClasses,
    EmptyClass,
    UnknownFeatureKey,
    IoError,
    // profiles
    NoHealthyControls,
    EmptyFeatureClass,
    DegenerateDirection,
    DegenerateVariance,
    // stats
    InvalidArgument,
    ConstantInput,
    TooFewPairs,
    EmptyGroup,
    TooFewGroups,
    TooFewObservations,
    DegeneratePooledSD,
    StatisticUndefinedOnResample,
    ZeroVector,
    SingularSystem,
    // analyses
    OutOfRange,
    InsufficientSeverityLevels,
    GroupTooSmall,
    NoQualifyingLanguagePair,
    NoSharedSpeakers,
    NoQualifyingSpeakers,
    SingleDataset,
    ClassAbsentFromAllTraining,
    MissingBaselineColumn,
    InsufficientData,
    // synth
    SpecInvalid,
    LedgerMismatch,
    // cli
    ConfigInvalid,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process-level grouping used by the CLI to pick an exit status.
enum class ErrorCategory { corpus, analysis, config };

ErrorCategory category(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace phonoscope
