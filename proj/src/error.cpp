#include "phonoscope/error.hpp"

namespace phonoscope {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::TruncatedTier: return "TruncatedTier";
    case ErrorKind::NonMonotoneIntervals: return "NonMonotoneIntervals";
    case ErrorKind::MalformedTextGrid: return "MalformedTextGrid";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::ManifestInvalid: return "ManifestInvalid";
    case ErrorKind::RowCountMismatch: return "RowCountMismatch";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::OrphanToken: return "OrphanToken";
    case ErrorKind::UnmappedRow: return "UnmappedRow";
    case ErrorKind::DuplicateRow: return "DuplicateRow";
    case ErrorKind::OverlappingClasses: return "OverlappingClasses";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::UnknownFeatureKey: return "UnknownFeatureKey";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NoHealthyControls: return "NoHealthyControls";
    case ErrorKind::EmptyFeatureClass: return "EmptyFeatureClass";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::TooFewGroups: return "TooFewGroups";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::DegeneratePooledSD: return "DegeneratePooledSD";
    case ErrorKind::StatisticUndefinedOnResample: return "StatisticUndefinedOnResample";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InsufficientSeverityLevels: return "InsufficientSeverityLevels";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::NoQualifyingLanguagePair: return "NoQualifyingLanguagePair";
    case ErrorKind::NoSharedSpeakers: return "NoSharedSpeakers";
    case ErrorKind::NoQualifyingSpeakers: return "NoQualifyingSpeakers";
    case ErrorKind::SingleDataset: return "SingleDataset";
    case ErrorKind::ClassAbsentFromAllTraining: return "ClassAbsentFromAllTraining";
    case ErrorKind::MissingBaselineColumn: return "MissingBaselineColumn";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SpecInvalid: return "SpecInvalid";
    case ErrorKind::LedgerMismatch: return "LedgerMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

ErrorCategory category(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::MalformedHeader:
    case ErrorKind::TruncatedTier:
    case ErrorKind::NonMonotoneIntervals:
    case ErrorKind::MalformedTextGrid:
    case ErrorKind::MissingFile:
    case ErrorKind::MalformedFile:
    case ErrorKind::ManifestInvalid:
    case ErrorKind::RowCountMismatch:
    case ErrorKind::DimMismatch:
    case ErrorKind::OrphanToken:
    case ErrorKind::UnmappedRow:
    case ErrorKind::DuplicateRow:
    case ErrorKind::IoError:
        return ErrorCategory::corpus;
    case ErrorKind::OverlappingClasses:
    case ErrorKind::EmptyClass:
    case ErrorKind::UnknownFeatureKey:
    case ErrorKind::SpecInvalid:
    case ErrorKind::ConfigInvalid:
        return ErrorCategory::config;
    default:
        return ErrorCategory::analysis;
    }
}

} // namespace phonoscope
