#include "seqpipe/error.hpp"

namespace seqpipe {

const char* error_code_name(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::invalid_argument:
        return "InvalidArgument";
    case ErrorCode::invalid_spec:
        return "InvalidSpec";
    case ErrorCode::duplicate_name:
        return "DuplicateName";
    case ErrorCode::not_found:
        return "NotFound";
    case ErrorCode::cycle_detected:
        return "CycleDetected";
    case ErrorCode::unknown_metric:
        return "UnknownMetric";
    case ErrorCode::unknown_token:
        return "UnknownToken";
    case ErrorCode::source_unreadable:
        return "SourceUnreadable";
    case ErrorCode::preprocessor_failure:
        return "PreprocessorFailure";
    case ErrorCode::partial_build_detected:
        return "PartialBuildDetected";
    case ErrorCode::dir_not_empty:
        return "DirNotEmpty";
    case ErrorCode::index_mismatch:
        return "IndexMismatch";
    case ErrorCode::io_failure:
        return "IoFailure";
    case ErrorCode::corrupt_record:
        return "CorruptRecord";
    case ErrorCode::out_of_range:
        return "OutOfRange";
    case ErrorCode::cache_missing:
        return "CacheMissing";
    case ErrorCode::fingerprint_mismatch:
        return "FingerprintMismatch";
    case ErrorCode::indivisible_readers:
        return "IndivisibleReaders";
    case ErrorCode::missing_feature:
        return "MissingFeature";
    case ErrorCode::negative_id:
        return "NegativeId";
    case ErrorCode::missing_predictions:
        return "MissingPredictions";
    }
    return "UnknownError";
}

} // namespace seqpipe
