#pragma once

#include <stdexcept>
#include <string>

namespace seqpipe {

enum class ErrorCode {
    invalid_argument,
    invalid_spec,
    duplicate_name,
    not_found,
    cycle_detected,
    unknown_metric,
    unknown_token,
    source_unreadable,
    preprocessor_failure,
    partial_build_detected,
    dir_not_empty,
    index_mismatch,
    io_failure,
    corrupt_record,
    out_of_range,
    cache_missing,
    fingerprint_mismatch,
    indivisible_readers,
    missing_feature,
    negative_id,
    missing_predictions,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept
    {
        return code_;
    }

  private:
    ErrorCode code_;
};

} // namespace seqpipe
