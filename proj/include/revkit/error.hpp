#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace revkit {

enum class ErrorCode {
    malformed_header,
    inconsistent_hunk_counts,
    repo_unavailable,
    pr_not_found,
    issue_fetch_failed,
    backend_unreachable,
    budget_exceeded,
    unparseable_judge_output,
    classifier_unavailable,
    empty_after_filtering,
    degenerate_input,
    rank_deficient,
    undefined_statistic,
    invalid_argument,
    invalid_transition,
    store_failure,
    config_error,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. The code is stable and mapped to CLI exit codes.
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

}  // namespace revkit
