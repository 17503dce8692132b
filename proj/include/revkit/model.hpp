#pragma once

// Shared domain types for the review engine. Everything here is a plain
// value type; nothing performs I/O.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace revkit {

using Timestamp = std::chrono::sys_seconds;

/// ISO-8601 UTC, second precision: "2025-07-10T09:30:00Z".
std::string format_timestamp(Timestamp ts);
/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SSZ" and the same with "+00:00".
Timestamp parse_timestamp(std::string_view text);

// ---------------------------------------------------------------------------
// Code change (unified diff model)

enum class LineKind { context, added, removed };

struct DiffLine {
    LineKind kind = LineKind::context;
    std::string text;
    /// Verbatim "\ No newline at end of file" marker following this line, if any.
    std::string eof_marker;

    bool operator==(const DiffLine&) const = default;
};

struct Hunk {
    int old_start = 0;
    int old_count = 0;
    int new_start = 0;
    int new_count = 0;
    std::vector<DiffLine> lines;
    /// Text following the closing "@@" (function context), verbatim.
    std::string section;
    /// "@@ -3 +3 @@" omits counts of 1; remembered for byte-exact output.
    bool old_count_omitted = false;
    bool new_count_omitted = false;

    /// Half-open range [new_start, new_start + new_count).
    int new_end() const { return new_start + new_count; }
    int old_end() const { return old_start + old_count; }

    bool operator==(const Hunk&) const = default;
};

struct FileDiff {
    /// Repository-relative, forward slashes. Empty when the side is /dev/null.
    std::string old_path;
    std::string new_path;
    /// Extended header lines verbatim ("diff --git", "index", modes, renames ...).
    std::vector<std::string> header_lines;
    /// Raw text after "--- " and "+++ "; empty when the file has no such lines.
    std::string old_label;
    std::string new_label;
    bool has_labels = false;
    bool binary = false;
    std::vector<Hunk> hunks;

    bool is_added() const { return old_path.empty() && !new_path.empty(); }
    bool is_deleted() const { return new_path.empty() && !old_path.empty(); }
    bool is_renamed() const { return !old_path.empty() && !new_path.empty() && old_path != new_path; }

    bool operator==(const FileDiff&) const = default;
};

struct CodeChange {
    /// Free text preceding the first file (commit message in format-patch output).
    std::vector<std::string> preamble;
    std::vector<FileDiff> files;
    /// Signature block after the last file ("-- " and what follows).
    std::vector<std::string> trailer;
    /// False when the input's last line had no newline terminator.
    bool final_newline = true;

    bool empty() const { return files.empty(); }
    const FileDiff* find_new_path(std::string_view path) const;
    const FileDiff* find_old_path(std::string_view path) const;

    bool operator==(const CodeChange&) const = default;
};

struct Violation {
    std::size_t file_index = 0;
    std::optional<std::size_t> hunk_index;
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Checks every CodeChange invariant. Violations are data; never throws.
std::vector<Violation> validate(const CodeChange& change);

// ---------------------------------------------------------------------------
// Pull request context

struct IssueSummary {
    std::string key;
    std::string summary;
    std::string description;

    bool operator==(const IssueSummary&) const = default;
};

struct PullRequestContext {
    std::string pr_id;
    std::string repo_id;
    std::string title;
    std::string description;
    std::string branch;
    std::vector<IssueSummary> issue_refs;
    CodeChange change;
    std::string source_commit;
    Timestamp created_at{};
    std::optional<Timestamp> merged_at;

    bool change_truncated = false;
    /// Set when a dependency was unreachable and context was assembled without it.
    bool degraded = false;
    std::vector<std::string> warnings;

    bool operator==(const PullRequestContext&) const = default;
};

/// Invariant messages for a context (title non-empty, merged_at >= created_at).
std::vector<std::string> validate(const PullRequestContext& ctx);

// ---------------------------------------------------------------------------
// Review comments

enum class Origin { generated, human };

enum class CommentState { candidate, fact_checked, gated, posted, rejected };

std::string_view to_string(Origin origin);
std::string_view to_string(CommentState state);
Origin parse_origin(std::string_view text);
CommentState parse_comment_state(std::string_view text);

/// Forward-only lifecycle: candidate -> fact_checked -> gated -> posted,
/// or -> rejected from any state before posted.
bool can_transition(CommentState from, CommentState to);

struct ReviewComment {
    std::string comment_id;
    Origin origin = Origin::generated;
    std::string file_path;
    int line = 1;
    std::string body;
    std::optional<std::string> category;
    CommentState state = CommentState::candidate;
    /// Identifier the code host assigned when the comment was posted.
    std::optional<std::string> host_comment_id;
    /// Free-form diagnostic (post failure, fail-open flag, ...).
    std::optional<std::string> note;

    bool operator==(const ReviewComment&) const = default;
};

/// Returns a copy moved to `to`; throws Error(invalid_transition) otherwise.
ReviewComment transition(const ReviewComment& comment, CommentState to);

std::vector<std::string> validate(const ReviewComment& comment);

// ---------------------------------------------------------------------------
// Prompt bundle

struct PromptBundle {
    std::optional<std::string> persona;
    std::string task;
    std::optional<std::string> chain_of_thought;
    std::optional<std::string> guidelines_code;
    std::optional<std::string> guidelines_test;
    std::optional<std::string> guidelines_comment;
    std::optional<std::string> pr_info;
    std::optional<std::string> issue_info;
    std::string code_change;

    bool operator==(const PromptBundle&) const = default;
};

// ---------------------------------------------------------------------------
// Resolution and alignment

enum class Verdict { resolved, unresolved, indeterminate };

std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view text);

struct ResolutionRecord {
    ReviewComment comment;
    std::string pr_id;
    Verdict verdict = Verdict::unresolved;
    std::optional<std::string> resolving_commit;
    Timestamp observed_at{};

    bool operator==(const ResolutionRecord&) const = default;
};

std::vector<std::string> validate(const ResolutionRecord& record);

struct AlignmentVerdict {
    ReviewComment generated;
    std::optional<ReviewComment> matched_human;
    bool location_match = false;
    std::optional<int> similarity_score;
    bool aligned = false;

    bool operator==(const AlignmentVerdict&) const = default;
};

std::vector<std::string> validate(const AlignmentVerdict& verdict);

}  // namespace revkit
