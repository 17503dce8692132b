#pragma once

// Unified diff parsing (GNU and git dialects) and the line-anchoring
// predicates shared by the review service, resolution mining and evaluation.

#include <optional>
#include <string>
#include <string_view>

#include "revkit/error.hpp"
#include "revkit/model.hpp"

namespace revkit::diff {

/// Thrown for input that is not a unified diff. `line_number` is 1-based.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t line_number, const std::string& message)
        : Error(code, "line " + std::to_string(line_number) + ": " + message), line_number_(line_number)
    {
    }

    std::size_t line_number() const noexcept { return line_number_; }

private:
    std::size_t line_number_;
};

/// Parses unified diff text. Never aborts: invalid input raises ParseError
/// with code malformed_header or inconsistent_hunk_counts.
CodeChange parse_unified_diff(std::string_view text);

/// Canonical serialization. For any parsed input, serialize(parse(t)) == t.
std::string serialize(const CodeChange& change);

struct LineAnchor {
    std::string file_path;
    int line = 1;

    bool operator==(const LineAnchor&) const = default;
};

inline LineAnchor anchor_of(const ReviewComment& comment)
{
    return {comment.file_path, comment.line};
}

/// True iff some file's new_path equals the anchor path and the line falls
/// inside [new_start, new_start + new_count) of one of its hunks.
bool anchor_in_diff(const LineAnchor& anchor, const CodeChange& change);

inline constexpr int default_location_window = 10;

/// Same file path (byte comparison) and |a.line - b.line| <= window.
bool location_match(const ReviewComment& a, const ReviewComment& b, int window = default_location_window);

/// True iff `commit_diff` removes (or replaces) an old line of the anchored
/// file within `window` lines of the anchor. The diff must be expressed
/// against the file version the anchor refers to.
bool lines_touched(const CodeChange& commit_diff, const LineAnchor& anchor, int window = 0);

/// Where a line of the pre-commit file lands after `commit_diff` is applied.
/// Returns nullopt if the line was removed. Files absent from the diff keep
/// their numbering.
std::optional<int> map_line_forward(const CodeChange& commit_diff, std::string_view path, int line);

/// Nearest new-file line inside the hunk enclosing an old-file line, for
/// comments written against deleted code.
std::optional<int> nearest_new_line(const FileDiff& file, int old_line);

}  // namespace revkit::diff
