#pragma once

// Turns raw generator output into anchored candidate comments.

#include <string>
#include <string_view>
#include <vector>

#include "revkit/model.hpp"

namespace revkit::generation {

inline constexpr int default_max_comments_per_pr = 5;

struct Discard {
    /// "grammar" or "anchor-out-of-diff".
    std::string reason;
    std::string detail;
    bool operator==(const Discard&) const = default;
};

struct ParseResult {
    std::vector<ReviewComment> candidates;
    std::vector<Discard> discards;
};

/// Reads the first fenced JSON array of {file_path, line, body, category}.
/// No fenced block, invalid JSON or a non-array payload is one grammar
/// discard; each bad record is its own discard. Comment ids are
/// `<id_prefix>-<n>` with n counting parsed records from 1.
ParseResult parse_candidates(std::string_view raw, const CodeChange& change, std::string_view id_prefix = "c");

/// One comment per (file_path, line), first emitted wins, then the first
/// `max_comments` survive.
std::vector<ReviewComment> dedupe(const std::vector<ReviewComment>& candidates,
                                  int max_comments = default_max_comments_per_pr);

}  // namespace revkit::generation
