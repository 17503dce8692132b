#pragma once

// Labels posted comments resolved / unresolved from the commits that
// follow the reviewed revision, and aggregates code resolution rates.

#include <optional>
#include <string>
#include <vector>

#include "revkit/context.hpp"
#include "revkit/model.hpp"

namespace revkit::resolution {

struct SubsequentCommit {
    std::string id;
    CodeChange change;
    Timestamp committed_at{};
};

struct TrackConfig {
    /// Lines either side of the anchor that count as touching it.
    int window = 0;
    /// The branch was force-pushed past the reviewed revision.
    bool history_rewritten = false;
};

/// A comment is resolved by the first commit whose diff removes or rewrites
/// a line within `window` of the anchor. Commits that leave the anchor
/// alone carry it forward to its new line number. A rename or delete of the
/// file before any touch, or rewritten history, gives indeterminate.
///
/// observed_at: the resolving commit's time, else the last commit's time,
/// else merged_at, else created_at.
std::vector<ResolutionRecord> track(const PullRequestContext& pr, const std::vector<ReviewComment>& comments,
                                    const std::vector<SubsequentCommit>& commits, const TrackConfig& config = {});

/// Commits after pr.source_commit up to `head`, oldest first, each diffed
/// against its first parent. history_rewritten is set when the reviewed
/// revision is no longer reachable.
struct History {
    std::vector<SubsequentCommit> commits;
    bool history_rewritten = false;
};
History load_history(const context::GitRepository& repo, const std::string& source_commit, const std::string& head);

/// resolved / (resolved + unresolved) over records of the given origin
/// (all origins when unset). Throws Error(empty_after_filtering).
double crr(const std::vector<ResolutionRecord>& records, std::optional<Origin> origin = std::nullopt);

struct RollingPoint {
    std::chrono::sys_days day;
    double crr = 0.0;
    int resolved = 0;
    int total = 0;
    bool operator==(const RollingPoint&) const = default;
};

/// One point per calendar day (UTC) that has at least one determinate
/// record: pooled CRR over records observed in [day - (window_days - 1), day].
std::vector<RollingPoint> rolling_crr(const std::vector<ResolutionRecord>& records, int window_days = 7,
                                      std::optional<Origin> origin = std::nullopt);

}  // namespace revkit::resolution
