#include "revkit/resolution.hpp"

#include <map>

#include "revkit/diff.hpp"

namespace revkit::resolution {

namespace {

const FileDiff* find_old(const CodeChange& change, const std::string& path)
{
    for (const auto& f : change.files)
        if (f.old_path == path)
            return &f;
    return nullptr;
}

}  // namespace

std::vector<ResolutionRecord> track(const PullRequestContext& pr, const std::vector<ReviewComment>& comments,
                                    const std::vector<SubsequentCommit>& commits, const TrackConfig& config)
{
    if (config.window < 0)
        throw Error(ErrorCode::invalid_argument, "window must be non-negative");

    Timestamp fallback_time = pr.merged_at.value_or(pr.created_at);
    if (!commits.empty())
        fallback_time = commits.back().committed_at;

    std::vector<ResolutionRecord> out;
    for (const auto& c : comments) {
        ResolutionRecord r;
        r.comment = c;
        r.pr_id = pr.pr_id;
        r.verdict = Verdict::unresolved;
        r.observed_at = fallback_time;
        if (config.history_rewritten) {
            r.verdict = Verdict::indeterminate;
            out.push_back(std::move(r));
            continue;
        }

        std::string path = c.file_path;
        int line = c.line;
        for (const auto& commit : commits) {
            const FileDiff* f = find_old(commit.change, path);
            if (!f)
                continue;
            if (f->is_deleted()) {
                r.verdict = Verdict::indeterminate;
                r.observed_at = commit.committed_at;
                break;
            }
            if (diff::lines_touched(commit.change, {path, line}, config.window)) {
                r.verdict = Verdict::resolved;
                r.resolving_commit = commit.id;
                r.observed_at = commit.committed_at;
                break;
            }
            if (f->is_renamed()) {
                r.verdict = Verdict::indeterminate;
                r.observed_at = commit.committed_at;
                break;
            }
            auto mapped = diff::map_line_forward(commit.change, path, line);
            if (!mapped) {
                r.verdict = Verdict::indeterminate;
                r.observed_at = commit.committed_at;
                break;
            }
            line = *mapped;
        }
        out.push_back(std::move(r));
    }
    return out;
}

History load_history(const context::GitRepository& repo, const std::string& source_commit, const std::string& head)
{
    History h;
    if (!repo.has_commit(source_commit)) {
        h.history_rewritten = true;
        return h;
    }
    for (const auto& id : repo.commits_between(source_commit, head)) {
        SubsequentCommit c;
        c.id = id;
        c.change = diff::parse_unified_diff(repo.diff(repo.first_parent(id), id));
        c.committed_at = repo.commit_time(id);
        h.commits.push_back(std::move(c));
    }
    return h;
}

double crr(const std::vector<ResolutionRecord>& records, std::optional<Origin> origin)
{
    long resolved = 0;
    long total = 0;
    for (const auto& r : records) {
        if (origin && r.comment.origin != *origin)
            continue;
        if (r.verdict == Verdict::indeterminate)
            continue;
        ++total;
        if (r.verdict == Verdict::resolved)
            ++resolved;
    }
    if (total == 0)
        throw Error(ErrorCode::empty_after_filtering, "no determinate records to compute a resolution rate");
    return static_cast<double>(resolved) / static_cast<double>(total);
}

std::vector<RollingPoint> rolling_crr(const std::vector<ResolutionRecord>& records, int window_days,
                                      std::optional<Origin> origin)
{
    if (window_days < 1)
        throw Error(ErrorCode::invalid_argument, "window must be at least one day");
    std::map<std::chrono::sys_days, std::pair<int, int>> daily;  // resolved, total
    for (const auto& r : records) {
        if (origin && r.comment.origin != *origin)
            continue;
        if (r.verdict == Verdict::indeterminate)
            continue;
        auto& [res, tot] = daily[std::chrono::floor<std::chrono::days>(r.observed_at)];
        ++tot;
        if (r.verdict == Verdict::resolved)
            ++res;
    }
    std::vector<RollingPoint> out;
    for (auto it = daily.begin(); it != daily.end(); ++it) {
        const auto day = it->first;
        const auto first = day - std::chrono::days(window_days - 1);
        int res = 0;
        int tot = 0;
        for (auto jt = daily.lower_bound(first); jt != std::next(it); ++jt) {
            res += jt->second.first;
            tot += jt->second.second;
        }
        out.push_back({day, static_cast<double>(res) / tot, res, tot});
    }
    return out;
}

}  // namespace revkit::resolution
