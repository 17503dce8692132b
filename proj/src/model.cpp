#include "revkit/model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "revkit/error.hpp"

namespace revkit {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::malformed_header: return "malformed-header";
    case ErrorCode::inconsistent_hunk_counts: return "inconsistent-hunk-counts";
    case ErrorCode::repo_unavailable: return "repo-unavailable";
    case ErrorCode::pr_not_found: return "pr-not-found";
    case ErrorCode::issue_fetch_failed: return "issue-fetch-failed";
    case ErrorCode::backend_unreachable: return "backend-unreachable";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::unparseable_judge_output: return "unparseable-judge-output";
    case ErrorCode::classifier_unavailable: return "classifier-unavailable";
    case ErrorCode::empty_after_filtering: return "empty-after-filtering";
    case ErrorCode::degenerate_input: return "degenerate-input";
    case ErrorCode::rank_deficient: return "rank-deficient";
    case ErrorCode::undefined_statistic: return "undefined";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_transition: return "invalid-transition";
    case ErrorCode::store_failure: return "store-failure";
    case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len)
{
    if (pos + len > text.size())
        throw Error(ErrorCode::invalid_argument, "truncated timestamp: " + std::string(text));
    int value = 0;
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc() || ptr != first + len)
        throw Error(ErrorCode::invalid_argument, "bad timestamp: " + std::string(text));
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c)
{
    if (pos >= text.size() || text[pos] != c)
        throw Error(ErrorCode::invalid_argument, "bad timestamp: " + std::string(text));
}

}  // namespace

std::string format_timestamp(Timestamp ts)
{
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const hh_mm_ss hms{ts - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

Timestamp parse_timestamp(std::string_view text)
{
    using namespace std::chrono;
    const int y = parse_fixed(text, 0, 4);
    expect_char(text, 4, '-');
    const int mo = parse_fixed(text, 5, 2);
    expect_char(text, 7, '-');
    const int d = parse_fixed(text, 8, 2);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw Error(ErrorCode::invalid_argument, "invalid date: " + std::string(text));
    sys_seconds result{sys_days{ymd}};
    if (text.size() == 10)
        return result;
    if (text[10] != 'T' && text[10] != ' ')
        throw Error(ErrorCode::invalid_argument, "bad timestamp: " + std::string(text));
    const int h = parse_fixed(text, 11, 2);
    expect_char(text, 13, ':');
    const int mi = parse_fixed(text, 14, 2);
    expect_char(text, 16, ':');
    const int s = parse_fixed(text, 17, 2);
    if (h > 23 || mi > 59 || s > 60)
        throw Error(ErrorCode::invalid_argument, "invalid time: " + std::string(text));
    const auto rest = text.substr(19);
    if (rest != "Z" && rest != "+00:00" && !rest.empty())
        throw Error(ErrorCode::invalid_argument, "only UTC timestamps are accepted: " + std::string(text));
    return result + hours{h} + minutes{mi} + seconds{s};
}

const FileDiff* CodeChange::find_new_path(std::string_view path) const
{
    auto it = std::find_if(files.begin(), files.end(), [&](const FileDiff& f) { return f.new_path == path; });
    return it == files.end() ? nullptr : &*it;
}

const FileDiff* CodeChange::find_old_path(std::string_view path) const
{
    auto it = std::find_if(files.begin(), files.end(), [&](const FileDiff& f) { return f.old_path == path; });
    return it == files.end() ? nullptr : &*it;
}

std::vector<Violation> validate(const CodeChange& change)
{
    std::vector<Violation> out;
    for (std::size_t fi = 0; fi < change.files.size(); ++fi) {
        const auto& file = change.files[fi];
        if (file.old_path.empty() && file.new_path.empty())
            out.push_back({fi, std::nullopt, "file has neither an old nor a new path"});
        for (std::size_t hi = 0; hi < file.hunks.size(); ++hi) {
            const auto& h = file.hunks[hi];
            const auto name = "hunk @@ -" + std::to_string(h.old_start) + "," + std::to_string(h.old_count) +
                              " +" + std::to_string(h.new_start) + "," + std::to_string(h.new_count) + " @@";
            int old_lines = 0;
            int new_lines = 0;
            for (const auto& l : h.lines) {
                if (l.kind != LineKind::added)
                    ++old_lines;
                if (l.kind != LineKind::removed)
                    ++new_lines;
            }
            if (h.old_count < 0 || h.new_count < 0)
                out.push_back({fi, hi, name + ": negative count"});
            if (new_lines != h.new_count)
                out.push_back({fi, hi,
                               name + ": new_count " + std::to_string(h.new_count) + " but " +
                                   std::to_string(new_lines) + " added+context lines"});
            if (old_lines != h.old_count)
                out.push_back({fi, hi,
                               name + ": old_count " + std::to_string(h.old_count) + " but " +
                                   std::to_string(old_lines) + " removed+context lines"});
            // A zero-length range names the line before it, which may be 0.
            if ((h.new_count > 0 && h.new_start < 1) || h.new_start < 0)
                out.push_back({fi, hi, name + ": new_start must be a positive line number"});
            if ((h.old_count > 0 && h.old_start < 1) || h.old_start < 0)
                out.push_back({fi, hi, name + ": old_start must be a positive line number"});
            if (hi > 0) {
                const auto& prev = file.hunks[hi - 1];
                if (h.new_start < prev.new_start || h.new_start < prev.new_end())
                    out.push_back({fi, hi, name + ": overlaps or precedes the previous hunk"});
            }
        }
    }
    return out;
}

std::vector<std::string> validate(const PullRequestContext& ctx)
{
    std::vector<std::string> out;
    if (ctx.title.empty())
        out.emplace_back("title is empty");
    if (ctx.merged_at && *ctx.merged_at < ctx.created_at)
        out.emplace_back("merged_at precedes created_at");
    for (const auto& issue : ctx.issue_refs)
        if (issue.key.empty())
            out.emplace_back("issue with empty key");
    for (auto& v : validate(ctx.change))
        out.push_back(std::move(v.message));
    return out;
}

std::string_view to_string(Origin origin)
{
    return origin == Origin::generated ? "generated" : "human";
}

std::string_view to_string(CommentState state)
{
    switch (state) {
    case CommentState::candidate: return "candidate";
    case CommentState::fact_checked: return "fact_checked";
    case CommentState::gated: return "gated";
    case CommentState::posted: return "posted";
    case CommentState::rejected: return "rejected";
    }
    return "candidate";
}

Origin parse_origin(std::string_view text)
{
    if (text == "generated")
        return Origin::generated;
    if (text == "human")
        return Origin::human;
    throw Error(ErrorCode::invalid_argument, "unknown origin: " + std::string(text));
}

CommentState parse_comment_state(std::string_view text)
{
    for (auto s : {CommentState::candidate, CommentState::fact_checked, CommentState::gated, CommentState::posted,
                   CommentState::rejected})
        if (to_string(s) == text)
            return s;
    throw Error(ErrorCode::invalid_argument, "unknown comment state: " + std::string(text));
}

bool can_transition(CommentState from, CommentState to)
{
    switch (from) {
    case CommentState::candidate:
        return to == CommentState::fact_checked || to == CommentState::rejected;
    case CommentState::fact_checked:
        return to == CommentState::gated || to == CommentState::rejected;
    case CommentState::gated:
        return to == CommentState::posted || to == CommentState::rejected;
    case CommentState::posted:
    case CommentState::rejected:
        return false;
    }
    return false;
}

ReviewComment transition(const ReviewComment& comment, CommentState to)
{
    if (!can_transition(comment.state, to))
        throw Error(ErrorCode::invalid_transition, comment.comment_id + ": " + std::string(to_string(comment.state)) +
                                                       " -> " + std::string(to_string(to)));
    ReviewComment next = comment;
    next.state = to;
    return next;
}

std::vector<std::string> validate(const ReviewComment& comment)
{
    std::vector<std::string> out;
    if (comment.body.empty())
        out.emplace_back("body is empty");
    if (comment.line < 1)
        out.emplace_back("line must be >= 1");
    if (comment.file_path.empty())
        out.emplace_back("file_path is empty");
    if (comment.file_path.find('\\') != std::string::npos)
        out.emplace_back("file_path must use forward slashes");
    return out;
}

std::string_view to_string(Verdict verdict)
{
    switch (verdict) {
    case Verdict::resolved: return "resolved";
    case Verdict::unresolved: return "unresolved";
    case Verdict::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

Verdict parse_verdict(std::string_view text)
{
    for (auto v : {Verdict::resolved, Verdict::unresolved, Verdict::indeterminate})
        if (to_string(v) == text)
            return v;
    throw Error(ErrorCode::invalid_argument, "unknown verdict: " + std::string(text));
}

std::vector<std::string> validate(const ResolutionRecord& record)
{
    std::vector<std::string> out;
    if ((record.verdict == Verdict::resolved) != record.resolving_commit.has_value())
        out.emplace_back("resolving_commit must be present exactly when verdict is resolved");
    return out;
}

std::vector<std::string> validate(const AlignmentVerdict& verdict)
{
    std::vector<std::string> out;
    if (verdict.aligned && !(verdict.location_match && verdict.similarity_score && *verdict.similarity_score >= 3))
        out.emplace_back("aligned requires a location match and a similarity score of 3 or 4");
    if (verdict.location_match && !verdict.matched_human)
        out.emplace_back("location_match requires matched_human");
    if (verdict.similarity_score && (*verdict.similarity_score < 1 || *verdict.similarity_score > 4))
        out.emplace_back("similarity_score outside 1..4");
    return out;
}

}  // namespace revkit
