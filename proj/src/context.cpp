#include "revkit/context.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <regex>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "revkit/diff.hpp"
#include "revkit/error.hpp"
#include "revkit/model_json.hpp"

namespace revkit::context {

using nlohmann::json;

void validate(const ContextBudget& budget)
{
    if (budget.max_diff_bytes == 0 || budget.max_description_bytes == 0 || budget.max_issue_bytes == 0)
        throw Error(ErrorCode::invalid_argument, "context budgets must be positive");
}

namespace {

// Largest prefix length <= n that does not end inside a UTF-8 sequence.
std::size_t utf8_floor(std::string_view text, std::size_t n)
{
    if (n >= text.size())
        return text.size();
    while (n > 0 && (static_cast<unsigned char>(text[n]) & 0xC0) == 0x80)
        --n;
    return n;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::invalid_argument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += '\'';
    return out;
}

std::string render_file(const FileDiff& f)
{
    if (f.binary) {
        const auto& path = f.new_path.empty() ? f.old_path : f.new_path;
        return "Binary file " + path + " changed (contents omitted)\n";
    }
    CodeChange single;
    single.files.push_back(f);
    return diff::serialize(single);
}

}  // namespace

std::string truncate_text(std::string_view text, std::size_t max_bytes)
{
    if (text.size() <= max_bytes)
        return std::string(text);
    if (max_bytes <= truncation_marker.size())
        return std::string(truncation_marker.substr(0, max_bytes));
    const auto keep = utf8_floor(text, max_bytes - truncation_marker.size());
    return std::string(text.substr(0, keep)) + std::string(truncation_marker);
}

std::vector<std::string> detect_issue_keys(const std::vector<std::string_view>& sources)
{
    static const std::regex key_pattern("[A-Z][A-Z0-9]+-[0-9]+");
    std::vector<std::string> keys;
    for (auto source : sources) {
        for (std::cregex_iterator it(source.data(), source.data() + source.size(), key_pattern), end; it != end;
             ++it) {
            auto key = it->str();
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                keys.push_back(std::move(key));
        }
    }
    return keys;
}

std::string render_code_change(const CodeChange& change, bool truncated)
{
    std::string out;
    for (const auto& f : change.files)
        out += render_file(f);
    if (truncated)
        out += diff_truncation_marker;
    return out;
}

TruncatedChange truncate_change(const CodeChange& change, std::size_t max_bytes)
{
    if (render_code_change(change, false).size() <= max_bytes)
        return {change, false};

    TruncatedChange result;
    result.truncated = true;
    std::size_t used = diff_truncation_marker.size();
    for (const auto& f : change.files) {
        FileDiff kept = f;
        kept.hunks.clear();
        if (f.hunks.empty()) {
            auto size = render_file(kept).size();
            if (used + size > max_bytes)
                return result;
            used += size;
            result.change.files.push_back(std::move(kept));
            continue;
        }
        std::size_t file_used = render_file(kept).size();
        bool stop = false;
        for (const auto& h : f.hunks) {
            kept.hunks.push_back(h);
            auto size = render_file(kept).size();
            if (used + size > max_bytes) {
                kept.hunks.pop_back();
                stop = true;
                break;
            }
            file_used = size;
        }
        if (!kept.hunks.empty()) {
            used += file_used;
            result.change.files.push_back(std::move(kept));
        }
        if (stop)
            return result;
    }
    return result;
}

// ---------------------------------------------------------------------------

void InMemoryCodeHost::add_pull_request(PullRequestMetadata pr)
{
    std::lock_guard lock(mutex_);
    auto id = pr.pr_id;
    prs_[id] = std::move(pr);
}

void InMemoryCodeHost::set_reachable(bool reachable)
{
    std::lock_guard lock(mutex_);
    reachable_ = reachable;
}

void InMemoryCodeHost::reject_anchor(std::string path, int line)
{
    std::lock_guard lock(mutex_);
    rejected_.emplace(std::move(path), line);
}

PullRequestMetadata InMemoryCodeHost::fetch_pull_request(const std::string& pr_id)
{
    std::lock_guard lock(mutex_);
    calls_.push_back("fetch_pull_request " + pr_id);
    if (!reachable_)
        throw Error(ErrorCode::backend_unreachable, "code host unreachable");
    auto it = prs_.find(pr_id);
    if (it == prs_.end())
        throw Error(ErrorCode::pr_not_found, pr_id);
    return it->second;
}

std::string InMemoryCodeHost::post_comment(const std::string& pr_id, const ReviewComment& comment)
{
    std::lock_guard lock(mutex_);
    calls_.push_back("post_comment " + pr_id + " " + comment.file_path + ":" + std::to_string(comment.line));
    if (!reachable_)
        throw Error(ErrorCode::backend_unreachable, "code host unreachable");
    if (rejected_.count({comment.file_path, comment.line}))
        throw Error(ErrorCode::invalid_argument,
                    "host rejected anchor " + comment.file_path + ":" + std::to_string(comment.line));
    auto n = std::count_if(posted_.begin(), posted_.end(), [&](const Posted& p) { return p.pr_id == pr_id; });
    auto host_id = pr_id + "#" + std::to_string(n + 1);
    posted_.push_back({pr_id, host_id, comment});
    return host_id;
}

std::vector<InMemoryCodeHost::Posted> InMemoryCodeHost::posted() const
{
    std::lock_guard lock(mutex_);
    return posted_;
}

std::vector<std::string> InMemoryCodeHost::calls() const
{
    std::lock_guard lock(mutex_);
    return calls_;
}

void InMemoryIssueTracker::add_issue(IssueSummary issue)
{
    std::lock_guard lock(mutex_);
    auto key = issue.key;
    issues_[key] = std::move(issue);
}

void InMemoryIssueTracker::set_reachable(bool reachable)
{
    std::lock_guard lock(mutex_);
    reachable_ = reachable;
}

IssueSummary InMemoryIssueTracker::fetch_issue(const std::string& key)
{
    std::lock_guard lock(mutex_);
    if (!reachable_)
        throw Error(ErrorCode::issue_fetch_failed, "issue tracker unreachable");
    auto it = issues_.find(key);
    if (it == issues_.end())
        throw Error(ErrorCode::issue_fetch_failed, "no such issue: " + key);
    return it->second;
}

void InMemoryRepository::add_diff(std::string base, std::string head, std::string diff_text)
{
    commits_.insert(base);
    commits_.insert(head);
    diffs_[{std::move(base), std::move(head)}] = std::move(diff_text);
}

void InMemoryRepository::set_available(bool available)
{
    available_ = available;
}

bool InMemoryRepository::available() const
{
    return available_;
}

bool InMemoryRepository::has_commit(const std::string& commit) const
{
    return commits_.count(commit) > 0;
}

std::string InMemoryRepository::diff(const std::string& base, const std::string& head) const
{
    auto it = diffs_.find({base, head});
    if (it == diffs_.end())
        throw Error(ErrorCode::repo_unavailable, "no diff for " + base + ".." + head);
    return it->second;
}

// ---------------------------------------------------------------------------

PullRequestMetadata metadata_from_json(const std::string& json_text)
{
    auto j = json::parse(json_text);
    PullRequestMetadata pr;
    pr.pr_id = j.at("pr_id").get<std::string>();
    pr.repo_id = j.value("repo_id", "");
    pr.title = j.value("title", "");
    pr.description = j.value("description", "");
    pr.branch = j.value("branch", "");
    pr.source_commit = j.value("source_commit", "");
    pr.target_commit = j.value("target_commit", "");
    pr.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    if (j.contains("merged_at") && !j["merged_at"].is_null())
        pr.merged_at = parse_timestamp(j["merged_at"].get<std::string>());
    return pr;
}

std::string metadata_to_json(const PullRequestMetadata& pr)
{
    json j{{"pr_id", pr.pr_id},
           {"repo_id", pr.repo_id},
           {"title", pr.title},
           {"description", pr.description},
           {"branch", pr.branch},
           {"source_commit", pr.source_commit},
           {"target_commit", pr.target_commit},
           {"created_at", format_timestamp(pr.created_at)},
           {"merged_at", pr.merged_at ? json(format_timestamp(*pr.merged_at)) : json(nullptr)}};
    return j.dump(2);
}

FixtureCodeHost::FixtureCodeHost(std::filesystem::path root) : root_(std::move(root)) {}

PullRequestMetadata FixtureCodeHost::fetch_pull_request(const std::string& pr_id)
{
    auto file = root_ / pr_id / "pull_request.json";
    if (pr_id.empty() || pr_id.find("..") != std::string::npos || !std::filesystem::exists(file))
        throw Error(ErrorCode::pr_not_found, pr_id);
    auto pr = metadata_from_json(read_file(file));
    add_pull_request(pr);
    return InMemoryCodeHost::fetch_pull_request(pr_id);
}

FixtureIssueTracker::FixtureIssueTracker(const std::filesystem::path& issues_file)
{
    if (!std::filesystem::exists(issues_file))
        return;
    for (const auto& j : json::parse(read_file(issues_file))) {
        auto issue = j.get<IssueSummary>();
        issues_[issue.key] = issue;
    }
}

IssueSummary FixtureIssueTracker::fetch_issue(const std::string& key)
{
    auto it = issues_.find(key);
    if (it == issues_.end())
        throw Error(ErrorCode::issue_fetch_failed, "no such issue: " + key);
    return it->second;
}

FixtureRepository::FixtureRepository(std::filesystem::path root) : root_(std::move(root))
{
    if (!std::filesystem::is_directory(root_))
        return;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        auto meta = entry.path() / "pull_request.json";
        if (!std::filesystem::exists(meta))
            continue;
        auto pr = metadata_from_json(read_file(meta));
        by_source_[pr.source_commit] = entry.path() / "change.diff";
        commits_.insert(pr.source_commit);
        commits_.insert(pr.target_commit);
    }
}

bool FixtureRepository::available() const
{
    return std::filesystem::is_directory(root_);
}

bool FixtureRepository::has_commit(const std::string& commit) const
{
    return commits_.count(commit) > 0;
}

std::string FixtureRepository::diff(const std::string&, const std::string& head) const
{
    auto it = by_source_.find(head);
    if (it == by_source_.end())
        throw Error(ErrorCode::repo_unavailable, "no fixture diff for commit " + head);
    return read_file(it->second);
}

GitRepository::GitRepository(std::filesystem::path path) : path_(std::move(path)) {}

std::string GitRepository::git(const std::vector<std::string>& args, int* status) const
{
    std::string cmd = "git -C " + shell_quote(path_.string());
    for (const auto& a : args)
        cmd += " " + shell_quote(a);
    cmd += " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        throw Error(ErrorCode::repo_unavailable, "cannot run git");
    std::string out;
    char buf[65536];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        out.append(buf, n);
    int rc = pclose(pipe);
    int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (status)
        *status = code;
    else if (code != 0)
        throw Error(ErrorCode::repo_unavailable, "git " + (args.empty() ? std::string() : args[0]) + " failed");
    return out;
}

bool GitRepository::available() const
{
    int status = 0;
    git({"rev-parse", "--git-dir"}, &status);
    return status == 0;
}

bool GitRepository::has_commit(const std::string& commit) const
{
    int status = 0;
    git({"cat-file", "-e", commit + "^{commit}"}, &status);
    return status == 0;
}

std::string GitRepository::diff(const std::string& base, const std::string& head) const
{
    return git({"-c", "core.quotepath=off", "diff", "--no-color", "--no-ext-diff", "-M", base, head});
}

std::vector<std::string> GitRepository::commits_between(const std::string& base, const std::string& head) const
{
    auto out = git({"rev-list", "--reverse", "--first-parent", base + ".." + head});
    std::vector<std::string> commits;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);)
        if (!line.empty())
            commits.push_back(line);
    return commits;
}

std::string GitRepository::first_parent(const std::string& commit) const
{
    auto out = git({"rev-parse", commit + "^"});
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r'))
        out.pop_back();
    return out;
}

Timestamp GitRepository::commit_time(const std::string& commit) const
{
    auto out = git({"show", "-s", "--format=%ct", commit});
    return Timestamp{std::chrono::seconds{std::stoll(out)}};
}

// ---------------------------------------------------------------------------

PullRequestContext assemble(const Repository& repo, const std::string& pr_id, const Clients& clients,
                            const ContextBudget& budget)
{
    validate(budget);
    if (!repo.available())
        throw Error(ErrorCode::repo_unavailable, "repository handle is not available");
    if (!clients.host)
        throw Error(ErrorCode::invalid_argument, "a code host client is required");

    const auto meta = clients.host->fetch_pull_request(pr_id);
    if (!meta.source_commit.empty() && !repo.has_commit(meta.source_commit))
        throw Error(ErrorCode::repo_unavailable, "source commit " + meta.source_commit + " not in repository");

    PullRequestContext ctx;
    ctx.pr_id = meta.pr_id;
    ctx.repo_id = meta.repo_id;
    ctx.title = meta.title;
    ctx.description = truncate_text(meta.description, budget.max_description_bytes);
    ctx.branch = meta.branch;
    ctx.source_commit = meta.source_commit;
    ctx.created_at = meta.created_at;
    ctx.merged_at = meta.merged_at;
    if (ctx.title.empty())
        throw Error(ErrorCode::invalid_argument, "pull request " + pr_id + " has an empty title");

    // Diff retrieval and issue lookups are independent of each other.
    auto diff_future = std::async(std::launch::async, [&] { return repo.diff(meta.target_commit, meta.source_commit); });

    const auto keys = detect_issue_keys({meta.branch, meta.title, meta.description});
    struct IssueResult {
        std::optional<IssueSummary> issue;
        std::string error;
    };
    std::vector<std::future<IssueResult>> issue_futures;
    if (clients.issues) {
        for (const auto& key : keys) {
            issue_futures.push_back(std::async(std::launch::async, [&clients, key]() -> IssueResult {
                try {
                    return {clients.issues->fetch_issue(key), {}};
                } catch (const std::exception& e) {
                    return {std::nullopt, e.what()};
                }
            }));
        }
    }

    for (std::size_t i = 0; i < issue_futures.size(); ++i) {
        auto r = issue_futures[i].get();
        if (!r.issue) {
            ctx.degraded = true;
            ctx.warnings.push_back("issue-fetch-failed: " + keys[i] + ": " + r.error);
            continue;
        }
        IssueSummary issue = *r.issue;
        if (issue.key.empty())
            issue.key = keys[i];
        issue.summary = truncate_text(issue.summary, budget.max_issue_bytes);
        issue.description = truncate_text(issue.description, budget.max_issue_bytes);
        ctx.issue_refs.push_back(std::move(issue));
    }

    auto parsed = diff::parse_unified_diff(diff_future.get());
    auto truncated = truncate_change(parsed, budget.max_diff_bytes);
    ctx.change = std::move(truncated.change);
    ctx.change_truncated = truncated.truncated;
    return ctx;
}

}  // namespace revkit::context
