#pragma once

// Gathers the diff, PR title/description and linked issues for one review
// run. Code host, issue tracker and repository access sit behind abstract
// interfaces; in-memory fakes and fixture-directory implementations ship
// alongside a git-backed repository.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "revkit/model.hpp"

namespace revkit::context {

struct ContextBudget {
    std::size_t max_diff_bytes = 512 * 1024;
    std::size_t max_description_bytes = 16 * 1024;
    std::size_t max_issue_bytes = 8 * 1024;
};

/// Throws Error(invalid_argument) unless every budget is positive.
void validate(const ContextBudget& budget);

inline constexpr std::string_view truncation_marker = "[truncated]";
inline constexpr std::string_view diff_truncation_marker = "[diff truncated to fit the context budget]\n";

/// Cuts `text` to at most `max_bytes`, ending with truncation_marker when cut.
/// Never splits a UTF-8 sequence.
std::string truncate_text(std::string_view text, std::size_t max_bytes);

/// Issue keys ([A-Z][A-Z0-9]+-[0-9]+) in order of first appearance.
std::vector<std::string> detect_issue_keys(const std::vector<std::string_view>& sources);

/// Text form of C_code: the unified diff with binary files reduced to a
/// one-line placeholder, followed by diff_truncation_marker when truncated.
std::string render_code_change(const CodeChange& change, bool truncated);

struct TruncatedChange {
    CodeChange change;
    bool truncated = false;
};

/// Drops trailing whole hunks (and files left without hunks) until the
/// rendering, marker included, fits in `max_bytes`.
TruncatedChange truncate_change(const CodeChange& change, std::size_t max_bytes);

// ---------------------------------------------------------------------------
// Clients

struct PullRequestMetadata {
    std::string pr_id;
    std::string repo_id;
    std::string title;
    std::string description;
    std::string branch;
    std::string source_commit;
    std::string target_commit;
    Timestamp created_at{};
    std::optional<Timestamp> merged_at;
};

class CodeHostClient {
public:
    virtual ~CodeHostClient() = default;
    /// Throws Error(pr_not_found) or Error(backend_unreachable).
    virtual PullRequestMetadata fetch_pull_request(const std::string& pr_id) = 0;
    /// Posts an inline comment and returns the host-assigned id. Throws on rejection.
    virtual std::string post_comment(const std::string& pr_id, const ReviewComment& comment) = 0;
};

class IssueTrackerClient {
public:
    virtual ~IssueTrackerClient() = default;
    /// Throws Error(issue_fetch_failed) when the issue cannot be retrieved.
    virtual IssueSummary fetch_issue(const std::string& key) = 0;
};

class Repository {
public:
    virtual ~Repository() = default;
    virtual bool available() const = 0;
    virtual bool has_commit(const std::string& commit) const = 0;
    /// Unified diff from `base` to `head`.
    virtual std::string diff(const std::string& base, const std::string& head) const = 0;
};

/// In-memory code host. Records every call so tests can assert on traffic.
class InMemoryCodeHost : public CodeHostClient {
public:
    void add_pull_request(PullRequestMetadata pr);
    void set_reachable(bool reachable);
    /// Posting to any of these (path, line) anchors fails.
    void reject_anchor(std::string path, int line);

    PullRequestMetadata fetch_pull_request(const std::string& pr_id) override;
    std::string post_comment(const std::string& pr_id, const ReviewComment& comment) override;

    struct Posted {
        std::string pr_id;
        std::string host_id;
        ReviewComment comment;
    };
    std::vector<Posted> posted() const;
    std::vector<std::string> calls() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, PullRequestMetadata> prs_;
    std::set<std::pair<std::string, int>> rejected_;
    std::vector<Posted> posted_;
    std::vector<std::string> calls_;
    bool reachable_ = true;
};

class InMemoryIssueTracker : public IssueTrackerClient {
public:
    void add_issue(IssueSummary issue);
    void set_reachable(bool reachable);
    IssueSummary fetch_issue(const std::string& key) override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, IssueSummary> issues_;
    bool reachable_ = true;
};

class InMemoryRepository : public Repository {
public:
    void add_diff(std::string base, std::string head, std::string diff_text);
    void set_available(bool available);

    bool available() const override;
    bool has_commit(const std::string& commit) const override;
    std::string diff(const std::string& base, const std::string& head) const override;

private:
    std::map<std::pair<std::string, std::string>, std::string> diffs_;
    std::set<std::string> commits_;
    bool available_ = true;
};

/// Fixture layout (one directory per PR):
///   <root>/<pr_id>/pull_request.json   PullRequestMetadata fields
///   <root>/<pr_id>/change.diff         diff from target_commit to source_commit
/// Posted comments are kept in memory and readable via posted().
class FixtureCodeHost : public InMemoryCodeHost {
public:
    explicit FixtureCodeHost(std::filesystem::path root);
    PullRequestMetadata fetch_pull_request(const std::string& pr_id) override;

private:
    std::filesystem::path root_;
};

/// Reads <root>/issues.json: an array of {key, summary, description}.
class FixtureIssueTracker : public IssueTrackerClient {
public:
    explicit FixtureIssueTracker(const std::filesystem::path& issues_file);
    IssueSummary fetch_issue(const std::string& key) override;

private:
    std::map<std::string, IssueSummary> issues_;
};

/// Serves <root>/<pr_id>/change.diff for diff(target, source) using the
/// commit ids recorded in each pull_request.json.
class FixtureRepository : public Repository {
public:
    explicit FixtureRepository(std::filesystem::path root);
    bool available() const override;
    bool has_commit(const std::string& commit) const override;
    std::string diff(const std::string& base, const std::string& head) const override;

private:
    std::filesystem::path root_;
    std::map<std::string, std::filesystem::path> by_source_;
    std::set<std::string> commits_;
};

/// Read-only access to a local git clone through the git executable.
class GitRepository : public Repository {
public:
    explicit GitRepository(std::filesystem::path path);
    bool available() const override;
    bool has_commit(const std::string& commit) const override;
    std::string diff(const std::string& base, const std::string& head) const override;

    /// Commits reachable from `head` but not `base`, oldest first.
    std::vector<std::string> commits_between(const std::string& base, const std::string& head) const;
    std::string first_parent(const std::string& commit) const;
    Timestamp commit_time(const std::string& commit) const;

private:
    std::string git(const std::vector<std::string>& args, int* status = nullptr) const;
    std::filesystem::path path_;
};

PullRequestMetadata metadata_from_json(const std::string& json_text);
std::string metadata_to_json(const PullRequestMetadata& pr);

// ---------------------------------------------------------------------------

struct Clients {
    CodeHostClient* host = nullptr;
    /// Null means "explicitly absent": context is assembled without issues.
    IssueTrackerClient* issues = nullptr;
};

/// Builds the PullRequestContext for `pr_id`.
/// Errors: repo_unavailable, pr_not_found. An unreachable issue tracker
/// degrades the context (degraded = true, warning recorded) instead.
PullRequestContext assemble(const Repository& repo, const std::string& pr_id, const Clients& clients,
                            const ContextBudget& budget);

}  // namespace revkit::context
