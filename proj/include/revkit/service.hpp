#pragma once

// Event-driven review service: pull request events in, review comments
// posted out. Runs are persisted to an append-only JSON-lines store.

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "revkit/context.hpp"
#include "revkit/http.hpp"
#include "revkit/pipeline.hpp"

namespace revkit::service {

enum class EventKind { pr_created, pr_updated };
std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct ReviewEvent {
    std::string event_id;
    std::string pr_id;
    std::string repo_id;
    EventKind kind = EventKind::pr_created;
    Timestamp received_at{};
    /// Set by webhook deliveries that carry the change inline.
    std::string source_commit;
    bool operator==(const ReviewEvent&) const = default;
};

enum class Stage { assembling, generating, fact_checking, gating, posting, done, failed };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct StageMark {
    Stage stage = Stage::assembling;
    Timestamp at{};
    bool operator==(const StageMark&) const = default;
};

struct RunCounts {
    int candidates = 0;
    /// Parsed records dropped for grammar or anchoring; not part of candidates.
    int discarded = 0;
    int dedupe_dropped = 0;
    int fact_rejected = 0;
    int gate_rejected = 0;
    int posted = 0;
    int post_failed = 0;
    /// Gated comments held back by a dry run.
    int held = 0;

    /// candidates = fact_rejected + gate_rejected + posted + dedupe_dropped + post_failed + held
    bool balanced() const;
    bool operator==(const RunCounts&) const = default;
};

struct ReviewRun {
    std::string run_id;
    std::string event_id;
    std::string pr_id;
    std::string source_commit;
    Stage stage = Stage::assembling;
    std::optional<Stage> failed_stage;
    std::string error;
    /// "already-reviewed" or "trigger-disabled" when no pipeline ran.
    std::string skip_reason;
    std::vector<StageMark> timings;
    RunCounts counts;
    /// Every candidate in its final state.
    std::vector<ReviewComment> comments;
    std::vector<std::string> warnings;
    bool operator==(const ReviewRun&) const = default;
};

nlohmann::json to_json(const ReviewEvent& e);
ReviewEvent event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReviewRun& r);
ReviewRun run_from_json(const nlohmann::json& j);

/// Deterministic id for the run triggered by an event.
std::string run_id_for(const std::string& event_id);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() = 0;
};

class SystemClock : public Clock {
public:
    Timestamp now() override;
};

class ManualClock : public Clock {
public:
    explicit ManualClock(Timestamp start = {}) : now_(start) {}
    Timestamp now() override;
    void set(Timestamp t);
    void advance(std::chrono::seconds d);

private:
    std::mutex mutex_;
    Timestamp now_;
};

/// Append-only JSON-lines log. Each line is {"kind": K, "data": {...}} with
/// K one of event, run, comment, resolution; later run lines supersede
/// earlier ones with the same run_id. Memory-only when no file is given.
class Store {
public:
    explicit Store(std::optional<std::filesystem::path> file = std::nullopt);

    void put_event(const ReviewEvent& e);
    void put_run(const ReviewRun& r);
    void put_comment(const std::string& run_id, const std::string& pr_id, const ReviewComment& c);
    void put_resolution(const ResolutionRecord& r);

    std::optional<ReviewRun> run(const std::string& run_id) const;
    std::optional<ReviewRun> run_for_event(const std::string& event_id) const;
    /// Latest record of every run, ordered by run_id.
    std::vector<ReviewRun> runs() const;
    std::vector<ReviewEvent> events() const;
    std::vector<ResolutionRecord> resolutions() const;
    /// Posted comments per pr_id, in posting order.
    std::map<std::string, std::vector<ReviewComment>> posted_comments() const;
    std::string log_text() const;

private:
    void append(const std::string& kind, const nlohmann::json& data);
    void apply(const std::string& kind, const nlohmann::json& data);

    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> file_;
    std::string log_;
    std::map<std::string, ReviewRun> runs_;
    std::map<std::string, std::string> run_by_event_;
    std::vector<ReviewEvent> events_;
    std::vector<ResolutionRecord> resolutions_;
    std::map<std::string, std::vector<ReviewComment>> posted_;
};

struct PostResult {
    std::vector<ReviewComment> comments;
    int posted = 0;
    int failed = 0;
};

/// Posts each gated comment. Failures leave the comment gated with the
/// error in its note.
PostResult post_comments(const std::vector<ReviewComment>& comments, context::CodeHostClient& host,
                         const std::string& pr_id);

struct ServiceConfig {
    pipeline::PipelineConfig pipeline;
    context::ContextBudget budget;
    std::set<EventKind> triggers{EventKind::pr_created, EventKind::pr_updated};
    int workers = 4;
    bool dry_run = false;
};

class ReviewService {
public:
    ReviewService(ServiceConfig config, const context::Repository& repo, context::Clients clients,
                  llm::Gateway& gateway, gate::Classifier& classifier, Store& store, Clock& clock);
    ~ReviewService();

    /// Synchronous processing; exactly once per event_id.
    ReviewRun handle_event(const ReviewEvent& ev);

    /// Queues the event for the worker pool and returns its run id.
    std::string submit(const ReviewEvent& ev);
    /// Blocks until every submitted event has been handled.
    void drain();

    /// Makes a pull request revision available without the code host or
    /// repository (webhook deliveries with an inline diff).
    void register_inline(const context::PullRequestMetadata& meta, const std::string& diff_text);

    const ServiceConfig& config() const { return config_; }

private:
    ReviewRun process(const ReviewEvent& ev);
    PullRequestContext assemble_for(const ReviewEvent& ev);
    void advance(ReviewRun& run, Stage stage);
    void worker_loop();

    ServiceConfig config_;
    const context::Repository& repo_;
    context::Clients clients_;
    llm::Gateway& gateway_;
    gate::Classifier& classifier_;
    Store& store_;
    Clock& clock_;

    std::mutex state_mutex_;
    std::map<std::string, std::shared_future<ReviewRun>> in_flight_;
    std::map<std::string, std::unique_ptr<std::mutex>> pr_mutexes_;
    std::set<std::pair<std::string, std::string>> reviewed_;
    std::map<std::pair<std::string, std::string>, std::pair<context::PullRequestMetadata, std::string>> inline_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<ReviewEvent> queue_;
    int busy_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

/// Lowercase hex HMAC-SHA256 of `body` under `secret`.
std::string hmac_sha256_hex(const std::string& secret, const std::string& body);

/// POST /events (signature header X-Revkit-Signature: hex HMAC, optionally
/// prefixed "sha256=") -> 202 {"run_id"}; GET /runs/{run_id} -> run JSON.
class WebhookServer {
public:
    WebhookServer(ReviewService& service, Store& store, std::string secret, Clock& clock);
    ~WebhookServer();

    /// Binds (port 0 picks a free one), starts serving on a background
    /// thread and returns the bound port. Throws Error(config_error).
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

    /// Request handling without a socket (used by tests and start()).
    http::Reply handle_post_event(const http::Request& req);
    http::Reply handle_get_run(const std::string& run_id);

private:
    void install_routes();

    ReviewService& service_;
    Store& store_;
    std::string secret_;
    Clock& clock_;
    http::Server server_;
    std::thread thread_;
};

}  // namespace revkit::service
