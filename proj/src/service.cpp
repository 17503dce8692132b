#include "revkit/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "revkit/diff.hpp"
#include "revkit/model_json.hpp"

namespace revkit::service {

using nlohmann::json;

std::string_view to_string(EventKind kind)
{
    return kind == EventKind::pr_created ? "pr_created" : "pr_updated";
}

EventKind parse_event_kind(std::string_view text)
{
    if (text == "pr_created")
        return EventKind::pr_created;
    if (text == "pr_updated")
        return EventKind::pr_updated;
    throw Error(ErrorCode::invalid_argument, "unknown event kind: " + std::string(text));
}

namespace {

constexpr std::string_view stage_names[] = {"assembling", "generating", "fact_checking", "gating",
                                            "posting",    "done",       "failed"};

}  // namespace

std::string_view to_string(Stage stage) { return stage_names[static_cast<int>(stage)]; }

Stage parse_stage(std::string_view text)
{
    for (int i = 0; i < 7; ++i)
        if (stage_names[i] == text)
            return static_cast<Stage>(i);
    throw Error(ErrorCode::invalid_argument, "unknown stage: " + std::string(text));
}

bool RunCounts::balanced() const
{
    return candidates == fact_rejected + gate_rejected + posted + dedupe_dropped + post_failed + held;
}

json to_json(const ReviewEvent& e)
{
    json j{{"event_id", e.event_id},
           {"pr_id", e.pr_id},
           {"repo_id", e.repo_id},
           {"kind", to_string(e.kind)},
           {"received_at", format_timestamp(e.received_at)}};
    if (!e.source_commit.empty())
        j["source_commit"] = e.source_commit;
    return j;
}

ReviewEvent event_from_json(const json& j)
{
    ReviewEvent e;
    e.event_id = j.at("event_id").get<std::string>();
    e.pr_id = j.at("pr_id").get<std::string>();
    e.repo_id = j.value("repo_id", "");
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.received_at = parse_timestamp(j.at("received_at").get<std::string>());
    e.source_commit = j.value("source_commit", "");
    return e;
}

json to_json(const ReviewRun& r)
{
    json timings = json::array();
    for (const auto& t : r.timings)
        timings.push_back({{"stage", to_string(t.stage)}, {"at", format_timestamp(t.at)}});
    json j{{"run_id", r.run_id},
           {"event_id", r.event_id},
           {"pr_id", r.pr_id},
           {"source_commit", r.source_commit},
           {"stage", to_string(r.stage)},
           {"failed_stage", r.failed_stage ? json(to_string(*r.failed_stage)) : json(nullptr)},
           {"error", r.error},
           {"skip_reason", r.skip_reason},
           {"timings", timings},
           {"counts",
            {{"candidates", r.counts.candidates},
             {"discarded", r.counts.discarded},
             {"dedupe_dropped", r.counts.dedupe_dropped},
             {"fact_rejected", r.counts.fact_rejected},
             {"gate_rejected", r.counts.gate_rejected},
             {"posted", r.counts.posted},
             {"post_failed", r.counts.post_failed},
             {"held", r.counts.held}}},
           {"comments", r.comments},
           {"warnings", r.warnings}};
    return j;
}

ReviewRun run_from_json(const json& j)
{
    ReviewRun r;
    r.run_id = j.at("run_id").get<std::string>();
    r.event_id = j.at("event_id").get<std::string>();
    r.pr_id = j.value("pr_id", "");
    r.source_commit = j.value("source_commit", "");
    r.stage = parse_stage(j.at("stage").get<std::string>());
    if (j.contains("failed_stage") && j["failed_stage"].is_string())
        r.failed_stage = parse_stage(j["failed_stage"].get<std::string>());
    r.error = j.value("error", "");
    r.skip_reason = j.value("skip_reason", "");
    for (const auto& t : j.value("timings", json::array()))
        r.timings.push_back({parse_stage(t.at("stage").get<std::string>()), parse_timestamp(t.at("at").get<std::string>())});
    const auto& c = j.at("counts");
    r.counts.candidates = c.value("candidates", 0);
    r.counts.discarded = c.value("discarded", 0);
    r.counts.dedupe_dropped = c.value("dedupe_dropped", 0);
    r.counts.fact_rejected = c.value("fact_rejected", 0);
    r.counts.gate_rejected = c.value("gate_rejected", 0);
    r.counts.posted = c.value("posted", 0);
    r.counts.post_failed = c.value("post_failed", 0);
    r.counts.held = c.value("held", 0);
    r.comments = j.value("comments", std::vector<ReviewComment>{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
}

std::string run_id_for(const std::string& event_id)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(event_id.data(), event_id.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = "run-";
    for (unsigned int i = 0; i < 8; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

Timestamp SystemClock::now() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

Timestamp ManualClock::now()
{
    std::lock_guard lock(mutex_);
    return now_;
}

void ManualClock::set(Timestamp t)
{
    std::lock_guard lock(mutex_);
    now_ = t;
}

void ManualClock::advance(std::chrono::seconds d)
{
    std::lock_guard lock(mutex_);
    now_ += d;
}

// ---------------------------------------------------------------------------

Store::Store(std::optional<std::filesystem::path> file) : file_(std::move(file))
{
    if (!file_ || !std::filesystem::exists(*file_))
        return;
    std::ifstream in(*file_, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::store_failure, "cannot open store " + file_->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    log_ = ss.str();
    std::istringstream lines(log_);
    int n = 0;
    for (std::string line; std::getline(lines, line);) {
        ++n;
        if (line.empty())
            continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("kind") || !j.contains("data"))
            throw Error(ErrorCode::store_failure, file_->string() + ":" + std::to_string(n) + ": corrupt record");
        apply(j["kind"].get<std::string>(), j["data"]);
    }
}

void Store::apply(const std::string& kind, const json& data)
{
    if (kind == "event") {
        events_.push_back(event_from_json(data));
    } else if (kind == "run") {
        auto r = run_from_json(data);
        run_by_event_[r.event_id] = r.run_id;
        runs_[r.run_id] = std::move(r);
    } else if (kind == "comment") {
        auto c = data.at("comment").get<ReviewComment>();
        if (c.state == CommentState::posted)
            posted_[data.at("pr_id").get<std::string>()].push_back(std::move(c));
    } else if (kind == "resolution") {
        resolutions_.push_back(data.get<ResolutionRecord>());
    } else {
        throw Error(ErrorCode::store_failure, "unknown record kind " + kind);
    }
}

void Store::append(const std::string& kind, const json& data)
{
    const auto line = json{{"kind", kind}, {"data", data}}.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    std::lock_guard lock(mutex_);
    if (file_) {
        std::ofstream out(*file_, std::ios::binary | std::ios::app);
        if (!out || !(out << line) || !out.flush())
            throw Error(ErrorCode::store_failure, "cannot append to " + file_->string());
    }
    log_ += line;
    apply(kind, data);
}

void Store::put_event(const ReviewEvent& e) { append("event", to_json(e)); }
void Store::put_run(const ReviewRun& r) { append("run", to_json(r)); }

void Store::put_comment(const std::string& run_id, const std::string& pr_id, const ReviewComment& c)
{
    append("comment", json{{"run_id", run_id}, {"pr_id", pr_id}, {"comment", c}});
}

void Store::put_resolution(const ResolutionRecord& r) { append("resolution", json(r)); }

std::optional<ReviewRun> Store::run(const std::string& run_id) const
{
    std::lock_guard lock(mutex_);
    auto it = runs_.find(run_id);
    if (it == runs_.end())
        return std::nullopt;
    return it->second;
}

std::optional<ReviewRun> Store::run_for_event(const std::string& event_id) const
{
    std::lock_guard lock(mutex_);
    auto it = run_by_event_.find(event_id);
    if (it == run_by_event_.end())
        return std::nullopt;
    return runs_.at(it->second);
}

std::vector<ReviewRun> Store::runs() const
{
    std::lock_guard lock(mutex_);
    std::vector<ReviewRun> out;
    for (const auto& [id, r] : runs_)
        out.push_back(r);
    return out;
}

std::vector<ReviewEvent> Store::events() const
{
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<ResolutionRecord> Store::resolutions() const
{
    std::lock_guard lock(mutex_);
    return resolutions_;
}

std::map<std::string, std::vector<ReviewComment>> Store::posted_comments() const
{
    std::lock_guard lock(mutex_);
    return posted_;
}

std::string Store::log_text() const
{
    std::lock_guard lock(mutex_);
    return log_;
}

// ---------------------------------------------------------------------------

PostResult post_comments(const std::vector<ReviewComment>& comments, context::CodeHostClient& host,
                         const std::string& pr_id)
{
    PostResult out;
    for (const auto& c : comments) {
        if (c.state != CommentState::gated)
            throw Error(ErrorCode::invalid_argument, "only gated comments can be posted: " + c.comment_id);
        try {
            auto host_id = host.post_comment(pr_id, c);
            auto posted = transition(c, CommentState::posted);
            posted.host_comment_id = host_id;
            out.comments.push_back(std::move(posted));
            ++out.posted;
        } catch (const std::exception& e) {
            auto kept = c;
            kept.note = std::string("post failed: ") + e.what();
            out.comments.push_back(std::move(kept));
            ++out.failed;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

ReviewService::ReviewService(ServiceConfig config, const context::Repository& repo, context::Clients clients,
                             llm::Gateway& gateway, gate::Classifier& classifier, Store& store, Clock& clock)
    : config_(std::move(config)),
      repo_(repo),
      clients_(clients),
      gateway_(gateway),
      classifier_(classifier),
      store_(store),
      clock_(clock)
{
    for (const auto& r : store_.runs())
        if (r.stage == Stage::done && r.skip_reason.empty())
            reviewed_.insert({r.pr_id, r.source_commit});
}

ReviewService::~ReviewService()
{
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& t : workers_)
        t.join();
}

void ReviewService::register_inline(const context::PullRequestMetadata& meta, const std::string& diff_text)
{
    std::lock_guard lock(state_mutex_);
    inline_[{meta.pr_id, meta.source_commit}] = {meta, diff_text};
}

void ReviewService::advance(ReviewRun& run, Stage stage)
{
    if (static_cast<int>(stage) < static_cast<int>(run.stage))
        throw Error(ErrorCode::invalid_transition,
                    "run stage cannot move from " + std::string(to_string(run.stage)) + " to " + std::string(to_string(stage)));
    run.stage = stage;
    run.timings.push_back({stage, clock_.now()});
    store_.put_run(run);
}

PullRequestContext ReviewService::assemble_for(const ReviewEvent& ev)
{
    std::optional<std::pair<context::PullRequestMetadata, std::string>> overlay;
    {
        std::lock_guard lock(state_mutex_);
        auto it = inline_.find({ev.pr_id, ev.source_commit});
        if (it != inline_.end())
            overlay = it->second;
    }
    if (!overlay)
        return context::assemble(repo_, ev.pr_id, clients_, config_.budget);

    context::InMemoryCodeHost host;
    host.add_pull_request(overlay->first);
    context::InMemoryRepository repo;
    repo.add_diff(overlay->first.target_commit, overlay->first.source_commit, overlay->second);
    return context::assemble(repo, ev.pr_id, {&host, clients_.issues}, config_.budget);
}

ReviewRun ReviewService::handle_event(const ReviewEvent& ev)
{
    std::promise<ReviewRun> promise;
    std::shared_future<ReviewRun> waiting;
    {
        std::lock_guard lock(state_mutex_);
        if (auto existing = store_.run_for_event(ev.event_id); existing && (existing->stage == Stage::done ||
                                                                              existing->stage == Stage::failed))
            return *existing;
        auto it = in_flight_.find(ev.event_id);
        if (it != in_flight_.end()) {
            waiting = it->second;
        } else {
            in_flight_.emplace(ev.event_id, promise.get_future().share());
        }
    }
    if (waiting.valid())
        return waiting.get();

    ReviewRun run;
    try {
        run = process(ev);
    } catch (...) {
        std::lock_guard lock(state_mutex_);
        promise.set_exception(std::current_exception());
        in_flight_.erase(ev.event_id);
        throw;
    }
    std::lock_guard lock(state_mutex_);
    promise.set_value(run);
    in_flight_.erase(ev.event_id);
    return run;
}

ReviewRun ReviewService::process(const ReviewEvent& ev)
{
    store_.put_event(ev);
    ReviewRun run;
    run.run_id = run_id_for(ev.event_id);
    run.event_id = ev.event_id;
    run.pr_id = ev.pr_id;
    run.source_commit = ev.source_commit;
    run.timings.push_back({Stage::assembling, clock_.now()});
    store_.put_run(run);

    if (!config_.triggers.count(ev.kind)) {
        run.skip_reason = "trigger-disabled";
        advance(run, Stage::done);
        return run;
    }

    std::mutex* pr_mutex = nullptr;
    {
        std::lock_guard lock(state_mutex_);
        auto& slot = pr_mutexes_[ev.pr_id];
        if (!slot)
            slot = std::make_unique<std::mutex>();
        pr_mutex = slot.get();
    }
    std::lock_guard pr_lock(*pr_mutex);

    std::pair<std::string, std::string> review_key;
    bool claimed = false;
    auto fail = [&](const std::exception& e) {
        run.failed_stage = run.stage;
        run.error = e.what();
        if (claimed) {
            std::lock_guard lock(state_mutex_);
            reviewed_.erase(review_key);
        }
        advance(run, Stage::failed);
    };

    PullRequestContext ctx;
    try {
        ctx = assemble_for(ev);
    } catch (const std::exception& e) {
        fail(e);
        return run;
    }
    run.source_commit = ctx.source_commit;
    run.warnings = ctx.warnings;
    review_key = {ctx.pr_id, ctx.source_commit};
    {
        std::lock_guard lock(state_mutex_);
        claimed = reviewed_.insert(review_key).second;
    }
    if (!claimed) {
        run.skip_reason = "already-reviewed";
        advance(run, Stage::done);
        return run;
    }

    const auto& cfg = config_.pipeline;
    try {
        advance(run, Stage::generating);
        auto generated = pipeline::generate(ctx, cfg, gateway_, run.run_id);
        run.counts.candidates = static_cast<int>(generated.candidates.size());
        run.counts.discarded = static_cast<int>(generated.discards.size());
        run.counts.dedupe_dropped = generated.dedupe_dropped;
        for (const auto& d : generated.discards)
            run.warnings.push_back("discarded (" + d.reason + "): " + d.detail);

        std::map<std::string, ReviewComment> final_state;
        std::vector<std::string> order;
        for (const auto& c : generated.candidates) {
            order.push_back(c.comment_id);
            final_state[c.comment_id] = c;
        }
        for (const auto& c : generated.candidates) {
            bool kept = std::any_of(generated.deduped.begin(), generated.deduped.end(),
                                    [&](const ReviewComment& d) { return d.comment_id == c.comment_id; });
            if (!kept) {
                auto dropped = transition(c, CommentState::rejected);
                dropped.note = "duplicate anchor or over the per-PR cap";
                final_state[c.comment_id] = dropped;
            }
        }
        auto record = [&](const std::vector<ReviewComment>& cs) {
            for (const auto& c : cs)
                final_state[c.comment_id] = c;
            run.comments.clear();
            for (const auto& id : order)
                run.comments.push_back(final_state[id]);
        };
        record({});

        advance(run, Stage::fact_checking);
        auto checked = pipeline::fact_check(generated.deduped, ctx, cfg, gateway_);
        run.counts.fact_rejected = checked.rejected;
        run.warnings.insert(run.warnings.end(), checked.warnings.begin(), checked.warnings.end());
        record(checked.comments);

        advance(run, Stage::gating);
        auto gated = pipeline::apply_gate(checked.comments, cfg, classifier_);
        run.counts.gate_rejected = gated.rejected;
        run.warnings.insert(run.warnings.end(), gated.warnings.begin(), gated.warnings.end());
        record(gated.comments);

        advance(run, Stage::posting);
        auto ready = pipeline::with_state(gated.comments, CommentState::gated);
        if (config_.dry_run) {
            run.counts.held = static_cast<int>(ready.size());
        } else {
            if (!clients_.host)
                throw Error(ErrorCode::invalid_argument, "no code host client to post to");
            auto posted = post_comments(ready, *clients_.host, ctx.pr_id);
            run.counts.posted = posted.posted;
            run.counts.post_failed = posted.failed;
            record(posted.comments);
            for (const auto& c : posted.comments)
                store_.put_comment(run.run_id, ctx.pr_id, c);
        }
        advance(run, Stage::done);
    } catch (const std::exception& e) {
        fail(e);
    }
    return run;
}

std::string ReviewService::submit(const ReviewEvent& ev)
{
    {
        std::lock_guard lock(queue_mutex_);
        if (workers_.empty())
            for (int i = 0; i < std::max(1, config_.workers); ++i)
                workers_.emplace_back([this] { worker_loop(); });
        queue_.push_back(ev);
    }
    queue_cv_.notify_one();
    return run_id_for(ev.event_id);
}

void ReviewService::drain()
{
    std::unique_lock lock(queue_mutex_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && busy_ == 0; });
}

void ReviewService::worker_loop()
{
    for (;;) {
        ReviewEvent ev;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty())
                return;
            ev = std::move(queue_.front());
            queue_.pop_front();
            ++busy_;
        }
        try {
            handle_event(ev);
        } catch (const std::exception&) {
            // Failures are recorded on the run; store errors have nowhere else to go.
        }
        {
            std::lock_guard lock(queue_mutex_);
            --busy_;
        }
        idle_cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------

std::string hmac_sha256_hex(const std::string& secret, const std::string& body)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
         reinterpret_cast<const unsigned char*>(body.data()), body.size(), digest, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

namespace {

bool constant_time_equal(const std::string& a, const std::string& b)
{
    if (a.size() != b.size())
        return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

http::Reply error_reply(int status, const std::string& message)
{
    return {status, json{{"error", message}}.dump(), "application/json"};
}

}  // namespace

WebhookServer::WebhookServer(ReviewService& service, Store& store, std::string secret, Clock& clock)
    : service_(service), store_(store), secret_(std::move(secret)), clock_(clock)
{
    install_routes();
}

WebhookServer::~WebhookServer() { stop(); }

void WebhookServer::install_routes()
{
    server_.post("/events", [this](const http::Request& req) { return handle_post_event(req); });
    server_.get(R"(/runs/([A-Za-z0-9_.-]+))",
                [this](const http::Request& req) { return handle_get_run(req.matches.at(1)); });
}

http::Reply WebhookServer::handle_post_event(const http::Request& req)
{
    std::string signature = req.header("X-Revkit-Signature");
    if (signature.rfind("sha256=", 0) == 0)
        signature = signature.substr(7);
    if (secret_.empty() || !constant_time_equal(signature, hmac_sha256_hex(secret_, req.body)))
        return error_reply(401, "bad signature");

    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return error_reply(400, "body is not a JSON object");
    try {
        ReviewEvent ev;
        ev.event_id = j.at("event_id").get<std::string>();
        ev.kind = parse_event_kind(j.at("kind").get<std::string>());
        ev.repo_id = j.value("repo", "");
        ev.received_at = clock_.now();
        const auto& pr = j.at("pr");
        ev.pr_id = pr.at("id").is_string() ? pr.at("id").get<std::string>() : pr.at("id").dump();

        std::optional<std::string> diff_text;
        if (j.contains("diff") && j["diff"].is_string()) {
            diff_text = j["diff"].get<std::string>();
        } else if (j.contains("diff_url") && j["diff_url"].is_string()) {
            auto [base, path] = http::split_url(j["diff_url"].get<std::string>());
            auto r = http::get(base, path);
            if (r.status != 200)
                return error_reply(502, "cannot fetch diff_url");
            diff_text = r.body;
        }
        if (diff_text) {
            context::PullRequestMetadata meta;
            meta.pr_id = ev.pr_id;
            meta.repo_id = ev.repo_id;
            meta.title = pr.value("title", "");
            meta.description = pr.value("description", "");
            meta.branch = pr.value("branch", "");
            meta.source_commit = pr.value("source_commit", "");
            meta.target_commit = pr.value("target_commit", "base");
            meta.created_at = pr.contains("created_at") ? parse_timestamp(pr["created_at"].get<std::string>())
                                                        : ev.received_at;
            if (diff::parse_unified_diff(*diff_text).files.empty())
                return error_reply(400, "diff contains no files");
            ev.source_commit = meta.source_commit;
            service_.register_inline(meta, *diff_text);
        }
        auto run_id = service_.submit(ev);
        return {202, json{{"run_id", run_id}}.dump(), "application/json"};
    } catch (const std::exception& e) {
        return error_reply(400, e.what());
    }
}

http::Reply WebhookServer::handle_get_run(const std::string& run_id)
{
    auto run = store_.run(run_id);
    if (!run)
        return error_reply(404, "no such run");
    return {200, to_json(*run).dump(2), "application/json"};
}

int WebhookServer::start(const std::string& host, int port)
{
    int bound = port;
    if (port == 0)
        bound = server_.bind_any_port(host);
    else if (!server_.bind(host, port))
        bound = -1;
    if (bound < 0)
        throw Error(ErrorCode::config_error, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
}

void WebhookServer::run(const std::string& host, int port)
{
    if (!server_.bind(host, port))
        throw Error(ErrorCode::config_error, "cannot bind " + host + ":" + std::to_string(port));
    server_.listen_after_bind();
}

void WebhookServer::stop()
{
    server_.stop();
    if (thread_.joinable())
        thread_.join();
}

}  // namespace revkit::service
