#pragma once

// Backend abstraction for every model call: comment generation, the
// factual-correctness judge, the similarity judge and the curation noise
// judge. Ships a deterministic mock and a generic chat-completion client.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "revkit/error.hpp"
#include "revkit/model.hpp"

namespace revkit::llm {

struct ChatRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_output = 2048;
    std::string model_tag;
};

/// Connection-level failure; the only kind of error the gateway retries.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error(ErrorCode::backend_unreachable, message) {}
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Must be safe to call concurrently.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

struct ModelTags {
    std::string generation = "generator";
    std::string fact_judge = "judge-small";
    std::string similarity_judge = "judge-small";
    std::string noise_judge = "judge-small";
};

struct GatewayConfig {
    RetryPolicy retry;
    std::size_t max_prompt_bytes = 2 * 1024 * 1024;
    int max_concurrency = 4;
    ModelTags tags;
    double generation_temperature = 0.0;
    int max_output = 4096;
};

/// Single-call contract: budget guard, then up to retry.attempts tries with
/// exponential backoff on TransportError only.
std::string complete(const ChatRequest& request, Backend& backend, const RetryPolicy& retry,
                     std::size_t max_prompt_bytes, const Sleeper& sleep);

/// Shared entry point for pipeline code: wraps a backend with the retry
/// policy, the prompt budget and a per-backend concurrency cap.
class Gateway {
public:
    Gateway(Backend& backend, GatewayConfig config, Sleeper sleep = real_sleeper());

    std::string complete(const ChatRequest& request);
    const GatewayConfig& config() const { return config_; }

private:
    Backend& backend_;
    GatewayConfig config_;
    Sleeper sleep_;
    std::counting_semaphore<1024> slots_;
};

// ---------------------------------------------------------------------------
// Judges

struct JudgeVerdictFact {
    std::string comment_id;
    bool verdict = true;
    std::string rationale;
};

struct FactCheckResult {
    std::vector<JudgeVerdictFact> verdicts;
    /// Input comments advanced to fact_checked or rejected, bodies untouched.
    std::vector<ReviewComment> comments;
    std::vector<std::string> warnings;
};

/// Selection-based judgment: one keep/reject verdict per candidate. Output
/// that cannot be parsed keeps the comment (verdict true) with a warning.
FactCheckResult judge_fact(const std::vector<ReviewComment>& comments, const PullRequestContext& ctx,
                           Gateway& gateway);

std::string fact_judge_prompt(const std::vector<ReviewComment>& comments, const PullRequestContext& ctx);

struct JudgeVerdictSim {
    std::string generated_id;
    std::string human_id;
    int score = 1;
};

/// Similarity score 1..4. Unparseable output is retried once, then raises
/// Error(unparseable_judge_output).
JudgeVerdictSim judge_similarity(const ReviewComment& generated, const ReviewComment& human, Gateway& gateway);

std::string similarity_judge_prompt(const ReviewComment& generated, const ReviewComment& human);

/// Curation filter: true for affirmation or humour comments.
bool judge_noise(const std::string& comment_body, Gateway& gateway);

std::string noise_judge_prompt(const std::string& comment_body);

/// First ```json fenced block (or ``` block) in `text`; nullopt if none.
std::optional<std::string> extract_fenced_json(std::string_view text);

// ---------------------------------------------------------------------------
// Backends

std::string prompt_hash(std::string_view prompt);

/// Deterministic backend. Canned responses are looked up by the SHA-256 of
/// the prompt (fixture files named <hash>.txt); otherwise the responder, if
/// any, produces the answer; otherwise the call fails.
class MockBackend : public Backend {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit MockBackend(Responder responder = {});

    void load_fixtures(const std::filesystem::path& dir);
    void add_response(const std::string& hash, std::string response);
    void set_responder(Responder responder);
    /// Transport failures for the next `n` calls (retry tests).
    void fail_next(int n);

    std::string complete(const ChatRequest& request) override;

    std::size_t call_count() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> canned_;
    Responder responder_;
    int fail_next_ = 0;
    std::vector<ChatRequest> requests_;
};

/// Offline stand-in for every model role. Dispatches on the prompt's
/// sections: generation prompts get rule-based comments on added lines,
/// fact prompts a rule-based anchor check, similarity prompts a keyword
/// overlap score and noise prompts an affirmation/humour lexicon check.
std::string scripted_response(const ChatRequest& request);

std::unique_ptr<MockBackend> make_scripted_mock(const std::optional<std::filesystem::path>& fixtures = std::nullopt);

/// Keyword-overlap similarity used by the scripted mock (1..4).
int keyword_similarity(std::string_view a, std::string_view b);

struct HttpBackendConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    /// Name of the environment variable holding the bearer token.
    std::string api_key_env = "REVKIT_API_KEY";
    std::chrono::seconds timeout{120};
};

/// Generic chat-completion client:
///   POST {base_url}{path}
///   {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens"}
///   -> {"choices": [{"message": {"content": ...}}]}
class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    HttpBackendConfig config_;
};

}  // namespace revkit::llm
