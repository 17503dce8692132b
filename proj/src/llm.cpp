#include "revkit/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "revkit/assets.hpp"
#include "revkit/context.hpp"
#include "revkit/diff.hpp"
#include "revkit/http.hpp"
#include "revkit/prompt.hpp"

namespace revkit::llm {

using nlohmann::json;

Sleeper real_sleeper()
{
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string complete(const ChatRequest& request, Backend& backend, const RetryPolicy& retry,
                     std::size_t max_prompt_bytes, const Sleeper& sleep)
{
    if (request.max_output <= 0)
        throw Error(ErrorCode::invalid_argument, "max_output must be positive");
    if (request.temperature < 0)
        throw Error(ErrorCode::invalid_argument, "temperature must be non-negative");
    if (request.prompt.size() > max_prompt_bytes)
        throw Error(ErrorCode::budget_exceeded, "prompt of " + std::to_string(request.prompt.size()) +
                                                    " bytes exceeds the " + std::to_string(max_prompt_bytes) +
                                                    "-byte budget");
    const int attempts = std::max(1, retry.attempts);
    auto backoff = retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return backend.complete(request);
        } catch (const TransportError& e) {
            if (attempt >= attempts)
                throw Error(ErrorCode::backend_unreachable,
                            "giving up after " + std::to_string(attempts) + " attempts: " + e.what());
        }
        if (sleep)
            sleep(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry.multiplier));
    }
}

Gateway::Gateway(Backend& backend, GatewayConfig config, Sleeper sleep)
    : backend_(backend),
      config_(std::move(config)),
      sleep_(std::move(sleep)),
      slots_(std::clamp(config_.max_concurrency, 1, 1024))
{
}

std::string Gateway::complete(const ChatRequest& request)
{
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};
    return llm::complete(request, backend_, config_.retry, config_.max_prompt_bytes, sleep_);
}

// ---------------------------------------------------------------------------

std::optional<std::string> extract_fenced_json(std::string_view text)
{
    auto open = text.find("```");
    if (open == std::string_view::npos)
        return std::nullopt;
    auto body = text.find('\n', open);
    if (body == std::string_view::npos)
        return std::nullopt;
    auto close = text.find("```", body + 1);
    if (close == std::string_view::npos)
        return std::nullopt;
    return std::string(text.substr(body + 1, close - body - 1));
}

namespace {

std::string trimmed_asset(std::string_view text)
{
    while (!text.empty() && text.back() == '\n')
        text.remove_suffix(1);
    return std::string(text);
}

std::optional<json> parse_judge_json(std::string_view raw)
{
    auto fenced = extract_fenced_json(raw);
    auto payload = fenced ? *fenced : std::string(raw);
    auto parsed = json::parse(payload, nullptr, false);
    if (parsed.is_discarded())
        return std::nullopt;
    return parsed;
}

}  // namespace

std::string fact_judge_prompt(const std::vector<ReviewComment>& comments, const PullRequestContext& ctx)
{
    json candidates = json::array();
    for (const auto& c : comments)
        candidates.push_back(
            {{"comment_id", c.comment_id}, {"file_path", c.file_path}, {"line", c.line}, {"body", c.body}});
    std::string out;
    out += prompt::fence("judge_instructions", trimmed_asset(assets::fact_judge));
    out += prompt::fence("pr_info", prompt::render_pr_info(ctx));
    out += prompt::fence("code_change", context::render_code_change(ctx.change, ctx.change_truncated));
    out += prompt::fence("candidates", candidates.dump(2));
    return out;
}

FactCheckResult judge_fact(const std::vector<ReviewComment>& comments, const PullRequestContext& ctx,
                           Gateway& gateway)
{
    for (const auto& c : comments)
        if (c.state != CommentState::candidate)
            throw Error(ErrorCode::invalid_argument, "judge_fact expects candidate comments: " + c.comment_id);

    FactCheckResult result;
    if (comments.empty())
        return result;

    ChatRequest req;
    req.prompt = fact_judge_prompt(comments, ctx);
    req.model_tag = gateway.config().tags.fact_judge;
    req.temperature = 0.0;
    req.max_output = gateway.config().max_output;
    const auto raw = gateway.complete(req);

    std::map<std::string, std::pair<bool, std::string>> by_id;
    bool parsed_ok = false;
    if (auto parsed = parse_judge_json(raw); parsed && parsed->is_array()) {
        parsed_ok = true;
        for (const auto& item : *parsed) {
            if (!item.is_object() || !item.contains("comment_id") || !item.contains("verdict") ||
                !item["comment_id"].is_string() || !item["verdict"].is_boolean())
                continue;
            by_id.emplace(item["comment_id"].get<std::string>(),
                          std::make_pair(item["verdict"].get<bool>(), item.value("rationale", std::string())));
        }
    }
    if (!parsed_ok)
        result.warnings.push_back("unparseable-judge-output: factual judge response kept all candidates");

    for (const auto& c : comments) {
        JudgeVerdictFact v{c.comment_id, true, {}};
        auto it = by_id.find(c.comment_id);
        if (it != by_id.end()) {
            v.verdict = it->second.first;
            v.rationale = it->second.second;
        } else {
            v.rationale = "no verdict returned; kept (fail-open)";
            if (parsed_ok)
                result.warnings.push_back("unparseable-judge-output: no verdict for " + c.comment_id);
        }
        auto next = transition(c, v.verdict ? CommentState::fact_checked : CommentState::rejected);
        if (it == by_id.end())
            next.note = "fact check failed open";
        else if (!v.verdict)
            next.note = "rejected by fact check: " + v.rationale;
        result.comments.push_back(std::move(next));
        result.verdicts.push_back(std::move(v));
    }
    return result;
}

std::string similarity_judge_prompt(const ReviewComment& generated, const ReviewComment& human)
{
    std::string out;
    out += prompt::fence("judge_instructions", trimmed_asset(assets::similarity_judge));
    out += prompt::fence("generated_comment", generated.body);
    out += prompt::fence("human_comment", human.body);
    return out;
}

namespace {

std::optional<int> parse_score(std::string_view raw)
{
    if (auto parsed = parse_judge_json(raw)) {
        if (parsed->is_object() && parsed->contains("score") && (*parsed)["score"].is_number_integer()) {
            int s = (*parsed)["score"].get<int>();
            if (s >= 1 && s <= 4)
                return s;
            return std::nullopt;
        }
        if (parsed->is_number_integer()) {
            int s = parsed->get<int>();
            if (s >= 1 && s <= 4)
                return s;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

JudgeVerdictSim judge_similarity(const ReviewComment& generated, const ReviewComment& human, Gateway& gateway)
{
    if (generated.body.empty() || human.body.empty())
        throw Error(ErrorCode::invalid_argument, "similarity judge needs non-empty comments");
    ChatRequest req;
    req.prompt = similarity_judge_prompt(generated, human);
    req.model_tag = gateway.config().tags.similarity_judge;
    req.max_output = gateway.config().max_output;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (auto score = parse_score(gateway.complete(req)))
            return {generated.comment_id, human.comment_id, *score};
    }
    throw Error(ErrorCode::unparseable_judge_output,
                "similarity judge output for " + generated.comment_id + " / " + human.comment_id);
}

std::string noise_judge_prompt(const std::string& comment_body)
{
    std::string out;
    out += prompt::fence("judge_instructions", trimmed_asset(assets::noise_judge));
    out += prompt::fence("comment", comment_body);
    return out;
}

bool judge_noise(const std::string& comment_body, Gateway& gateway)
{
    ChatRequest req;
    req.prompt = noise_judge_prompt(comment_body);
    req.model_tag = gateway.config().tags.noise_judge;
    req.max_output = gateway.config().max_output;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto parsed = parse_judge_json(gateway.complete(req));
        if (parsed && parsed->is_object() && parsed->contains("noisy") && (*parsed)["noisy"].is_boolean())
            return (*parsed)["noisy"].get<bool>();
    }
    throw Error(ErrorCode::unparseable_judge_output, "noise judge output");
}

// ---------------------------------------------------------------------------

std::string prompt_hash(std::string_view prompt)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(prompt.data(), prompt.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

MockBackend::MockBackend(Responder responder) : responder_(std::move(responder)) {}

void MockBackend::load_fixtures(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::config_error, "mock fixture directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt")
            continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        add_response(entry.path().stem().string(), ss.str());
    }
}

void MockBackend::add_response(const std::string& hash, std::string response)
{
    std::lock_guard lock(mutex_);
    canned_[hash] = std::move(response);
}

void MockBackend::set_responder(Responder responder)
{
    std::lock_guard lock(mutex_);
    responder_ = std::move(responder);
}

void MockBackend::fail_next(int n)
{
    std::lock_guard lock(mutex_);
    fail_next_ = n;
}

std::string MockBackend::complete(const ChatRequest& request)
{
    Responder responder;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
        if (fail_next_ > 0) {
            --fail_next_;
            throw TransportError("mock transport failure");
        }
        auto it = canned_.find(prompt_hash(request.prompt));
        if (it != canned_.end())
            return it->second;
        responder = responder_;
    }
    if (!responder)
        throw Error(ErrorCode::backend_unreachable, "mock backend has no response for prompt " +
                                                        prompt_hash(request.prompt).substr(0, 12));
    return responder(request);
}

std::size_t MockBackend::call_count() const
{
    std::lock_guard lock(mutex_);
    return requests_.size();
}

std::vector<ChatRequest> MockBackend::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

// ---------------------------------------------------------------------------
// Scripted mock

namespace {

std::set<std::string> keywords(std::string_view text)
{
    static const std::set<std::string> stop = {
        "the", "and", "for", "this", "that", "with", "you", "are", "not", "but", "can", "should", "here",
        "from", "was", "will", "its", "into", "then", "than", "there", "please", "line", "code", "use",
    };
    std::set<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.size() >= 3 && !stop.count(word))
            out.insert(word);
        word.clear();
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '_')
            word += static_cast<char>(std::tolower(u));
        else
            flush();
    }
    flush();
    return out;
}

struct Rule {
    std::regex pattern;
    std::string category;
    std::string body;  // "{}" is replaced by the matched text
};

const std::vector<Rule>& generation_rules()
{
    static const std::vector<Rule> rules = {
        {std::regex(R"(TODO|FIXME|XXX)"), "maintainability",
         "Resolve the `{}` left on this line or link it to a tracked issue before merging; otherwise the "
         "unfinished path ships silently."},
        {std::regex(R"(catch\s*\(\s*\.\.\.\s*\)|except\s*:|except\s+Exception)"), "bug",
         "`{}` catches every exception and hides the failure; catch the specific error type and log or "
         "rethrow it, otherwise real errors are silently swallowed."},
        {std::regex(R"((password|secret|api_key|token)\s*=\s*["'])", std::regex::icase), "security",
         "Do not hard-code the `{}` credential here; load it from configuration or the environment, "
         "otherwise it leaks through version control."},
        {std::regex(R"(\beval\()"), "security",
         "Avoid `{}` on data that can come from users; parse the value explicitly, otherwise this allows "
         "arbitrary code execution."},
        {std::regex(R"(\btime\.sleep\(|Thread\.sleep\(|\bsleep\()"), "performance",
         "Remove the fixed `{}` from this path; it adds latency to every call. Use an event or a retry "
         "with backoff instead."},
        {std::regex(R"([=!]=\s*None)"), "readability",
         "Compare with `is None` instead of `{}`; equality can be overridden and gives surprising "
         "results."},
        {std::regex(R"(\bprint\(|console\.log\(|\bprintf\(|System\.out\.print)"), "readability",
         "Remove the debug output `{}` or route it through the project logger; it will spam production "
         "logs."},
    };
    return rules;
}

std::string replace_placeholder(std::string text, const std::string& value)
{
    auto pos = text.find("{}");
    if (pos != std::string::npos)
        text.replace(pos, 2, value);
    return text;
}

CodeChange parse_rendered_change(const std::string& text)
{
    try {
        return diff::parse_unified_diff(text);
    } catch (const Error&) {
    }
    std::string cleaned;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("Binary file ", 0) == 0 || line.rfind("[diff truncated", 0) == 0)
            continue;
        cleaned += line + "\n";
    }
    try {
        return diff::parse_unified_diff(cleaned);
    } catch (const Error&) {
        return {};
    }
}

std::string respond_generation(const std::string& prompt_text)
{
    auto code = prompt::find_section(prompt_text, "code_change");
    const bool guided = prompt::find_section(prompt_text, "guidelines_code").has_value();
    json comments = json::array();
    if (code) {
        auto change = parse_rendered_change(*code);
        for (const auto& f : change.files) {
            if (f.new_path.empty())
                continue;
            for (const auto& h : f.hunks) {
                int n = h.new_start;
                int first_added = 0;
                bool hit = false;
                for (const auto& l : h.lines) {
                    if (l.kind == LineKind::removed)
                        continue;
                    if (l.kind == LineKind::added) {
                        if (!first_added)
                            first_added = n;
                        for (const auto& rule : generation_rules()) {
                            std::smatch m;
                            if (std::regex_search(l.text, m, rule.pattern)) {
                                // Without guidelines the comment drifts to the top of the hunk.
                                int anchor = guided ? n : h.new_start;
                                comments.push_back({{"file_path", f.new_path},
                                                    {"line", anchor},
                                                    {"body", replace_placeholder(rule.body, m.size() > 1 && m[1].matched ? m[1].str() : m.str())},
                                                    {"category", rule.category}});
                                hit = true;
                                break;
                            }
                        }
                    }
                    ++n;
                }
                if (!hit && first_added)
                    comments.push_back(
                        {{"file_path", f.new_path}, {"line", first_added}, {"body", "Looks good to me!"}, {"category", "other"}});
            }
        }
    }
    return "Here is my review.\n\n```json\n" + comments.dump(2) + "\n```\n";
}

std::string respond_fact(const std::string& prompt_text)
{
    auto code = prompt::find_section(prompt_text, "code_change");
    auto candidates = prompt::find_section(prompt_text, "candidates");
    auto change = code ? parse_rendered_change(*code) : CodeChange{};
    json verdicts = json::array();
    auto parsed = json::parse(candidates.value_or("[]"), nullptr, false);
    if (parsed.is_array()) {
        for (const auto& c : parsed) {
            diff::LineAnchor anchor{c.value("file_path", ""), c.value("line", 0)};
            bool ok = diff::anchor_in_diff(anchor, change);
            verdicts.push_back({{"comment_id", c.value("comment_id", "")},
                                {"verdict", ok},
                                {"rationale", ok ? "anchored inside the change" : "refers to code outside the change"}});
        }
    }
    return "```json\n" + verdicts.dump(2) + "\n```\n";
}

bool looks_noisy(std::string_view text)
{
    static const std::regex lexicon(
        R"(\blgtm\b|looks good|good job|great (work|job)|nice|well done|thanks|thank you|ship it|\bhaha\b|\blol\b|:\)|:D|\xF0\x9F\x91\x8D|\xF0\x9F\x98\x82)",
        std::regex::icase);
    std::string s(text);
    if (!std::regex_search(s, lexicon))
        return false;
    if (s.find('`') != std::string::npos)
        return false;
    return std::count(s.begin(), s.end(), ' ') < 8;
}

}  // namespace

int keyword_similarity(std::string_view a, std::string_view b)
{
    auto ka = keywords(a);
    auto kb = keywords(b);
    if (ka.empty() || kb.empty())
        return a == b ? 4 : 1;
    std::size_t common = 0;
    for (const auto& w : ka)
        common += kb.count(w);
    const double jaccard = static_cast<double>(common) / static_cast<double>(ka.size() + kb.size() - common);
    if (jaccard >= 0.8)
        return 4;
    if (jaccard >= 0.4)
        return 3;
    if (jaccard >= 0.15)
        return 2;
    return 1;
}

std::string scripted_response(const ChatRequest& request)
{
    const auto& p = request.prompt;
    if (prompt::find_section(p, "candidates"))
        return respond_fact(p);
    auto generated = prompt::find_section(p, "generated_comment");
    auto human = prompt::find_section(p, "human_comment");
    if (generated && human)
        return "```json\n" + json{{"score", keyword_similarity(*generated, *human)}, {"rationale", "keyword overlap"}}.dump() +
               "\n```\n";
    if (auto comment = prompt::find_section(p, "comment"))
        return "```json\n" + json{{"noisy", looks_noisy(*comment)}, {"rationale", "lexicon"}}.dump() + "\n```\n";
    if (prompt::find_section(p, "task"))
        return respond_generation(p);
    return "I cannot help with that.";
}

std::unique_ptr<MockBackend> make_scripted_mock(const std::optional<std::filesystem::path>& fixtures)
{
    auto mock = std::make_unique<MockBackend>(scripted_response);
    if (fixtures && std::filesystem::is_directory(*fixtures))
        mock->load_fixtures(*fixtures);
    return mock;
}

// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::complete(const ChatRequest& request)
{
    http::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    json body{{"model", request.model_tag},
              {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output}};
    auto response = http::post_json(config_.base_url, config_.path, body.dump(), headers, config_.timeout);
    if (response.transport_failed())
        throw TransportError("chat backend " + config_.base_url + ": " + response.transport_error);
    if (response.status == 429 || response.status >= 500)
        throw TransportError("chat backend returned HTTP " + std::to_string(response.status));
    if (response.status != 200)
        throw Error(ErrorCode::backend_unreachable, "chat backend returned HTTP " + std::to_string(response.status));
    auto parsed = json::parse(response.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty())
        throw Error(ErrorCode::backend_unreachable, "chat backend response has no choices");
    return parsed["choices"][0]["message"].value("content", "");
}

}  // namespace revkit::llm
