#include "revkit/gate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revkit/http.hpp"

namespace revkit::gate {

using nlohmann::json;

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> words_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

std::string strip_punct(std::string w)
{
    auto is_p = [](unsigned char c) { return !std::isalnum(c) && c != '_' && c != '\''; };
    while (!w.empty() && is_p(static_cast<unsigned char>(w.back())))
        w.pop_back();
    while (!w.empty() && is_p(static_cast<unsigned char>(w.front())))
        w.erase(w.begin());
    return lower(w);
}

bool matches(const std::regex& re, const std::string& text) { return std::regex_search(text, re); }

const std::vector<std::string>& imperative_verbs()
{
    static const std::vector<std::string> verbs = {
        "add",      "avoid",    "cache",   "call",     "catch",   "change",   "check",    "clear",
        "close",    "compare",  "consider", "convert", "declare", "delete",   "document", "drop",
        "ensure",   "escape",   "extract", "fix",      "free",    "guard",    "handle",   "initialize",
        "inline",   "introduce", "keep",   "limit",    "load",    "lock",     "log",      "make",
        "mark",     "move",     "pass",    "prefer",   "raise",   "register", "release",  "remove",
        "rename",   "replace",  "reset",   "resolve",  "restore", "return",   "reuse",    "sanitize",
        "simplify", "split",    "store",   "switch",   "test",    "throw",    "update",   "use",
        "validate", "wrap",     "write",   "guard",    "pin",     "bound",    "clamp",    "reject",
    };
    return verbs;
}

}  // namespace

LexicalFeatures LexicalBaselineClassifier::features(const std::string& body)
{
    static const std::regex code_re(
        R"(`|\b\w+\(\)|\b[A-Za-z]+_[A-Za-z0-9_]+\b|\b[a-z]+[A-Z][A-Za-z0-9]*\b|\b\w+\.\w+\(|::|->)");
    static const std::regex consequence_re(
        R"(\b(because|otherwise|so that|which (will|would|can)|will (cause|break|fail|crash|leak)|causes?|leads? to|leaks?|crash(es)?|breaks?|race|deadlock|overflows?|null|undefined|fails?|failures?|exceptions?|security|injection|latency|slow(er)?|wrong|incorrect|bugs?|silently|vulnerab\w*|out of bounds|data loss)\b)",
        std::regex::icase);
    static const std::regex praise_re(
        R"(\b(good job|great( work| job)?|nice|lgtm|looks good|well done|thanks|thank you|awesome|perfect|love (this|it)|cool)\b|\xF0\x9F\x91\x8D)",
        std::regex::icase);
    static const std::regex nit_re(
        R"(\b(blank line|empty line|whitespace|indentation|indent|trailing (space|spaces|comma)|spacing|extra space|newline|formatting|typo|line length)\b)",
        std::regex::icase);
    static const std::regex vague_re(
        R"(\b(needs? improvement|could be (better|improved|cleaner)|not (sure|ideal|great)|(is|was) this the best|best way|rethink|hmm+|something similar|another project|clean (this )?up|feels? (off|wrong))\b)",
        std::regex::icase);

    LexicalFeatures f;
    auto ws = words_of(body);
    f.words = static_cast<int>(ws.size());
    f.code_span = matches(code_re, body);
    f.consequence = matches(consequence_re, body);

    std::size_t lead = 0;
    if (lead < ws.size() && strip_punct(ws[lead]) == "please")
        ++lead;
    if (lead + 1 < ws.size()) {
        auto a = strip_punct(ws[lead]);
        auto b = strip_punct(ws[lead + 1]);
        if ((a == "you" || a == "we") && (b == "should" || b == "must"))
            lead += 2;
    }
    if (lead < ws.size()) {
        auto verb = strip_punct(ws[lead]);
        const auto& verbs = imperative_verbs();
        f.imperative_lead = std::find(verbs.begin(), verbs.end(), verb) != verbs.end();
    }

    std::string trimmed = body;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
        trimmed.pop_back();
    if (!trimmed.empty() && trimmed.back() == '?') {
        auto inner = trimmed.substr(0, trimmed.size() - 1);
        f.question_only = inner.find_first_of("!?") == std::string::npos && inner.find(". ") == std::string::npos;
    }
    f.praise_only = matches(praise_re, body) && !f.code_span && !f.imperative_lead && !f.consequence;
    f.formatting_nit = matches(nit_re, body) && !f.consequence;
    f.vague = matches(vague_re, body);
    return f;
}

double LexicalBaselineClassifier::logit(const LexicalFeatures& f)
{
    double z = -1.0;
    if (f.code_span)
        z += 1.5;
    if (f.imperative_lead)
        z += 1.0;
    if (f.consequence)
        z += 1.0;
    if (f.words >= 12)
        z += 0.5;
    if (f.question_only)
        z -= 1.5;
    if (f.praise_only)
        z -= 3.0;
    if (f.formatting_nit)
        z -= 2.0;
    if (f.vague)
        z -= 1.5;
    if (f.words <= 5)
        z -= 1.0;
    return z;
}

double LexicalBaselineClassifier::probability(const std::string& body)
{
    return 1.0 / (1.0 + std::exp(-logit(features(body))));
}

std::vector<double> LexicalBaselineClassifier::probabilities(const std::vector<std::string>& texts)
{
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& t : texts)
        out.push_back(probability(t));
    return out;
}

// ---------------------------------------------------------------------------

RemoteClassifier::RemoteClassifier(std::string base_url, llm::RetryPolicy retry, llm::Sleeper sleep,
                                   std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), retry_(retry), sleep_(std::move(sleep)), timeout_(timeout)
{
}

std::string RemoteClassifier::post(const std::string& path, const std::string& body)
{
    const int attempts = std::max(1, retry_.attempts);
    auto backoff = retry_.initial_backoff;
    std::string last;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto r = http::post_json(base_url_, path, body, {}, timeout_);
        if (!r.transport_failed() && r.status == 200)
            return r.body;
        if (!r.transport_failed() && r.status != 429 && r.status < 500)
            throw Error(ErrorCode::classifier_unavailable,
                        base_url_ + path + " returned HTTP " + std::to_string(r.status) + ": " + r.body);
        last = r.transport_failed() ? r.transport_error : "HTTP " + std::to_string(r.status);
        if (attempt < attempts && sleep_)
            sleep_(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier));
    }
    throw Error(ErrorCode::classifier_unavailable, base_url_ + path + ": " + last);
}

std::vector<double> RemoteClassifier::probabilities(const std::vector<std::string>& texts)
{
    json req{{"texts", texts}};
    auto parsed = json::parse(post("/score", req.dump()), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("probabilities") ||
        !parsed["probabilities"].is_array())
        throw Error(ErrorCode::classifier_unavailable, "malformed /score reply");
    const auto& ps = parsed["probabilities"];
    if (ps.size() != texts.size())
        throw Error(ErrorCode::classifier_unavailable, "/score returned " + std::to_string(ps.size()) +
                                                           " probabilities for " + std::to_string(texts.size()) +
                                                           " texts");
    std::vector<double> out;
    for (const auto& p : ps) {
        if (!p.is_number())
            throw Error(ErrorCode::classifier_unavailable, "non-numeric probability in /score reply");
        double v = p.get<double>();
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(ErrorCode::classifier_unavailable, "probability outside [0,1] in /score reply");
        out.push_back(v);
    }
    return out;
}

RemoteClassifier::Health RemoteClassifier::healthz()
{
    auto parsed = json::parse(post("/healthz", "{}"), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("status"))
        throw Error(ErrorCode::classifier_unavailable, "malformed /healthz reply");
    return {parsed.value("status", ""), parsed.value("model_version", "")};
}

// ---------------------------------------------------------------------------

GateResult score(const std::vector<ReviewComment>& comments, Classifier& classifier, const GateConfig& config)
{
    if (!(config.threshold >= 0.0 && config.threshold <= 1.0))
        throw Error(ErrorCode::invalid_argument, "threshold must lie in [0,1]");
    for (const auto& c : comments)
        if (c.state != CommentState::fact_checked)
            throw Error(ErrorCode::invalid_argument, "gate expects fact_checked comments: " + c.comment_id);

    GateResult result;
    if (comments.empty())
        return result;

    std::vector<std::string> texts;
    for (const auto& c : comments)
        texts.push_back(c.body);

    std::vector<double> probs;
    bool fallback = false;
    try {
        probs = classifier.probabilities(texts);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::classifier_unavailable)
            throw;
        fallback = true;
        probs.assign(comments.size(), config.fail_open ? 1.0 : 0.0);
        result.warnings.push_back(std::string("classifier-unavailable: ") + (config.fail_open ? "failing open" : "failing closed") +
                                  ": " + e.what());
    }

    for (std::size_t i = 0; i < comments.size(); ++i) {
        ActionabilityScore s;
        s.comment_id = comments[i].comment_id;
        s.probability = probs[i];
        s.threshold_used = config.threshold;
        s.passed = s.probability >= s.threshold_used;
        s.fallback = fallback;
        auto next = transition(comments[i], s.passed ? CommentState::gated : CommentState::rejected);
        if (fallback) {
            next.note = config.fail_open ? "gate failed open" : "gate failed closed";
        } else if (!s.passed) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "rejected by gate: p=%.3f < %.3f", s.probability, s.threshold_used);
            next.note = buf;
        }
        result.comments.push_back(std::move(next));
        result.scores.push_back(s);
    }
    return result;
}

std::vector<TrainingPair> export_training_pairs(const std::vector<ResolutionRecord>& records, Timestamp cutoff)
{
    std::vector<TrainingPair> out;
    for (const auto& r : records) {
        if (r.verdict == Verdict::indeterminate || r.observed_at >= cutoff)
            continue;
        out.push_back({r.comment.body, r.verdict == Verdict::resolved ? 1 : 0});
    }
    if (out.empty())
        throw Error(ErrorCode::empty_after_filtering, "no resolved/unresolved records before " + format_timestamp(cutoff));
    return out;
}

std::string to_json_lines(const std::vector<TrainingPair>& pairs)
{
    std::string out;
    for (const auto& p : pairs)
        out += json{{"text", p.text}, {"label", p.label}}.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    return out;
}

std::vector<TrainingPair> training_pairs_from_json_lines(std::string_view text)
{
    std::vector<TrainingPair> out;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        if (line.empty())
            continue;
        auto j = json::parse(line);
        out.push_back({j.at("text").get<std::string>(), j.at("label").get<int>()});
    }
    return out;
}

}  // namespace revkit::gate
