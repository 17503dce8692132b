#include "revkit/model_json.hpp"

#include "revkit/diff.hpp"

namespace revkit {

using nlohmann::json;

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v)
{
    j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        v.reset();
    else
        v = it->get<T>();
}

std::optional<Timestamp> optional_ts(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    return parse_timestamp(it->get<std::string>());
}

}  // namespace

void to_json(json& j, const IssueSummary& v)
{
    j = json{{"key", v.key}, {"summary", v.summary}, {"description", v.description}};
}

void from_json(const json& j, IssueSummary& v)
{
    v.key = j.at("key").get<std::string>();
    v.summary = j.value("summary", "");
    v.description = j.value("description", "");
}

void to_json(json& j, const ReviewComment& v)
{
    j = json{{"comment_id", v.comment_id},
             {"origin", to_string(v.origin)},
             {"file_path", v.file_path},
             {"line", v.line},
             {"body", v.body}};
    put_optional(j, "category", v.category);
    j["state"] = to_string(v.state);
    if (v.host_comment_id)
        j["host_comment_id"] = *v.host_comment_id;
    if (v.note)
        j["note"] = *v.note;
}

void from_json(const json& j, ReviewComment& v)
{
    v.comment_id = j.at("comment_id").get<std::string>();
    v.origin = parse_origin(j.value("origin", "generated"));
    v.file_path = j.at("file_path").get<std::string>();
    v.line = j.at("line").get<int>();
    v.body = j.at("body").get<std::string>();
    get_optional(j, "category", v.category);
    v.state = parse_comment_state(j.value("state", "candidate"));
    get_optional(j, "host_comment_id", v.host_comment_id);
    get_optional(j, "note", v.note);
}

void to_json(json& j, const PullRequestContext& v)
{
    j = json{{"pr_id", v.pr_id},
             {"repo_id", v.repo_id},
             {"title", v.title},
             {"description", v.description},
             {"branch", v.branch},
             {"issue_refs", v.issue_refs},
             {"change", diff::serialize(v.change)},
             {"source_commit", v.source_commit},
             {"created_at", format_timestamp(v.created_at)},
             {"merged_at", v.merged_at ? json(format_timestamp(*v.merged_at)) : json(nullptr)},
             {"change_truncated", v.change_truncated},
             {"degraded", v.degraded},
             {"warnings", v.warnings}};
}

void from_json(const json& j, PullRequestContext& v)
{
    v.pr_id = j.at("pr_id").get<std::string>();
    v.repo_id = j.value("repo_id", "");
    v.title = j.at("title").get<std::string>();
    v.description = j.value("description", "");
    v.branch = j.value("branch", "");
    v.issue_refs = j.value("issue_refs", std::vector<IssueSummary>{});
    v.change = diff::parse_unified_diff(j.value("change", ""));
    v.source_commit = j.value("source_commit", "");
    v.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    v.merged_at = optional_ts(j, "merged_at");
    v.change_truncated = j.value("change_truncated", false);
    v.degraded = j.value("degraded", false);
    v.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(json& j, const PromptBundle& v)
{
    j = json::object();
    put_optional(j, "persona", v.persona);
    j["task"] = v.task;
    put_optional(j, "chain_of_thought", v.chain_of_thought);
    put_optional(j, "guidelines_code", v.guidelines_code);
    put_optional(j, "guidelines_test", v.guidelines_test);
    put_optional(j, "guidelines_comment", v.guidelines_comment);
    put_optional(j, "pr_info", v.pr_info);
    put_optional(j, "issue_info", v.issue_info);
    j["code_change"] = v.code_change;
}

void from_json(const json& j, PromptBundle& v)
{
    get_optional(j, "persona", v.persona);
    v.task = j.at("task").get<std::string>();
    get_optional(j, "chain_of_thought", v.chain_of_thought);
    get_optional(j, "guidelines_code", v.guidelines_code);
    get_optional(j, "guidelines_test", v.guidelines_test);
    get_optional(j, "guidelines_comment", v.guidelines_comment);
    get_optional(j, "pr_info", v.pr_info);
    get_optional(j, "issue_info", v.issue_info);
    v.code_change = j.at("code_change").get<std::string>();
}

void to_json(json& j, const ResolutionRecord& v)
{
    j = json{{"comment", v.comment},
             {"pr_id", v.pr_id},
             {"verdict", to_string(v.verdict)},
             {"resolving_commit", v.resolving_commit ? json(*v.resolving_commit) : json(nullptr)},
             {"observed_at", format_timestamp(v.observed_at)}};
}

void from_json(const json& j, ResolutionRecord& v)
{
    v.comment = j.at("comment").get<ReviewComment>();
    v.pr_id = j.at("pr_id").get<std::string>();
    v.verdict = parse_verdict(j.at("verdict").get<std::string>());
    get_optional(j, "resolving_commit", v.resolving_commit);
    v.observed_at = parse_timestamp(j.at("observed_at").get<std::string>());
}

void to_json(json& j, const AlignmentVerdict& v)
{
    j = json{{"generated", v.generated},
             {"matched_human", v.matched_human ? json(*v.matched_human) : json(nullptr)},
             {"location_match", v.location_match},
             {"similarity_score", v.similarity_score ? json(*v.similarity_score) : json(nullptr)},
             {"aligned", v.aligned}};
}

void from_json(const json& j, AlignmentVerdict& v)
{
    v.generated = j.at("generated").get<ReviewComment>();
    get_optional(j, "matched_human", v.matched_human);
    v.location_match = j.at("location_match").get<bool>();
    get_optional(j, "similarity_score", v.similarity_score);
    v.aligned = j.at("aligned").get<bool>();
}

std::vector<json> parse_json_lines(std::string_view text)
{
    std::vector<json> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos)
            out.push_back(json::parse(line));
        if (nl == std::string_view::npos)
            break;
        start = nl + 1;
    }
    return out;
}

std::string to_json_lines(const std::vector<json>& docs)
{
    std::string out;
    for (const auto& d : docs) {
        out += d.dump();
        out += '\n';
    }
    return out;
}

}  // namespace revkit
