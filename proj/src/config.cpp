#include "revkit/config.hpp"

#include <fstream>
#include <sstream>

namespace revkit::config {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw Error(ErrorCode::config_error, where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || k == a;
        if (!ok)
            throw Error(ErrorCode::config_error, "unknown key " + where + "." + k);
    }
}

template <typename T>
void read(const json& j, const char* key, T& target)
{
    if (!j.contains(key))
        return;
    try {
        target = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, std::string("bad value for ") + key + ": " + e.what());
    }
}

}  // namespace

AppConfig defaults() { return AppConfig{}; }

AppConfig from_json(const json& j)
{
    AppConfig cfg;
    check_keys(j, "config",
               {"backend", "models", "retry", "budgets", "thresholds", "prompt", "pipeline", "classifier", "service",
                "curation", "eval"});

    if (j.contains("backend")) {
        const auto& b = j["backend"];
        check_keys(b, "backend", {"kind", "base_url", "path", "api_key_env", "fixtures", "timeout_s"});
        read(b, "kind", cfg.backend.kind);
        read(b, "base_url", cfg.backend.http.base_url);
        read(b, "path", cfg.backend.http.path);
        read(b, "api_key_env", cfg.backend.http.api_key_env);
        read(b, "fixtures", cfg.backend.fixtures);
        int timeout = static_cast<int>(cfg.backend.http.timeout.count());
        read(b, "timeout_s", timeout);
        cfg.backend.http.timeout = std::chrono::seconds(timeout);
        if (cfg.backend.kind != "mock" && cfg.backend.kind != "http")
            throw Error(ErrorCode::config_error, "backend.kind must be mock or http");
    }
    if (j.contains("models")) {
        const auto& m = j["models"];
        check_keys(m, "models", {"generation", "fact_judge", "similarity_judge", "noise_judge"});
        read(m, "generation", cfg.gateway.tags.generation);
        read(m, "fact_judge", cfg.gateway.tags.fact_judge);
        read(m, "similarity_judge", cfg.gateway.tags.similarity_judge);
        read(m, "noise_judge", cfg.gateway.tags.noise_judge);
    }
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        check_keys(r, "retry", {"attempts", "initial_backoff_ms", "multiplier"});
        read(r, "attempts", cfg.gateway.retry.attempts);
        long long ms = cfg.gateway.retry.initial_backoff.count();
        read(r, "initial_backoff_ms", ms);
        cfg.gateway.retry.initial_backoff = std::chrono::milliseconds(ms);
        read(r, "multiplier", cfg.gateway.retry.multiplier);
    }
    if (j.contains("budgets")) {
        const auto& b = j["budgets"];
        check_keys(b, "budgets",
                   {"max_prompt_bytes", "max_output", "max_diff_bytes", "max_description_bytes", "max_issue_bytes",
                    "max_concurrency"});
        read(b, "max_prompt_bytes", cfg.gateway.max_prompt_bytes);
        read(b, "max_output", cfg.gateway.max_output);
        read(b, "max_concurrency", cfg.gateway.max_concurrency);
        read(b, "max_diff_bytes", cfg.service.budget.max_diff_bytes);
        read(b, "max_description_bytes", cfg.service.budget.max_description_bytes);
        read(b, "max_issue_bytes", cfg.service.budget.max_issue_bytes);
    }
    if (j.contains("thresholds")) {
        const auto& t = j["thresholds"];
        check_keys(t, "thresholds", {"actionability", "fail_open", "location_window", "resolution_window"});
        read(t, "actionability", cfg.service.pipeline.gate_config.threshold);
        read(t, "fail_open", cfg.service.pipeline.gate_config.fail_open);
        read(t, "location_window", cfg.location_window);
        read(t, "resolution_window", cfg.resolution_window);
    }
    if (j.contains("prompt")) {
        const auto& p = j["prompt"];
        check_keys(p, "prompt", {"persona", "chain_of_thought", "guidelines", "pr_info", "issue_info", "guidelines_dir"});
        auto& pc = cfg.service.pipeline.prompt;
        read(p, "persona", pc.include_persona);
        read(p, "chain_of_thought", pc.include_cot);
        read(p, "guidelines", pc.include_guidelines);
        read(p, "pr_info", pc.include_pr_info);
        read(p, "issue_info", pc.include_issue_info);
        if (p.contains("guidelines_dir"))
            pc.guideline_texts = prompt::load_guidelines(p["guidelines_dir"].get<std::string>());
    }
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        check_keys(p, "pipeline", {"fact_check", "gate", "max_comments", "generation_temperature"});
        read(p, "fact_check", cfg.service.pipeline.fact_check);
        read(p, "gate", cfg.service.pipeline.gate);
        read(p, "max_comments", cfg.service.pipeline.max_comments);
        read(p, "generation_temperature", cfg.gateway.generation_temperature);
    }
    if (j.contains("classifier")) {
        const auto& c = j["classifier"];
        check_keys(c, "classifier", {"kind", "url"});
        read(c, "kind", cfg.classifier.kind);
        read(c, "url", cfg.classifier.url);
        if (cfg.classifier.kind != "lexical" && cfg.classifier.kind != "remote")
            throw Error(ErrorCode::config_error, "classifier.kind must be lexical or remote");
    }
    if (j.contains("service")) {
        const auto& s = j["service"];
        check_keys(s, "service", {"workers", "triggers", "store", "host", "port", "secret_env"});
        read(s, "workers", cfg.service.workers);
        if (s.contains("triggers")) {
            cfg.service.triggers.clear();
            for (const auto& t : s["triggers"]) {
                try {
                    cfg.service.triggers.insert(service::parse_event_kind(t.get<std::string>()));
                } catch (const Error& e) {
                    throw Error(ErrorCode::config_error, e.what());
                }
            }
        }
        read(s, "store", cfg.store_path);
        read(s, "host", cfg.host);
        read(s, "port", cfg.port);
        read(s, "secret_env", cfg.secret_env);
    }
    if (j.contains("curation")) {
        const auto& c = j["curation"];
        check_keys(c, "curation", {"min_year", "max_year"});
        read(c, "min_year", cfg.curation.min_year);
        read(c, "max_year", cfg.curation.max_year);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        check_keys(e, "eval", {"repeats"});
        read(e, "repeats", cfg.repeats);
    }

    const auto& g = cfg.service.pipeline.gate_config;
    if (!(g.threshold >= 0.0 && g.threshold <= 1.0))
        throw Error(ErrorCode::config_error, "thresholds.actionability must lie in [0,1]");
    if (cfg.location_window < 0 || cfg.resolution_window < 0)
        throw Error(ErrorCode::config_error, "windows must be non-negative");
    if (cfg.service.workers < 1 || cfg.gateway.max_concurrency < 1)
        throw Error(ErrorCode::config_error, "workers and max_concurrency must be positive");
    if (cfg.backend.kind == "http" && cfg.backend.http.base_url.empty())
        throw Error(ErrorCode::config_error, "backend.base_url is required for the http backend");
    if (cfg.classifier.kind == "remote" && cfg.classifier.url.empty())
        throw Error(ErrorCode::config_error, "classifier.url is required for the remote classifier");
    return cfg;
}

AppConfig load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::config_error, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorCode::config_error, path.string() + " is not valid JSON");
    return from_json(j);
}

json to_json(const AppConfig& cfg)
{
    json triggers = json::array();
    for (auto k : cfg.service.triggers)
        triggers.push_back(service::to_string(k));
    const auto& pc = cfg.service.pipeline.prompt;
    return {
        {"backend",
         {{"kind", cfg.backend.kind},
          {"base_url", cfg.backend.http.base_url},
          {"path", cfg.backend.http.path},
          {"api_key_env", cfg.backend.http.api_key_env},
          {"fixtures", cfg.backend.fixtures},
          {"timeout_s", cfg.backend.http.timeout.count()}}},
        {"models",
         {{"generation", cfg.gateway.tags.generation},
          {"fact_judge", cfg.gateway.tags.fact_judge},
          {"similarity_judge", cfg.gateway.tags.similarity_judge},
          {"noise_judge", cfg.gateway.tags.noise_judge}}},
        {"retry",
         {{"attempts", cfg.gateway.retry.attempts},
          {"initial_backoff_ms", cfg.gateway.retry.initial_backoff.count()},
          {"multiplier", cfg.gateway.retry.multiplier}}},
        {"budgets",
         {{"max_prompt_bytes", cfg.gateway.max_prompt_bytes},
          {"max_output", cfg.gateway.max_output},
          {"max_concurrency", cfg.gateway.max_concurrency},
          {"max_diff_bytes", cfg.service.budget.max_diff_bytes},
          {"max_description_bytes", cfg.service.budget.max_description_bytes},
          {"max_issue_bytes", cfg.service.budget.max_issue_bytes}}},
        {"thresholds",
         {{"actionability", cfg.service.pipeline.gate_config.threshold},
          {"fail_open", cfg.service.pipeline.gate_config.fail_open},
          {"location_window", cfg.location_window},
          {"resolution_window", cfg.resolution_window}}},
        {"prompt",
         {{"persona", pc.include_persona},
          {"chain_of_thought", pc.include_cot},
          {"guidelines", pc.include_guidelines},
          {"pr_info", pc.include_pr_info},
          {"issue_info", pc.include_issue_info}}},
        {"pipeline",
         {{"fact_check", cfg.service.pipeline.fact_check},
          {"gate", cfg.service.pipeline.gate},
          {"max_comments", cfg.service.pipeline.max_comments},
          {"generation_temperature", cfg.gateway.generation_temperature}}},
        {"classifier", {{"kind", cfg.classifier.kind}, {"url", cfg.classifier.url}}},
        {"service",
         {{"workers", cfg.service.workers},
          {"triggers", triggers},
          {"store", cfg.store_path},
          {"host", cfg.host},
          {"port", cfg.port},
          {"secret_env", cfg.secret_env}}},
        {"curation", {{"min_year", cfg.curation.min_year}, {"max_year", cfg.curation.max_year}}},
        {"eval", {{"repeats", cfg.repeats}}},
    };
}

std::unique_ptr<llm::Backend> make_backend(const AppConfig& cfg, bool force_mock)
{
    if (force_mock || cfg.backend.kind == "mock") {
        std::optional<std::filesystem::path> fixtures;
        if (!cfg.backend.fixtures.empty())
            fixtures = cfg.backend.fixtures;
        return llm::make_scripted_mock(fixtures);
    }
    return std::make_unique<llm::HttpChatBackend>(cfg.backend.http);
}

std::unique_ptr<gate::Classifier> make_classifier(const AppConfig& cfg)
{
    if (cfg.classifier.kind == "remote")
        return std::make_unique<gate::RemoteClassifier>(cfg.classifier.url, cfg.gateway.retry);
    return std::make_unique<gate::LexicalBaselineClassifier>();
}

}  // namespace revkit::config
