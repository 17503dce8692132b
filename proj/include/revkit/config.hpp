#pragma once

// Configuration file (JSON) shared by the CLI and the service.
//
// {
//   "backend":    {"kind": "mock"|"http", "base_url", "path", "api_key_env", "fixtures", "timeout_s"},
//   "models":     {"generation", "fact_judge", "similarity_judge", "noise_judge"},
//   "retry":      {"attempts", "initial_backoff_ms", "multiplier"},
//   "budgets":    {"max_prompt_bytes", "max_output", "max_diff_bytes", "max_description_bytes",
//                  "max_issue_bytes", "max_concurrency"},
//   "thresholds": {"actionability", "fail_open", "location_window", "resolution_window"},
//   "prompt":     {"persona", "chain_of_thought", "guidelines", "pr_info", "issue_info", "guidelines_dir"},
//   "pipeline":   {"fact_check", "gate", "max_comments", "generation_temperature"},
//   "classifier": {"kind": "lexical"|"remote", "url"},
//   "service":    {"workers", "triggers": ["pr_created", "pr_updated"], "store",
//                  "host", "port", "secret_env"},
//   "curation":   {"min_year", "max_year"},
//   "eval":       {"repeats"}
// }
//
// Every key is optional. Unknown keys are rejected. Secrets only come from
// the environment variables named here.

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "revkit/eval.hpp"
#include "revkit/gate.hpp"
#include "revkit/llm.hpp"
#include "revkit/service.hpp"

namespace revkit::config {

struct BackendConfig {
    std::string kind = "mock";
    llm::HttpBackendConfig http;
    /// Canned responses for the mock (<sha256>.txt files).
    std::string fixtures;
};

struct ClassifierConfig {
    std::string kind = "lexical";
    std::string url;
};

struct AppConfig {
    BackendConfig backend;
    llm::GatewayConfig gateway;
    ClassifierConfig classifier;
    service::ServiceConfig service;
    int location_window = 10;
    int resolution_window = 0;
    int repeats = 5;
    eval::CurationConfig curation;
    std::string store_path;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string secret_env = "REVKIT_WEBHOOK_SECRET";
};

AppConfig defaults();
/// Throws Error(config_error).
AppConfig from_json(const nlohmann::json& j);
AppConfig load(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& cfg);

std::unique_ptr<llm::Backend> make_backend(const AppConfig& cfg, bool force_mock);
std::unique_ptr<gate::Classifier> make_classifier(const AppConfig& cfg);

}  // namespace revkit::config
