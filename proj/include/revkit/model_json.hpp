#pragma once

// JSON schema for the domain types. Field names are snake_case and match the
// struct members; enums serialize as their lowercase names and timestamps as
// ISO-8601 UTC strings. CodeChange is carried as unified diff text.

#include <nlohmann/json.hpp>

#include "revkit/model.hpp"

namespace revkit {

void to_json(nlohmann::json& j, const IssueSummary& v);
void from_json(const nlohmann::json& j, IssueSummary& v);

void to_json(nlohmann::json& j, const ReviewComment& v);
void from_json(const nlohmann::json& j, ReviewComment& v);

void to_json(nlohmann::json& j, const PullRequestContext& v);
void from_json(const nlohmann::json& j, PullRequestContext& v);

void to_json(nlohmann::json& j, const PromptBundle& v);
void from_json(const nlohmann::json& j, PromptBundle& v);

void to_json(nlohmann::json& j, const ResolutionRecord& v);
void from_json(const nlohmann::json& j, ResolutionRecord& v);

void to_json(nlohmann::json& j, const AlignmentVerdict& v);
void from_json(const nlohmann::json& j, AlignmentVerdict& v);

/// Reads one JSON document per non-blank line.
std::vector<nlohmann::json> parse_json_lines(std::string_view text);
std::string to_json_lines(const std::vector<nlohmann::json>& docs);

}  // namespace revkit
