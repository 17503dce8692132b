#pragma once

// Structured zero-shot prompt assembly: persona, task, chain of thought,
// three guideline documents, PR and issue information, and the code change,
// each as an optional (or mandatory) fenced section in a fixed order.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revkit/model.hpp"

namespace revkit::prompt {

struct GuidelineTexts {
    std::string code;
    std::string test;
    std::string comment;
};

/// Instruction texts for the fixed components.
struct InstructionTexts {
    std::string persona;
    std::string task;
    std::string chain_of_thought;
};

GuidelineTexts default_guidelines();
InstructionTexts default_instructions();

/// Reads code.txt, test.txt and comment.txt from `dir`, keeping the default
/// for any file that is missing.
GuidelineTexts load_guidelines(const std::string& dir);

struct PromptConfig {
    bool include_persona = true;
    bool include_cot = true;
    bool include_guidelines = true;
    bool include_pr_info = true;
    bool include_issue_info = true;
    GuidelineTexts guideline_texts = default_guidelines();
    InstructionTexts instructions = default_instructions();

    bool operator==(const PromptConfig&) const = default;
};

/// Section names in rendering order.
inline constexpr std::string_view section_order[] = {
    "persona",         "task",    "chain_of_thought", "guidelines_code", "guidelines_test",
    "guidelines_comment", "pr_info", "issue_info",       "code_change",
};

/// Assembles the bundle for one pull request. Task and code change are
/// always present; the other sections follow the config toggles. A guideline
/// document with empty text is omitted even when guidelines are enabled.
PromptBundle build(const PullRequestContext& ctx, const PromptConfig& cfg);

/// Deterministic text: "<<SECTION name>>\n<content>\n<<END name>>\n\n" per
/// present section, in section_order.
std::string render(const PromptBundle& bundle);

/// The fenced block for one section, exactly as render() emits it.
std::string fence(std::string_view name, std::string_view content);

/// Inverse of render(): (name, content) pairs in order of appearance.
std::vector<std::pair<std::string, std::string>> parse_sections(std::string_view text);

/// Content of one named section from rendered text, if present.
std::optional<std::string> find_section(std::string_view text, std::string_view name);

std::string render_pr_info(const PullRequestContext& ctx);
std::string render_issue_info(const PullRequestContext& ctx);

}  // namespace revkit::prompt
