#include "revkit/prompt.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "revkit/assets.hpp"
#include "revkit/context.hpp"

namespace revkit::prompt {

namespace {

std::string trimmed(std::string_view text)
{
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
        text.remove_suffix(1);
    return std::string(text);
}

std::optional<std::string> optional_text(bool enabled, const std::string& text)
{
    if (!enabled || text.empty())
        return std::nullopt;
    return text;
}

}  // namespace

GuidelineTexts default_guidelines()
{
    return {trimmed(assets::guidelines_code), trimmed(assets::guidelines_test), trimmed(assets::guidelines_comment)};
}

InstructionTexts default_instructions()
{
    return {trimmed(assets::persona), trimmed(assets::task), trimmed(assets::chain_of_thought)};
}

GuidelineTexts load_guidelines(const std::string& dir)
{
    auto texts = default_guidelines();
    auto load = [&](const char* name, std::string& target) {
        std::ifstream in(std::filesystem::path(dir) / name, std::ios::binary);
        if (!in)
            return;
        std::ostringstream ss;
        ss << in.rdbuf();
        target = trimmed(ss.str());
    };
    load("code.txt", texts.code);
    load("test.txt", texts.test);
    load("comment.txt", texts.comment);
    return texts;
}

std::string render_pr_info(const PullRequestContext& ctx)
{
    std::string out = "Title: " + ctx.title + "\n";
    if (!ctx.branch.empty())
        out += "Branch: " + ctx.branch + "\n";
    out += "\nDescription:\n";
    out += ctx.description.empty() ? std::string("(no description)") : ctx.description;
    return out;
}

std::string render_issue_info(const PullRequestContext& ctx)
{
    if (ctx.issue_refs.empty())
        return "(no linked issues)";
    std::string out;
    for (std::size_t i = 0; i < ctx.issue_refs.size(); ++i) {
        const auto& issue = ctx.issue_refs[i];
        if (i > 0)
            out += "\n\n";
        out += "Issue " + issue.key + ": " + issue.summary + "\n";
        out += issue.description.empty() ? std::string("(no description)") : issue.description;
    }
    return out;
}

PromptBundle build(const PullRequestContext& ctx, const PromptConfig& cfg)
{
    PromptBundle b;
    b.persona = optional_text(cfg.include_persona, cfg.instructions.persona);
    b.task = cfg.instructions.task;
    b.chain_of_thought = optional_text(cfg.include_cot, cfg.instructions.chain_of_thought);
    b.guidelines_code = optional_text(cfg.include_guidelines, cfg.guideline_texts.code);
    b.guidelines_test = optional_text(cfg.include_guidelines, cfg.guideline_texts.test);
    b.guidelines_comment = optional_text(cfg.include_guidelines, cfg.guideline_texts.comment);
    if (cfg.include_pr_info)
        b.pr_info = render_pr_info(ctx);
    if (cfg.include_issue_info)
        b.issue_info = render_issue_info(ctx);
    b.code_change = context::render_code_change(ctx.change, ctx.change_truncated);
    return b;
}

std::string fence(std::string_view name, std::string_view content)
{
    std::string out;
    out.reserve(content.size() + 2 * name.size() + 32);
    out += "<<SECTION ";
    out += name;
    out += ">>\n";
    out += content;
    out += "\n<<END ";
    out += name;
    out += ">>\n\n";
    return out;
}

std::string render(const PromptBundle& b)
{
    std::string out;
    auto emit = [&](std::string_view name, const std::optional<std::string>& content) {
        if (content)
            out += fence(name, *content);
    };
    emit("persona", b.persona);
    out += fence("task", b.task);
    emit("chain_of_thought", b.chain_of_thought);
    emit("guidelines_code", b.guidelines_code);
    emit("guidelines_test", b.guidelines_test);
    emit("guidelines_comment", b.guidelines_comment);
    emit("pr_info", b.pr_info);
    emit("issue_info", b.issue_info);
    out += fence("code_change", b.code_change);
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_sections(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> out;
    constexpr std::string_view open = "<<SECTION ";
    std::size_t pos = 0;
    while ((pos = text.find(open, pos)) != std::string_view::npos) {
        if (pos != 0 && text[pos - 1] != '\n') {
            pos += open.size();
            continue;
        }
        auto name_end = text.find(">>\n", pos + open.size());
        if (name_end == std::string_view::npos)
            break;
        std::string name(text.substr(pos + open.size(), name_end - pos - open.size()));
        auto body_start = name_end + 3;
        auto close = "\n<<END " + name + ">>\n";
        auto body_end = text.find(close, body_start);
        if (body_end == std::string_view::npos)
            break;
        out.emplace_back(name, std::string(text.substr(body_start, body_end - body_start)));
        pos = body_end + close.size();
    }
    return out;
}

std::optional<std::string> find_section(std::string_view text, std::string_view name)
{
    for (auto& [n, content] : parse_sections(text))
        if (n == name)
            return content;
    return std::nullopt;
}

}  // namespace revkit::prompt
