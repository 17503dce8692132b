#include "revkit/pipeline.hpp"

namespace revkit::pipeline {

Generated generate(const PullRequestContext& ctx, const PipelineConfig& cfg, llm::Gateway& gateway,
                   const std::string& id_prefix)
{
    Generated g;
    g.prompt = prompt::render(prompt::build(ctx, cfg.prompt));
    llm::ChatRequest req;
    req.prompt = g.prompt;
    req.model_tag = gateway.config().tags.generation;
    req.temperature = gateway.config().generation_temperature;
    req.max_output = gateway.config().max_output;
    g.raw_output = gateway.complete(req);
    auto parsed = generation::parse_candidates(g.raw_output, ctx.change, id_prefix);
    g.candidates = std::move(parsed.candidates);
    g.discards = std::move(parsed.discards);
    g.deduped = generation::dedupe(g.candidates, cfg.max_comments);
    g.dedupe_dropped = static_cast<int>(g.candidates.size() - g.deduped.size());
    return g;
}

Checked fact_check(const std::vector<ReviewComment>& candidates, const PullRequestContext& ctx,
                   const PipelineConfig& cfg, llm::Gateway& gateway)
{
    Checked out;
    if (!cfg.fact_check) {
        for (const auto& c : candidates)
            out.comments.push_back(transition(c, CommentState::fact_checked));
        return out;
    }
    auto judged = llm::judge_fact(candidates, ctx, gateway);
    out.comments = std::move(judged.comments);
    out.warnings = std::move(judged.warnings);
    for (const auto& c : out.comments)
        if (c.state == CommentState::rejected)
            ++out.rejected;
    return out;
}

Gated apply_gate(const std::vector<ReviewComment>& comments, const PipelineConfig& cfg, gate::Classifier& classifier)
{
    std::vector<ReviewComment> eligible;
    for (const auto& c : comments)
        if (c.state == CommentState::fact_checked)
            eligible.push_back(c);

    Gated out;
    if (!cfg.gate) {
        for (const auto& c : eligible)
            out.comments.push_back(transition(c, CommentState::gated));
        return out;
    }
    auto scored = gate::score(eligible, classifier, cfg.gate_config);
    out.comments = std::move(scored.comments);
    out.scores = std::move(scored.scores);
    out.warnings = std::move(scored.warnings);
    for (const auto& c : out.comments)
        if (c.state == CommentState::rejected)
            ++out.rejected;
    return out;
}

Result run(const PullRequestContext& ctx, const PipelineConfig& cfg, llm::Gateway& gateway,
           gate::Classifier& classifier, const std::string& id_prefix)
{
    Result r;
    r.generated = generate(ctx, cfg, gateway, id_prefix);
    r.checked = fact_check(r.generated.deduped, ctx, cfg, gateway);
    r.gated = apply_gate(r.checked.comments, cfg, classifier);
    for (const auto& c : r.gated.comments)
        if (c.state == CommentState::gated)
            r.accepted.push_back(c);
    return r;
}

std::vector<ReviewComment> with_state(const std::vector<ReviewComment>& comments, CommentState state)
{
    std::vector<ReviewComment> out;
    for (const auto& c : comments)
        if (c.state == state)
            out.push_back(c);
    return out;
}

}  // namespace revkit::pipeline
