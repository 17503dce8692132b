#pragma once

// The review pipeline for one pull request: prompt, generation, parsing,
// de-duplication, factual check and actionability gate. Shared by the
// service and the evaluation harness.

#include <string>
#include <vector>

#include "revkit/gate.hpp"
#include "revkit/generation.hpp"
#include "revkit/llm.hpp"
#include "revkit/prompt.hpp"

namespace revkit::pipeline {

struct PipelineConfig {
    prompt::PromptConfig prompt;
    bool fact_check = true;
    bool gate = true;
    gate::GateConfig gate_config;
    int max_comments = generation::default_max_comments_per_pr;
};

struct Generated {
    std::string prompt;
    std::string raw_output;
    std::vector<ReviewComment> candidates;
    std::vector<generation::Discard> discards;
    /// Survivors of dedupe(), still candidates.
    std::vector<ReviewComment> deduped;
    int dedupe_dropped = 0;
};

/// Build, render, complete, parse, dedupe.
Generated generate(const PullRequestContext& ctx, const PipelineConfig& cfg, llm::Gateway& gateway,
                   const std::string& id_prefix = "c");

struct Checked {
    /// Every input comment, now fact_checked or rejected.
    std::vector<ReviewComment> comments;
    std::vector<std::string> warnings;
    int rejected = 0;
};

/// Runs the factual judge, or advances every comment when disabled.
Checked fact_check(const std::vector<ReviewComment>& candidates, const PullRequestContext& ctx,
                   const PipelineConfig& cfg, llm::Gateway& gateway);

struct Gated {
    /// Every fact_checked input, now gated or rejected.
    std::vector<ReviewComment> comments;
    std::vector<gate::ActionabilityScore> scores;
    std::vector<std::string> warnings;
    int rejected = 0;
};

/// Scores fact_checked comments; rejected inputs pass through untouched
/// and are not counted. When the gate is disabled every comment passes.
Gated apply_gate(const std::vector<ReviewComment>& comments, const PipelineConfig& cfg, gate::Classifier& classifier);

struct Result {
    Generated generated;
    Checked checked;
    Gated gated;
    /// Comments ready to post (state gated), in emission order.
    std::vector<ReviewComment> accepted;
};

Result run(const PullRequestContext& ctx, const PipelineConfig& cfg, llm::Gateway& gateway,
           gate::Classifier& classifier, const std::string& id_prefix = "c");

std::vector<ReviewComment> with_state(const std::vector<ReviewComment>& comments, CommentState state);

}  // namespace revkit::pipeline
