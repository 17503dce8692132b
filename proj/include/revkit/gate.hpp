#pragma once

// Actionability gate: scores fact-checked comments and rejects the ones
// unlikely to lead to a code change.

#include <string>
#include <vector>

#include "revkit/llm.hpp"
#include "revkit/model.hpp"

namespace revkit::gate {

struct ActionabilityScore {
    std::string comment_id;
    double probability = 0.0;
    double threshold_used = 0.5;
    bool passed = false;
    /// Classifier was unavailable and the configured fallback decided.
    bool fallback = false;
    bool operator==(const ActionabilityScore&) const = default;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    /// One probability in [0,1] per text, same order. Safe to call
    /// concurrently. Throws Error(classifier_unavailable).
    virtual std::vector<double> probabilities(const std::vector<std::string>& texts) = 0;
    virtual std::string name() const = 0;
};

struct LexicalFeatures {
    bool code_span = false;
    bool imperative_lead = false;
    bool consequence = false;
    bool question_only = false;
    bool praise_only = false;
    bool formatting_nit = false;
    bool vague = false;
    int words = 0;
    bool operator==(const LexicalFeatures&) const = default;
};

/// Hand-set logistic model over lexical features.
///
///   bias -1.0
///   code span (backticks, call syntax, dotted or snake/camel identifiers) +1.5
///   imperative lead (optionally after "please" / "you should") +1.0
///   consequence marker ("otherwise", "because", "leak", "crash" ...) +1.0
///   at least 12 words +0.5
///   question-only body -1.5
///   praise-only body -3.0
///   formatting nit without a consequence -2.0
///   vague critique ("needs improvement" ...) -1.5
///   at most 5 words -1.0
///
/// probability = 1 / (1 + exp(-logit))
class LexicalBaselineClassifier : public Classifier {
public:
    static LexicalFeatures features(const std::string& body);
    static double logit(const LexicalFeatures& f);
    static double probability(const std::string& body);

    std::vector<double> probabilities(const std::vector<std::string>& texts) override;
    std::string name() const override { return "lexical-baseline"; }
};

/// Client for an external scorer:
///   POST /score   {"texts": [...]}  -> {"probabilities": [...]}
///   POST /healthz {}                -> {"status": ..., "model_version": ...}
/// Transport errors, 429 and 5xx are retried under `retry`; anything else
/// (including a malformed reply) is Error(classifier_unavailable).
class RemoteClassifier : public Classifier {
public:
    struct Health {
        std::string status;
        std::string model_version;
    };

    RemoteClassifier(std::string base_url, llm::RetryPolicy retry = {}, llm::Sleeper sleep = llm::real_sleeper(),
                     std::chrono::seconds timeout = std::chrono::seconds{30});

    std::vector<double> probabilities(const std::vector<std::string>& texts) override;
    Health healthz();
    std::string name() const override { return "remote:" + base_url_; }

private:
    std::string post(const std::string& path, const std::string& body);

    std::string base_url_;
    llm::RetryPolicy retry_;
    llm::Sleeper sleep_;
    std::chrono::seconds timeout_;
};

struct GateConfig {
    double threshold = 0.5;
    /// When the classifier is unavailable: pass everything (true) or reject
    /// everything (false). Either way the scores carry fallback = true.
    bool fail_open = true;
};

struct GateResult {
    std::vector<ActionabilityScore> scores;
    /// Inputs advanced to gated or rejected.
    std::vector<ReviewComment> comments;
    std::vector<std::string> warnings;
};

/// Comments must be in state fact_checked.
GateResult score(const std::vector<ReviewComment>& comments, Classifier& classifier, const GateConfig& config = {});

struct TrainingPair {
    std::string text;
    int label = 0;
    bool operator==(const TrainingPair&) const = default;
};

/// Resolved -> 1, unresolved -> 0; indeterminate records and records
/// observed at or after `cutoff` are skipped. Throws
/// Error(empty_after_filtering) when nothing remains.
std::vector<TrainingPair> export_training_pairs(const std::vector<ResolutionRecord>& records, Timestamp cutoff);

/// One {"text", "label"} object per line, UTF-8.
std::string to_json_lines(const std::vector<TrainingPair>& pairs);
std::vector<TrainingPair> training_pairs_from_json_lines(std::string_view text);

}  // namespace revkit::gate
