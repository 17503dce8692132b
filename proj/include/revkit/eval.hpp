#pragma once

// Offline evaluation: benchmark loading and curation, human-alignment
// metrics over repeated runs, and prompt/gate ablations.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revkit/pipeline.hpp"
#include "revkit/stats.hpp"

namespace revkit::eval {

struct BenchmarkCase {
    std::string case_id;
    PullRequestContext context;
    std::vector<ReviewComment> human_comments;
    bool has_pr_info = true;
    bool has_issue_info = true;
    int year = 0;
};

/// Human comments whose anchor falls outside the case's change.
std::vector<std::string> validate(const BenchmarkCase& c);

/// Directory layout: change.diff, context.json, human_comments.jsonl.
/// Throws Error(invalid_argument) if validate() reports anything.
BenchmarkCase load_case(const std::filesystem::path& dir);
void save_case(const BenchmarkCase& c, const std::filesystem::path& dir);
/// Every subdirectory of `root`, sorted by case id.
std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Curation

struct CurationConfig {
    int min_year = 2022;
    int max_year = 2025;
};

struct Funnel {
    int input = 0;
    int missing_context = 0;
    int noisy = 0;
    int out_of_window = 0;
    int output = 0;
    bool operator==(const Funnel&) const = default;
};

struct Curated {
    std::vector<BenchmarkCase> cases;
    Funnel funnel;
};

using NoiseJudge = std::function<bool(const std::string& body)>;

/// Drops, in order: cases missing PR or issue information, cases with any
/// noisy human comment, cases outside [min_year, max_year].
Curated curate(const std::vector<BenchmarkCase>& raw, const NoiseJudge& noisy, const CurationConfig& cfg = {});

NoiseJudge llm_noise_judge(llm::Gateway& gateway);

// ---------------------------------------------------------------------------
// Alignment

/// Location-matching human comments are scored by the similarity judge; the
/// best one wins on score, then line distance, then comment id. An
/// unparseable judge reply leaves the comment unjudgeable (no score).
AlignmentVerdict align(const ReviewComment& generated, const std::vector<ReviewComment>& humans,
                       llm::Gateway& gateway, int window = 10);

struct CaseOutcome {
    std::string case_id;
    std::string pr_id;
    bool skipped = false;
    std::string error;
    std::vector<AlignmentVerdict> verdicts;
    int unjudgeable = 0;
};

/// Fractions in [0,1].
struct RunMetrics {
    double hac = 0.0;
    double not_hac = 0.0;
    double pr_hac = 0.0;
    double pr_not_hac = 0.0;
    double hac_location_only = 0.0;
    int generated = 0;
    int aligned = 0;
    int location_matched = 0;
    int unjudgeable = 0;
    int prs = 0;
    int prs_aligned = 0;
    int prs_not_aligned = 0;
    int skipped = 0;
    bool operator==(const RunMetrics&) const = default;
};

/// Per-comment rates use every generated comment as denominator; per-PR
/// rates group cases by pr_id over cases that were not skipped.
RunMetrics aggregate(const std::vector<CaseOutcome>& outcomes);

struct MetricSummary {
    stats::Interval hac;
    stats::Interval not_hac;
    stats::Interval pr_hac;
    stats::Interval pr_not_hac;
    stats::Interval hac_location_only;
};

struct EvalReport {
    std::vector<RunMetrics> runs;
    MetricSummary summary;
    int repeats = 0;
    int cases = 0;
};

struct EvalOptions {
    int repeats = 5;
    int location_window = 10;
    /// Cases evaluated at once; 0 uses the gateway's concurrency cap.
    int workers = 0;
};

/// Runs the pipeline on every case `repeats` times and aligns the accepted
/// comments against the human comments.
EvalReport evaluate_alignment(const std::vector<BenchmarkCase>& benchmark, const pipeline::PipelineConfig& cfg,
                              llm::Gateway& gateway, gate::Classifier& classifier, const EvalOptions& opts = {});

/// One repeat, with per-case detail.
std::vector<CaseOutcome> evaluate_once(const std::vector<BenchmarkCase>& benchmark,
                                       const pipeline::PipelineConfig& cfg, llm::Gateway& gateway,
                                       gate::Classifier& classifier, const EvalOptions& opts = {});

// ---------------------------------------------------------------------------
// Ablation

struct Variant {
    std::string name;
    pipeline::PipelineConfig config;
};

/// control plus one treatment per removable component.
std::vector<Variant> standard_variants(const pipeline::PipelineConfig& control);

struct AblationRow {
    std::string name;
    MetricSummary treatment;
    /// control - treatment, in percentage points.
    double d_hac = 0.0;
    double d_not_hac = 0.0;
    double d_pr_hac = 0.0;
    double d_pr_not_hac = 0.0;
    double d_hac_location_only = 0.0;
};

struct AblationReport {
    MetricSummary control;
    std::vector<AblationRow> rows;
};

/// `variants` must contain one named "control".
AblationReport run_ablation(const std::vector<BenchmarkCase>& benchmark, const std::vector<Variant>& variants,
                            llm::Gateway& gateway, gate::Classifier& classifier, const EvalOptions& opts = {});

// ---------------------------------------------------------------------------
// Reports

nlohmann::json to_json(const Funnel& f);
nlohmann::json to_json(const RunMetrics& m);
nlohmann::json to_json(const MetricSummary& s);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const AblationReport& r);

std::string format_table(const EvalReport& r);
std::string format_table(const AblationReport& r);
std::string format_table(const Funnel& f);

}  // namespace revkit::eval
