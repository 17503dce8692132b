#include "revkit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "revkit/diff.hpp"
#include "revkit/model_json.hpp"

namespace revkit::eval {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::invalid_argument, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::invalid_argument, "cannot write " + p.string());
    out << text;
}

}  // namespace

std::vector<std::string> validate(const BenchmarkCase& c)
{
    std::vector<std::string> out;
    for (const auto& h : c.human_comments) {
        if (h.origin != Origin::human)
            out.push_back(h.comment_id + ": not a human comment");
        if (!diff::anchor_in_diff(diff::anchor_of(h), c.context.change))
            out.push_back(h.comment_id + ": anchor " + h.file_path + ":" + std::to_string(h.line) +
                          " is outside the change");
    }
    return out;
}

BenchmarkCase load_case(const std::filesystem::path& dir)
{
    BenchmarkCase c;
    auto meta = json::parse(read_file(dir / "context.json"));
    auto ctx_json = meta;
    ctx_json["change"] = read_file(dir / "change.diff");
    c.context = ctx_json.get<PullRequestContext>();
    c.case_id = meta.value("case_id", dir.filename().string());
    c.has_pr_info = meta.value("has_pr_info", true);
    c.has_issue_info = meta.value("has_issue_info", true);
    c.year = meta.value("year", 0);
    for (const auto& j : parse_json_lines(read_file(dir / "human_comments.jsonl"))) {
        auto h = j.get<ReviewComment>();
        h.origin = Origin::human;
        c.human_comments.push_back(std::move(h));
    }
    auto problems = validate(c);
    if (!problems.empty())
        throw Error(ErrorCode::invalid_argument, "case " + c.case_id + ": " + problems.front());
    return c;
}

void save_case(const BenchmarkCase& c, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    json meta = c.context;
    meta.erase("change");
    meta.erase("change_truncated");
    meta.erase("degraded");
    meta.erase("warnings");
    meta["case_id"] = c.case_id;
    meta["has_pr_info"] = c.has_pr_info;
    meta["has_issue_info"] = c.has_issue_info;
    meta["year"] = c.year;
    write_file(dir / "context.json", meta.dump(2) + "\n");
    write_file(dir / "change.diff", diff::serialize(c.context.change));
    std::vector<json> lines;
    for (const auto& h : c.human_comments)
        lines.push_back(h);
    write_file(dir / "human_comments.jsonl", to_json_lines(lines));
}

std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& root)
{
    if (!std::filesystem::is_directory(root))
        throw Error(ErrorCode::invalid_argument, "benchmark directory not found: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory())
            dirs.push_back(e.path());
    std::vector<BenchmarkCase> out;
    for (const auto& d : dirs)
        out.push_back(load_case(d));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
    return out;
}

// ---------------------------------------------------------------------------

Curated curate(const std::vector<BenchmarkCase>& raw, const NoiseJudge& noisy, const CurationConfig& cfg)
{
    Curated out;
    out.funnel.input = static_cast<int>(raw.size());
    std::vector<const BenchmarkCase*> stage;
    for (const auto& c : raw) {
        if (!c.has_pr_info || !c.has_issue_info)
            ++out.funnel.missing_context;
        else
            stage.push_back(&c);
    }
    std::vector<const BenchmarkCase*> clean;
    for (const auto* c : stage) {
        bool any = false;
        for (const auto& h : c->human_comments) {
            if (noisy(h.body)) {
                any = true;
                break;
            }
        }
        if (any)
            ++out.funnel.noisy;
        else
            clean.push_back(c);
    }
    for (const auto* c : clean) {
        if (c->year < cfg.min_year || c->year > cfg.max_year)
            ++out.funnel.out_of_window;
        else
            out.cases.push_back(*c);
    }
    out.funnel.output = static_cast<int>(out.cases.size());
    return out;
}

NoiseJudge llm_noise_judge(llm::Gateway& gateway)
{
    return [&gateway](const std::string& body) { return llm::judge_noise(body, gateway); };
}

// ---------------------------------------------------------------------------

AlignmentVerdict align(const ReviewComment& generated, const std::vector<ReviewComment>& humans,
                       llm::Gateway& gateway, int window)
{
    AlignmentVerdict v;
    v.generated = generated;
    struct Scored {
        int score;
        int distance;
        const ReviewComment* human;
    };
    std::vector<Scored> scored;
    const ReviewComment* nearest = nullptr;
    for (const auto& h : humans) {
        if (!diff::location_match(generated, h, window))
            continue;
        v.location_match = true;
        const int d = std::abs(generated.line - h.line);
        if (!nearest || d < std::abs(generated.line - nearest->line) ||
            (d == std::abs(generated.line - nearest->line) && h.comment_id < nearest->comment_id))
            nearest = &h;
        try {
            auto sim = llm::judge_similarity(generated, h, gateway);
            scored.push_back({sim.score, std::abs(generated.line - h.line), &h});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::unparseable_judge_output)
                throw;
        }
    }
    if (scored.empty()) {
        if (nearest)
            v.matched_human = *nearest;
        return v;
    }
    auto best = std::min_element(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.distance != b.distance)
            return a.distance < b.distance;
        return a.human->comment_id < b.human->comment_id;
    });
    v.matched_human = *best->human;
    v.similarity_score = best->score;
    v.aligned = best->score >= 3;
    return v;
}

std::vector<CaseOutcome> evaluate_once(const std::vector<BenchmarkCase>& benchmark,
                                       const pipeline::PipelineConfig& cfg, llm::Gateway& gateway,
                                       gate::Classifier& classifier, const EvalOptions& opts)
{
    std::vector<CaseOutcome> outcomes(benchmark.size());
    auto work = [&](std::size_t i) {
        const auto& c = benchmark[i];
        CaseOutcome& o = outcomes[i];
        o.case_id = c.case_id;
        o.pr_id = c.context.pr_id;
        try {
            auto result = pipeline::run(c.context, cfg, gateway, classifier, c.case_id);
            for (const auto& g : result.accepted) {
                auto v = align(g, c.human_comments, gateway, opts.location_window);
                if (v.location_match && !v.similarity_score)
                    ++o.unjudgeable;
                o.verdicts.push_back(std::move(v));
            }
        } catch (const Error& e) {
            o.skipped = true;
            o.verdicts.clear();
            o.unjudgeable = 0;
            o.error = e.what();
        }
    };

    int workers = opts.workers > 0 ? opts.workers : gateway.config().max_concurrency;
    workers = std::clamp(workers, 1, std::max<int>(1, static_cast<int>(benchmark.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < benchmark.size(); ++i)
            work(i);
        return outcomes;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < benchmark.size();)
                work(i);
        });
    for (auto& t : pool)
        t.join();
    return outcomes;
}

RunMetrics aggregate(const std::vector<CaseOutcome>& outcomes)
{
    RunMetrics m;
    std::map<std::string, std::pair<bool, bool>> prs;  // any aligned, any not aligned
    for (const auto& o : outcomes) {
        if (o.skipped) {
            ++m.skipped;
            continue;
        }
        auto& pr = prs[o.pr_id];
        for (const auto& v : o.verdicts) {
            ++m.generated;
            if (v.aligned) {
                ++m.aligned;
                pr.first = true;
            }
            if (v.location_match)
                ++m.location_matched;
            if (v.location_match && !v.similarity_score)
                ++m.unjudgeable;
            else if (!v.aligned)
                pr.second = true;
        }
    }
    m.prs = static_cast<int>(prs.size());
    for (const auto& [id, flags] : prs) {
        m.prs_aligned += flags.first ? 1 : 0;
        m.prs_not_aligned += flags.second ? 1 : 0;
    }
    if (m.generated > 0) {
        const double g = m.generated;
        m.hac = m.aligned / g;
        m.hac_location_only = m.location_matched / g;
        m.not_hac = (m.generated - m.aligned - m.unjudgeable) / g;
    }
    if (m.prs > 0) {
        m.pr_hac = static_cast<double>(m.prs_aligned) / m.prs;
        m.pr_not_hac = static_cast<double>(m.prs_not_aligned) / m.prs;
    }
    return m;
}

namespace {

MetricSummary summarize(const std::vector<RunMetrics>& runs)
{
    auto pick = [&](double RunMetrics::*field) {
        std::vector<double> xs;
        for (const auto& r : runs)
            xs.push_back(r.*field);
        return stats::mean_ci(xs);
    };
    return {pick(&RunMetrics::hac), pick(&RunMetrics::not_hac), pick(&RunMetrics::pr_hac),
            pick(&RunMetrics::pr_not_hac), pick(&RunMetrics::hac_location_only)};
}

}  // namespace

EvalReport evaluate_alignment(const std::vector<BenchmarkCase>& benchmark, const pipeline::PipelineConfig& cfg,
                              llm::Gateway& gateway, gate::Classifier& classifier, const EvalOptions& opts)
{
    if (opts.repeats < 1)
        throw Error(ErrorCode::invalid_argument, "repeats must be at least 1");
    EvalReport report;
    report.repeats = opts.repeats;
    report.cases = static_cast<int>(benchmark.size());
    for (int r = 0; r < opts.repeats; ++r)
        report.runs.push_back(aggregate(evaluate_once(benchmark, cfg, gateway, classifier, opts)));
    report.summary = summarize(report.runs);
    return report;
}

// ---------------------------------------------------------------------------

std::vector<Variant> standard_variants(const pipeline::PipelineConfig& control)
{
    std::vector<Variant> v{{"control", control}};
    auto add = [&](std::string name, auto mutate) {
        auto cfg = control;
        mutate(cfg);
        v.push_back({std::move(name), cfg});
    };
    add("no-persona", [](auto& c) { c.prompt.include_persona = false; });
    add("no-chain-of-thought", [](auto& c) { c.prompt.include_cot = false; });
    add("no-guidelines", [](auto& c) { c.prompt.include_guidelines = false; });
    add("no-pr-info", [](auto& c) { c.prompt.include_pr_info = false; });
    add("no-issue-info", [](auto& c) { c.prompt.include_issue_info = false; });
    add("no-fact-check", [](auto& c) { c.fact_check = false; });
    add("no-gate", [](auto& c) { c.gate = false; });
    return v;
}

AblationReport run_ablation(const std::vector<BenchmarkCase>& benchmark, const std::vector<Variant>& variants,
                            llm::Gateway& gateway, gate::Classifier& classifier, const EvalOptions& opts)
{
    auto control = std::find_if(variants.begin(), variants.end(), [](const Variant& v) { return v.name == "control"; });
    if (control == variants.end())
        throw Error(ErrorCode::invalid_argument, "ablation needs a variant named control");
    AblationReport report;
    report.control = evaluate_alignment(benchmark, control->config, gateway, classifier, opts).summary;
    for (const auto& v : variants) {
        if (v.name == "control")
            continue;
        AblationRow row;
        row.name = v.name;
        row.treatment = evaluate_alignment(benchmark, v.config, gateway, classifier, opts).summary;
        row.d_hac = 100.0 * (report.control.hac.mean - row.treatment.hac.mean);
        row.d_not_hac = 100.0 * (report.control.not_hac.mean - row.treatment.not_hac.mean);
        row.d_pr_hac = 100.0 * (report.control.pr_hac.mean - row.treatment.pr_hac.mean);
        row.d_pr_not_hac = 100.0 * (report.control.pr_not_hac.mean - row.treatment.pr_not_hac.mean);
        row.d_hac_location_only =
            100.0 * (report.control.hac_location_only.mean - row.treatment.hac_location_only.mean);
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------

json to_json(const Funnel& f)
{
    return {{"input", f.input},
            {"missing_context", f.missing_context},
            {"noisy", f.noisy},
            {"out_of_window", f.out_of_window},
            {"output", f.output}};
}

json to_json(const RunMetrics& m)
{
    return {{"hac", m.hac},
            {"not_hac", m.not_hac},
            {"pr_hac", m.pr_hac},
            {"pr_not_hac", m.pr_not_hac},
            {"hac_location_only", m.hac_location_only},
            {"generated", m.generated},
            {"aligned", m.aligned},
            {"location_matched", m.location_matched},
            {"unjudgeable", m.unjudgeable},
            {"prs", m.prs},
            {"prs_aligned", m.prs_aligned},
            {"prs_not_aligned", m.prs_not_aligned},
            {"skipped", m.skipped}};
}

namespace {

json interval_json(const stats::Interval& i) { return {{"mean", i.mean}, {"ci_lower", i.lower}, {"ci_upper", i.upper}}; }

}  // namespace

json to_json(const MetricSummary& s)
{
    return {{"hac", interval_json(s.hac)},
            {"not_hac", interval_json(s.not_hac)},
            {"pr_hac", interval_json(s.pr_hac)},
            {"pr_not_hac", interval_json(s.pr_not_hac)},
            {"hac_location_only", interval_json(s.hac_location_only)}};
}

json to_json(const EvalReport& r)
{
    json runs = json::array();
    for (const auto& m : r.runs)
        runs.push_back(to_json(m));
    return {{"repeats", r.repeats}, {"cases", r.cases}, {"runs", runs}, {"summary", to_json(r.summary)}};
}

json to_json(const AblationReport& r)
{
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"variant", row.name},
                        {"treatment", to_json(row.treatment)},
                        {"difference_points",
                         {{"hac", row.d_hac},
                          {"not_hac", row.d_not_hac},
                          {"pr_hac", row.d_pr_hac},
                          {"pr_not_hac", row.d_pr_not_hac},
                          {"hac_location_only", row.d_hac_location_only}}}});
    return {{"control", to_json(r.control)}, {"treatments", rows}};
}

namespace {

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string pad(std::string s, std::size_t width)
{
    if (s.size() < width)
        s.append(width - s.size(), ' ');
    return s;
}

std::string lpad(std::string s, std::size_t width)
{
    if (s.size() < width)
        s.insert(0, width - s.size(), ' ');
    return s;
}

}  // namespace

std::string format_table(const EvalReport& r)
{
    std::string out = pad("Metric", 22) + lpad("Mean", 9) + lpad("95% CI", 20) + "\n";
    out += std::string(51, '-') + "\n";
    auto row = [&](const char* name, const stats::Interval& i) {
        out += pad(name, 22) + lpad(fmt("%.2f%%", 100 * i.mean), 9) +
               lpad("[" + fmt("%.2f", 100 * i.lower) + ", " + fmt("%.2f", 100 * i.upper) + "]", 20) + "\n";
    };
    row("%HAC", r.summary.hac);
    row("%!HAC", r.summary.not_hac);
    row("%HAC_LocationOnly", r.summary.hac_location_only);
    row("%PR_HAC", r.summary.pr_hac);
    row("%PR_!HAC", r.summary.pr_not_hac);
    out += "(" + std::to_string(r.cases) + " cases, " + std::to_string(r.repeats) + " repeats)\n";
    return out;
}

std::string format_table(const AblationReport& r)
{
    std::string out = pad("Variant", 22) + lpad("dHAC", 9) + lpad("dLocOnly", 10) + lpad("d!HAC", 9) +
                      lpad("dPR_HAC", 9) + lpad("dPR_!HAC", 10) + "\n";
    out += std::string(69, '-') + "\n";
    out += pad("control", 22) + lpad(fmt("%.2f%%", 100 * r.control.hac.mean), 9) +
           lpad(fmt("%.2f%%", 100 * r.control.hac_location_only.mean), 10) +
           lpad(fmt("%.2f%%", 100 * r.control.not_hac.mean), 9) + lpad(fmt("%.2f%%", 100 * r.control.pr_hac.mean), 9) +
           lpad(fmt("%.2f%%", 100 * r.control.pr_not_hac.mean), 10) + "\n";
    for (const auto& row : r.rows)
        out += pad(row.name, 22) + lpad(fmt("%+.2f", row.d_hac), 9) + lpad(fmt("%+.2f", row.d_hac_location_only), 10) +
               lpad(fmt("%+.2f", row.d_not_hac), 9) + lpad(fmt("%+.2f", row.d_pr_hac), 9) +
               lpad(fmt("%+.2f", row.d_pr_not_hac), 10) + "\n";
    out += "(differences are control minus treatment, percentage points)\n";
    return out;
}

std::string format_table(const Funnel& f)
{
    std::string out;
    out += pad("Raw code changes", 40) + lpad(std::to_string(f.input), 8) + "\n";
    out += pad("- missing PR or issue information", 40) + lpad(std::to_string(f.missing_context), 8) + "\n";
    out += pad("- noisy human comments", 40) + lpad(std::to_string(f.noisy), 8) + "\n";
    out += pad("- outside the recency window", 40) + lpad(std::to_string(f.out_of_window), 8) + "\n";
    out += pad("Benchmark", 40) + lpad(std::to_string(f.output), 8) + "\n";
    return out;
}

}  // namespace revkit::eval
