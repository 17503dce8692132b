// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histories.hpp"
#include "oracles.hpp"
#include "revkit/diff.hpp"
#include "revkit/eval.hpp"
#include "revkit/model_json.hpp"
#include "revkit/prompt.hpp"
#include "revkit/resolution.hpp"
#include "revkit/service.hpp"
#include "revkit/stats.hpp"
#include "test_support.hpp"

using namespace revkit;
namespace rt = revkit::testing;
using nlohmann::json;

namespace {

// Collects failed checks with a short description each.
struct Checker {
    std::vector<std::string> failures;
    int checks = 0;

    void expect(bool ok, const std::string& what)
    {
        ++checks;
        if (!ok && failures.size() < 5)
            failures.push_back(what);
        else if (!ok)
            failures.push_back("");
    }
    void near(double got, double want, double tol, const std::string& what)
    {
        std::ostringstream ss;
        ss << what << ": got " << got << " want " << want;
        expect(std::abs(got - want) <= tol, ss.str());
    }
};

struct Criterion {
    std::string name;
    double budget_s;
    std::function<std::string(Checker&)> body;
};

// ---------------------------------------------------------------------------

std::string metric_arithmetic(Checker& c)
{
    using stats::relative_difference;
    using stats::round_to;
    auto exact = [&](double got, double want, const std::string& what) {
        std::ostringstream ss;
        ss << what << ": got " << got << " want " << want;
        c.expect(got == want, ss.str());
    };
    exact(round_to(relative_difference(38.70, 44.45), 1), -12.9, "crr 38.70 vs 44.45");
    exact(round_to(relative_difference(1.06, 2.40), 0), -56.0, "1.06 vs 2.40");
    exact(round_to(relative_difference(14.35, 20.73), 0), -31.0, "14.35 vs 20.73");
    exact(round_to(relative_difference(14.35, 20.73), 1), -30.8, "14.35 vs 20.73 unrounded");
    exact(round_to(relative_difference(47.67, 73.25), 0), -35.0, "47.67 vs 73.25");
    // The published table prints -35.6 for this pair; the arithmetic gives -35.5.
    exact(round_to(relative_difference(2.87, 4.45), 1), -35.5, "2.87 vs 4.45");

    auto change = diff::parse_unified_diff("--- a/x.py\n+++ b/x.py\n@@ -1 +1,2 @@\n a\n+b\n");
    std::vector<eval::BenchmarkCase> raw;
    for (int i = 0; i < 3492; ++i) {
        eval::BenchmarkCase k;
        k.case_id = "k" + std::to_string(i);
        k.context.pr_id = k.case_id;
        k.context.change = change;
        k.year = 2024;
        auto h = rt::comment("h", "x.py", 2, "fine", Origin::human);
        if (i < 872)
            k.has_issue_info = false;
        else if (i < 1142)
            h.body = "NOISE";
        else if (i < 1424)
            k.year = 2020;
        k.human_comments.push_back(h);
        raw.push_back(std::move(k));
    }
    auto out = eval::curate(raw, [](const std::string& b) { return b == "NOISE"; });
    c.expect(out.funnel == eval::Funnel{3492, 872, 270, 282, 2068}, "curation funnel");
    c.expect(3492 - 872 - 270 - 282 == 2068, "funnel arithmetic");
    return "-12.9 -56 -31(-30.8) -35 -35.5 funnel 2068";
}

std::string crr_oracle(Checker& c)
{
    std::vector<ResolutionRecord> got_all, oracle_all;
    auto run = [&](const rt::Script& s) {
        auto sim = rt::simulate(s);
        auto got = resolution::track(sim.pr, sim.comments, sim.commits, sim.config);
        c.expect(got == sim.oracle, "history " + s.name);
        if (!s.expected.empty())
            for (std::size_t i = 0; i < got.size() && i < s.expected.size(); ++i)
                c.expect(got[i].verdict == s.expected[i], "hand verdict " + s.name);
        got_all.insert(got_all.end(), got.begin(), got.end());
        oracle_all.insert(oracle_all.end(), sim.oracle.begin(), sim.oracle.end());
    };
    auto scripts = rt::scripted_histories();
    c.expect(scripts.size() == 25, "25 scripted histories");
    for (const auto& s : scripts)
        run(s);
    const double scripted_crr = resolution::crr(got_all);
    c.expect(scripted_crr == 18.0 / 28.0, "scripted crr 18/28");
    std::mt19937 rng(2024);
    for (int i = 0; i < 100; ++i)
        run(rt::random_history(rng, i));
    c.expect(resolution::crr(got_all) == resolution::crr(oracle_all), "pooled crr");
    std::ostringstream ss;
    ss << "125 histories, " << got_all.size() << " comments, crr " << resolution::crr(got_all);
    return ss.str();
}

std::string stats_oracles(Checker& c)
{
    std::mt19937 rng(17);
    int mwu_cases = 0;
    for (std::size_t na = 1; na <= 8; ++na)
        for (std::size_t nb = 1; nb <= 8; ++nb) {
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> a(na), b(nb);
                for (auto& v : a)
                    v = static_cast<double>(rng() % 6);
                for (auto& v : b)
                    v = static_cast<double>(rng() % 6);
                auto got = stats::mann_whitney_u(a, b);
                auto want = rt::brute_force_mwu(a, b);
                c.expect(got.exact, "exact path");
                c.expect(got.u_a == want.u_a, "U matches enumeration");
                c.near(got.p_value, want.p_value, 1e-12, "exact p");
                c.expect(got.u_a + got.u_b == static_cast<double>(na * nb), "U_a + U_b = nm");
                ++mwu_cases;
            }
        }

    std::vector<double> step(12, 20.73);
    step.insert(step.end(), 12, 14.35);
    auto its = stats::interrupted_time_series(step, 12);
    c.near(its.intervention(), 14.35 - 20.73, 1e-6, "noiseless step");
    std::normal_distribution<double> noise(0, 1);
    double worst_dot = 0;
    for (int iter = 0; iter < 50; ++iter) {
        std::size_t n = 8 + rng() % 60, k = 3 + rng() % (n - 6);
        std::vector<double> v(n);
        for (std::size_t t = 0; t < n; ++t)
            v[t] = 5 + 0.1 * static_cast<double>(t) + (t >= k ? -2.0 : 0.0) + noise(rng);
        auto fit = stats::interrupted_time_series(v, k);
        for (std::size_t j = 0; j < 3; ++j) {
            double dot = 0;
            for (std::size_t i = 0; i < n; ++i)
                dot += fit.design[i][j] * fit.fit.residuals[i];
            worst_dot = std::max(worst_dot, std::abs(dot));
        }
    }
    c.expect(worst_dot <= 1e-8, "residual orthogonality");

    c.expect(stats::spearman({1, 2, 3, 4, 5}, {2, 4, 8, 16, 32}) == 1.0, "spearman +1");
    c.expect(stats::spearman({1, 2, 3, 4, 5}, {9, 7, 5, 3, 1}) == -1.0, "spearman -1");
    for (int iter = 0; iter < 100; ++iter) {
        std::size_t n = 3 + rng() % 40;
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 1.0);
        std::iota(y.begin(), y.end(), 1.0);
        std::shuffle(x.begin(), x.end(), rng);
        std::shuffle(y.begin(), y.end(), rng);
        c.near(stats::spearman(x, y), rt::spearman_classic(x, y), 1e-12, "spearman rank formula");
        c.near(stats::spearman(x, y), rt::spearman_formula(x, y), 1e-12, "spearman pearson-of-ranks");
    }
    std::ostringstream ss;
    ss << mwu_cases << " MWU cases, max |X'e| " << worst_dot;
    return ss.str();
}

// Webhook deliveries for the five fixture PRs, run through the service.
struct E2eResult {
    std::string runs;
    std::map<std::string, int> posted;
};

E2eResult run_service(const std::vector<std::string>& event_ids, const std::vector<std::string>& prs)
{
    context::FixtureCodeHost host(rt::fixtures("prs"));
    context::FixtureIssueTracker tracker(rt::fixtures("prs/issues.json"));
    context::FixtureRepository repo(rt::fixtures("prs"));
    auto mock = llm::make_scripted_mock();
    llm::Gateway gateway(*mock, {});
    gate::LexicalBaselineClassifier classifier;
    rt::ScratchDir dir;
    service::Store store(dir.path() / "store.jsonl");
    service::ManualClock clock(parse_timestamp("2025-06-01T12:00:00Z"));
    service::ReviewService svc({}, repo, {&host, &tracker}, gateway, classifier, store, clock);
    service::WebhookServer hook(svc, store, "acceptance", clock);
    for (std::size_t i = 0; i < event_ids.size(); ++i) {
        http::Request req;
        req.body = json{{"event_id", event_ids[i]}, {"kind", "pr_created"}, {"repo", "demo/shop"}, {"pr", {{"id", prs[i]}}}}
                       .dump();
        req.headers.emplace("X-Revkit-Signature", service::hmac_sha256_hex("acceptance", req.body));
        if (hook.handle_post_event(req).status != 202)
            return {};
    }
    svc.drain();
    // Reload from disk so the comparison covers what was persisted.
    service::Store reloaded(dir.path() / "store.jsonl");
    E2eResult r;
    json runs = json::array();
    for (const auto& run : reloaded.runs())
        runs.push_back(service::to_json(run));
    json posted = json::object();
    for (const auto& [pr, cs] : reloaded.posted_comments()) {
        for (const auto& cm : cs)
            posted[pr].push_back(json(cm));
        r.posted[pr] = static_cast<int>(cs.size());
    }
    r.runs = runs.dump() + posted.dump();
    for (const auto& p : host.posted())
        ++r.posted[p.pr_id + "@host"];
    return r;
}

std::string end_to_end(Checker& c)
{
    std::vector<std::string> ids, prs;
    for (int i = 1; i <= 5; ++i) {
        ids.push_back("evt-" + std::to_string(i));
        prs.push_back("PR-" + std::to_string(i));
    }
    auto first = run_service(ids, prs);
    auto second = run_service(ids, prs);
    c.expect(!first.runs.empty(), "webhook accepted every delivery");
    c.expect(first.runs == second.runs, "stored runs byte-identical");
    int total = 0;
    for (auto& [k, n] : first.posted)
        if (k.find('@') == std::string::npos)
            total += n;
    c.expect(total > 0, "comments posted");

    std::mt19937 rng(99);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int k = 0; k < 3; ++k)
                order.push_back(i);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::string> dup_ids, dup_prs;
        for (auto i : order) {
            dup_ids.push_back(ids[i]);
            dup_prs.push_back(prs[i]);
        }
        auto noisy = run_service(dup_ids, dup_prs);
        c.expect(noisy.posted == first.posted, "posted counts invariant under duplicates");
        c.expect(noisy.runs == first.runs, "stored runs invariant under duplicates");
    }
    return "5 PRs, " + std::to_string(total) + " comments posted, 2 identical runs, 3 shuffled x3 deliveries";
}

std::vector<eval::BenchmarkCase>& bench()
{
    static auto cases = eval::load_benchmark(rt::fixtures("benchmark"));
    return cases;
}

std::string alignment_suite(Checker& c)
{
    auto mock = llm::make_scripted_mock();
    llm::Gateway gw(*mock, {});
    gate::LexicalBaselineClassifier cls;
    c.expect(bench().size() == 10, "10 benchmark cases");
    auto m = eval::aggregate(eval::evaluate_once(bench(), {}, gw, cls));
    c.expect(m.generated == 11 && m.aligned == 7 && m.location_matched == 9, "hand counts 11/7/9");
    c.expect(m.hac == 7.0 / 11.0, "HAC 7/11");
    c.expect(m.hac_location_only == 9.0 / 11.0, "HAC location-only 9/11");
    c.expect(m.pr_hac == 0.6, "PR HAC 6/10");
    c.expect(m.not_hac == 4.0 / 11.0 && m.pr_not_hac == 0.4, "not-HAC 4/11, PR not-HAC 4/10");

    std::mt19937 rng(3);
    for (int iter = 0; iter < 100; ++iter) {
        pipeline::PipelineConfig cfg;
        cfg.prompt.include_persona = rng() % 2;
        cfg.prompt.include_cot = rng() % 2;
        cfg.prompt.include_guidelines = rng() % 2;
        cfg.prompt.include_pr_info = rng() % 2;
        cfg.prompt.include_issue_info = rng() % 2;
        cfg.fact_check = rng() % 2;
        cfg.gate = rng() % 2;
        cfg.gate_config.threshold = static_cast<double>(rng() % 101) / 100.0;
        std::vector<eval::BenchmarkCase> subset;
        for (auto& k : bench())
            if (rng() % 3)
                subset.push_back(k);
        eval::EvalOptions opts{1, static_cast<int>(rng() % 16), 1};
        auto r = eval::aggregate(eval::evaluate_once(subset, cfg, gw, cls, opts));
        c.expect(r.hac_location_only >= r.hac, "location-only >= HAC");
    }

    const std::string body = "Close `f` in the error branch, otherwise the descriptor leaks.";
    for (int d = 0; d <= 15; ++d)
        for (int sign : {-1, 1}) {
            auto g = rt::comment("g", "a.py", 50, body);
            auto same = eval::align(g, {rt::comment("h", "a.py", 50 + sign * d, body, Origin::human)}, gw);
            c.expect(same.location_match == (d <= 10), "same file at distance " + std::to_string(d));
            auto other = eval::align(g, {rt::comment("h", "b.py", 50 + sign * d, body, Origin::human)}, gw);
            c.expect(!other.location_match, "other file at distance " + std::to_string(d));
        }
    return "HAC 7/11, location-only 9/11, PR HAC 6/10; 100 random configs; |d| 0..15";
}

std::string ablation_soundness(Checker& c)
{
    PullRequestContext ctx = bench()[0].context;
    auto base = prompt::parse_sections(prompt::render(prompt::build(ctx, {})));
    struct Toggle {
        bool prompt::PromptConfig::*flag;
        std::vector<std::string> sections;
    };
    const std::vector<Toggle> toggles{
        {&prompt::PromptConfig::include_persona, {"persona"}},
        {&prompt::PromptConfig::include_cot, {"chain_of_thought"}},
        {&prompt::PromptConfig::include_guidelines, {"guidelines_code", "guidelines_test", "guidelines_comment"}},
        {&prompt::PromptConfig::include_pr_info, {"pr_info"}},
        {&prompt::PromptConfig::include_issue_info, {"issue_info"}},
    };
    for (const auto& t : toggles) {
        prompt::PromptConfig cfg;
        cfg.*(t.flag) = false;
        auto got = prompt::parse_sections(prompt::render(prompt::build(ctx, cfg)));
        decltype(base) expected;
        for (auto& s : base)
            if (std::find(t.sections.begin(), t.sections.end(), s.first) == t.sections.end())
                expected.push_back(s);
        c.expect(got == expected, "toggle " + t.sections[0] + " changes only its section");
    }

    auto mock = llm::make_scripted_mock();
    llm::Gateway gw(*mock, {});
    gate::LexicalBaselineClassifier cls;
    eval::EvalOptions opts{2, 10, 0};
    pipeline::PipelineConfig control;
    auto report = eval::run_ablation(bench(), eval::standard_variants(control), gw, cls, opts);
    const eval::AblationRow* g = nullptr;
    for (const auto& r : report.rows)
        if (r.name == "no-guidelines")
            g = &r;
    c.expect(g != nullptr, "no-guidelines row");
    if (g) {
        c.near(g->d_hac, 100.0 * 2.0 / 11.0, 1e-9, "delta HAC");
        c.near(g->d_hac_location_only, 100.0 * 3.0 / 11.0, 1e-9, "delta HAC location-only");
        c.near(g->d_not_hac, -100.0 * 2.0 / 11.0, 1e-9, "delta not-HAC");
        c.near(g->d_pr_hac, 20.0, 1e-9, "delta PR HAC");
        c.near(g->d_pr_not_hac, -20.0, 1e-9, "delta PR not-HAC");
    }
    auto same = eval::run_ablation(bench(), {{"control", control}, {"identical", control}}, gw, cls, opts);
    const auto& row = same.rows.at(0);
    c.expect(row.d_hac == 0.0 && row.d_not_hac == 0.0 && row.d_pr_hac == 0.0 && row.d_pr_not_hac == 0.0 &&
                 row.d_hac_location_only == 0.0,
             "identical treatment gives 0");
    return "5 toggles, no-guidelines dHAC +18.18 dPR_HAC +20, identical 0";
}

std::string gate_behavior(Checker& c)
{
    for (auto text : {"Good job!", "Add a blank line here", "Needs improvement", "Is this the best way?"})
        c.expect(gate::LexicalBaselineClassifier::probability(text) < 0.5, std::string("rejects ") + text);
    auto pairs = gate::training_pairs_from_json_lines(rt::read_text(rt::test_data("gate/labeled.jsonl")));
    int agree = 0;
    for (const auto& p : pairs)
        agree += (gate::LexicalBaselineClassifier::probability(p.text) >= 0.5) == (p.label == 1);
    const double agreement = pairs.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(pairs.size());
    c.expect(agreement >= 0.9, "labeled agreement >= 90%");

    struct Fixed : gate::Classifier {
        std::vector<double> p;
        std::vector<double> probabilities(const std::vector<std::string>&) override { return p; }
        std::string name() const override { return "fixed"; }
    } fixed;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<ReviewComment> cs;
        fixed.p.assign(10, 0.0);
        for (int i = 0; i < 10; ++i) {
            fixed.p[static_cast<std::size_t>(i)] = u(rng);
            cs.push_back(rt::comment(std::to_string(i), "a.py", 1, "x", Origin::generated, CommentState::fact_checked));
        }
        double t1 = u(rng), t2 = u(rng);
        if (t1 > t2)
            std::swap(t1, t2);
        auto lo = gate::score(cs, fixed, {t1, true});
        auto hi = gate::score(cs, fixed, {t2, true});
        for (std::size_t i = 0; i < cs.size(); ++i)
            c.expect(!hi.scores[i].passed || lo.scores[i].passed, "threshold monotonicity");
    }
    std::ostringstream ss;
    ss << "4/4 exemplars rejected, agreement " << agree << "/" << pairs.size() << ", 500 monotonicity draws";
    return ss.str();
}

}  // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"metric arithmetic", 1.0, metric_arithmetic},
        {"CRR oracle equivalence", 30.0, crr_oracle},
        {"statistical oracles", 30.0, stats_oracles},
        {"end-to-end determinism", 30.0, end_to_end},
        {"alignment metric suite", 60.0, alignment_suite},
        {"ablation soundness", 60.0, ablation_soundness},
        {"gate behavior", 10.0, gate_behavior},
    };
    int failed = 0;
    int index = 0;
    for (const auto& cr : criteria) {
        ++index;
        Checker c;
        std::string detail;
        auto start = std::chrono::steady_clock::now();
        try {
            detail = cr.body(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > cr.budget_s)
            c.expect(false, "runtime over budget");
        const bool ok = c.failures.empty();
        failed += !ok;
        std::printf("%s [%d] %s: %s (%d checks, %.2fs / %.0fs)\n", ok ? "PASS" : "FAIL", index, cr.name.c_str(),
                    detail.c_str(), c.checks, secs, cr.budget_s);
        for (const auto& f : c.failures)
            if (!f.empty())
                std::printf("    - %s\n", f.c_str());
        std::fflush(stdout);
    }
    return failed;
}
