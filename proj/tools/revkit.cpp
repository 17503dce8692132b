// revkit command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 pipeline
// failure, 3 backend failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "revkit/config.hpp"
#include "revkit/diff.hpp"
#include "revkit/eval.hpp"
#include "revkit/model_json.hpp"
#include "revkit/resolution.hpp"
#include "revkit/service.hpp"
#include "revkit/stats.hpp"

using namespace revkit;
using nlohmann::json;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_pipeline = 2;
constexpr int exit_backend = 3;

struct Globals {
    std::string config_path;
    bool mock_backend = false;
    bool dry_run = false;
    std::optional<double> threshold;
    std::optional<int> window;
    std::optional<int> repeats;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::invalid_argument, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::invalid_argument, "cannot write " + path);
    out << text;
}

config::AppConfig load_config(const Globals& g)
{
    auto cfg = g.config_path.empty() ? config::defaults() : config::load(g.config_path);
    if (g.threshold) {
        if (!(*g.threshold >= 0.0 && *g.threshold <= 1.0))
            throw Error(ErrorCode::config_error, "--threshold must lie in [0,1]");
        cfg.service.pipeline.gate_config.threshold = *g.threshold;
    }
    if (g.repeats) {
        if (*g.repeats < 1)
            throw Error(ErrorCode::config_error, "--repeats must be positive");
        cfg.repeats = *g.repeats;
    }
    if (g.window && *g.window < 0)
        throw Error(ErrorCode::config_error, "--window must be non-negative");
    cfg.service.dry_run = g.dry_run;
    return cfg;
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (item.empty())
            continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_argument, "not a number: " + item);
        }
    }
    return out;
}

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string provenance(const ReviewComment& c)
{
    std::string out = std::string(to_string(c.state));
    if (c.host_comment_id)
        out += " as " + *c.host_comment_id;
    return out;
}

// --- review ----------------------------------------------------------------

int cmd_review(const Globals& g, const std::string& fixtures, const std::string& pr_id, const std::string& store_path)
{
    auto cfg = load_config(g);
    auto backend = config::make_backend(cfg, g.mock_backend);
    llm::Gateway gateway(*backend, cfg.gateway);
    auto classifier = config::make_classifier(cfg);

    context::FixtureCodeHost host(fixtures);
    context::FixtureRepository repo(fixtures);
    std::unique_ptr<context::FixtureIssueTracker> issues;
    if (std::filesystem::exists(std::filesystem::path(fixtures) / "issues.json"))
        issues = std::make_unique<context::FixtureIssueTracker>(std::filesystem::path(fixtures) / "issues.json");

    service::Store store(store_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(store_path));
    service::ManualClock clock;
    service::ReviewService svc(cfg.service, repo, {&host, issues.get()}, gateway, *classifier, store, clock);

    service::ReviewEvent ev;
    ev.event_id = "cli-review-" + pr_id;
    ev.pr_id = pr_id;
    ev.kind = service::EventKind::pr_created;
    auto run = svc.handle_event(ev);

    std::cout << "PR " << run.pr_id << " @ " << run.source_commit << ": " << run.run_id << " "
              << service::to_string(run.stage);
    if (!run.skip_reason.empty())
        std::cout << " (" << run.skip_reason << ")";
    std::cout << "\n";
    const auto& k = run.counts;
    std::cout << "counts: candidates=" << k.candidates << " discarded=" << k.discarded
              << " dedupe_dropped=" << k.dedupe_dropped << " fact_rejected=" << k.fact_rejected
              << " gate_rejected=" << k.gate_rejected << " posted=" << k.posted << " post_failed=" << k.post_failed
              << " held=" << k.held << "\n";
    for (const auto& c : run.comments) {
        std::cout << "[" << provenance(c) << "] " << c.file_path << ":" << c.line;
        if (c.category)
            std::cout << " (" << *c.category << ")";
        std::cout << "\n    " << c.body << "\n";
        if (c.note)
            std::cout << "    note: " << *c.note << "\n";
    }
    for (const auto& w : run.warnings)
        std::cout << "warning: " << w << "\n";
    if (run.stage == service::Stage::failed) {
        std::cerr << "review failed at " << service::to_string(*run.failed_stage) << ": " << run.error << "\n";
        return run.error.find("backend-unreachable") != std::string::npos ? exit_backend : exit_pipeline;
    }
    return 0;
}

// --- serve -----------------------------------------------------------------

int cmd_serve(const Globals& g, const std::string& fixtures, std::optional<int> port)
{
    auto cfg = load_config(g);
    const char* secret = std::getenv(cfg.secret_env.c_str());
    if (!secret || !*secret)
        throw Error(ErrorCode::config_error, "set " + cfg.secret_env + " to the webhook secret");
    auto backend = config::make_backend(cfg, g.mock_backend);
    llm::Gateway gateway(*backend, cfg.gateway);
    auto classifier = config::make_classifier(cfg);

    std::unique_ptr<context::CodeHostClient> host;
    std::unique_ptr<context::Repository> repo;
    std::unique_ptr<context::IssueTrackerClient> issues;
    if (!fixtures.empty()) {
        host = std::make_unique<context::FixtureCodeHost>(fixtures);
        repo = std::make_unique<context::FixtureRepository>(fixtures);
        if (std::filesystem::exists(std::filesystem::path(fixtures) / "issues.json"))
            issues = std::make_unique<context::FixtureIssueTracker>(std::filesystem::path(fixtures) / "issues.json");
    } else {
        host = std::make_unique<context::InMemoryCodeHost>();
        repo = std::make_unique<context::InMemoryRepository>();
    }

    service::Store store(cfg.store_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(cfg.store_path));
    service::SystemClock clock;
    service::ReviewService svc(cfg.service, *repo, {host.get(), issues.get()}, gateway, *classifier, store, clock);
    service::WebhookServer server(svc, store, secret, clock);
    const int p = port.value_or(cfg.port);
    std::cerr << "listening on " << cfg.host << ":" << p << "\n";
    server.run(cfg.host, p);
    return 0;
}

// --- mine-crr --------------------------------------------------------------

int cmd_mine(const Globals& g, const std::string& history_path, const std::string& repo_override,
             const std::string& out_path, bool rolling)
{
    auto cfg = load_config(g);
    const auto doc = json::parse(read_file(history_path));
    const std::string repo_path = repo_override.empty() ? doc.value("repo", "") : repo_override;
    if (repo_path.empty())
        throw Error(ErrorCode::invalid_argument, "no repository path (--repo or \"repo\" in the history file)");
    context::GitRepository repo(repo_path);
    if (!repo.available())
        throw Error(ErrorCode::repo_unavailable, repo_path + " is not a git repository");

    resolution::TrackConfig tc;
    tc.window = g.window.value_or(cfg.resolution_window);
    std::vector<ResolutionRecord> records;
    for (const auto& p : doc.at("prs")) {
        PullRequestContext pr;
        pr.pr_id = p.at("pr_id").get<std::string>();
        pr.title = p.value("title", pr.pr_id);
        pr.source_commit = p.at("source_commit").get<std::string>();
        pr.created_at = parse_timestamp(p.at("created_at").get<std::string>());
        if (p.contains("merged_at") && p["merged_at"].is_string())
            pr.merged_at = parse_timestamp(p["merged_at"].get<std::string>());
        auto comments = p.at("comments").get<std::vector<ReviewComment>>();
        auto history = resolution::load_history(repo, pr.source_commit, p.at("head").get<std::string>());
        tc.history_rewritten = history.history_rewritten;
        auto rs = resolution::track(pr, comments, history.commits, tc);
        records.insert(records.end(), rs.begin(), rs.end());
    }

    std::vector<json> lines;
    for (const auto& r : records)
        lines.push_back(r);
    if (!out_path.empty())
        write_output(out_path, to_json_lines(lines));

    int resolved = 0;
    int unresolved = 0;
    int indeterminate = 0;
    for (const auto& r : records) {
        resolved += r.verdict == Verdict::resolved;
        unresolved += r.verdict == Verdict::unresolved;
        indeterminate += r.verdict == Verdict::indeterminate;
    }
    std::cout << "records: " << records.size() << " (resolved " << resolved << ", unresolved " << unresolved
              << ", indeterminate " << indeterminate << ")\n";
    for (auto [label, origin] : {std::pair{"all", std::optional<Origin>{}}, std::pair{"generated", std::optional{Origin::generated}},
                                 std::pair{"human", std::optional{Origin::human}}}) {
        try {
            std::cout << "CRR " << label << ": " << fmt("%.2f%%", 100 * resolution::crr(records, origin)) << "\n";
        } catch (const Error&) {
            std::cout << "CRR " << label << ": n/a\n";
        }
    }
    if (rolling) {
        for (const auto& pt : resolution::rolling_crr(records, 7)) {
            std::cout << format_timestamp(std::chrono::sys_seconds(pt.day)).substr(0, 10) << " "
                      << fmt("%.4f", pt.crr) << " (" << pt.resolved << "/" << pt.total << ")\n";
        }
    }
    return 0;
}

// --- curate ----------------------------------------------------------------

int cmd_curate(const Globals& g, const std::string& raw_dir, const std::string& out_dir)
{
    auto cfg = load_config(g);
    auto backend = config::make_backend(cfg, g.mock_backend);
    llm::Gateway gateway(*backend, cfg.gateway);
    std::vector<eval::BenchmarkCase> raw = eval::load_benchmark(raw_dir);
    auto curated = eval::curate(raw, eval::llm_noise_judge(gateway), cfg.curation);
    std::cout << eval::format_table(curated.funnel);
    if (!out_dir.empty() && !g.dry_run)
        for (const auto& c : curated.cases)
            eval::save_case(c, std::filesystem::path(out_dir) / c.case_id);
    return 0;
}

// --- eval / ablate ---------------------------------------------------------

int cmd_eval(const Globals& g, const std::string& bench_dir, const std::string& json_out)
{
    auto cfg = load_config(g);
    auto backend = config::make_backend(cfg, g.mock_backend);
    llm::Gateway gateway(*backend, cfg.gateway);
    auto classifier = config::make_classifier(cfg);
    auto bench = eval::load_benchmark(bench_dir);
    eval::EvalOptions opts;
    opts.repeats = cfg.repeats;
    opts.location_window = g.window.value_or(cfg.location_window);
    auto report = eval::evaluate_alignment(bench, cfg.service.pipeline, gateway, *classifier, opts);
    std::cout << eval::format_table(report);
    if (!json_out.empty())
        write_output(json_out, eval::to_json(report).dump(2) + "\n");
    return 0;
}

int cmd_ablate(const Globals& g, const std::string& bench_dir, const std::string& json_out)
{
    auto cfg = load_config(g);
    auto backend = config::make_backend(cfg, g.mock_backend);
    llm::Gateway gateway(*backend, cfg.gateway);
    auto classifier = config::make_classifier(cfg);
    auto bench = eval::load_benchmark(bench_dir);
    eval::EvalOptions opts;
    opts.repeats = cfg.repeats;
    opts.location_window = g.window.value_or(cfg.location_window);
    auto report = eval::run_ablation(bench, eval::standard_variants(cfg.service.pipeline), gateway, *classifier, opts);
    std::cout << eval::format_table(report);
    if (!json_out.empty())
        write_output(json_out, eval::to_json(report).dump(2) + "\n");
    return 0;
}

// --- export-train ----------------------------------------------------------

int cmd_export(const std::string& records_path, const std::string& cutoff, const std::string& out_path)
{
    std::vector<ResolutionRecord> records;
    for (const auto& j : parse_json_lines(read_file(records_path)))
        records.push_back(j.get<ResolutionRecord>());
    auto pairs = gate::export_training_pairs(records, parse_timestamp(cutoff));
    write_output(out_path, gate::to_json_lines(pairs));
    std::cerr << pairs.size() << " training pairs\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"revkit: automated code review engine"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_flag("--mock-backend", g.mock_backend, "Use the offline scripted model backend");
    app.add_flag("--dry-run", g.dry_run, "Never post comments or write outputs");

    auto add_threshold = [&](CLI::App* sub) {
        sub->add_option_function<double>("--threshold", [&](double v) { g.threshold = v; }, "Actionability threshold");
    };
    auto add_window = [&](CLI::App* sub, const char* what) {
        sub->add_option_function<int>("--window", [&](int v) { g.window = v; }, what);
    };
    auto add_repeats = [&](CLI::App* sub) {
        sub->add_option_function<int>("--repeats", [&](int v) { g.repeats = v; }, "Evaluation repeats");
    };

    std::string fixtures = "fixtures/prs";
    std::string pr_id;
    std::string store_path;
    auto* review = app.add_subcommand("review", "Review one pull request");
    review->add_option("--pr", pr_id, "Pull request id")->required();
    review->add_option("--fixtures", fixtures, "Fixture pull request directory");
    review->add_option("--store", store_path, "Store file to append the run to");
    add_threshold(review);

    std::string serve_fixtures;
    std::optional<int> port;
    auto* serve = app.add_subcommand("serve", "Serve the webhook endpoint");
    serve->add_option("--fixtures", serve_fixtures, "Fixture pull request directory");
    serve->add_option_function<int>("--port", [&](int p) { port = p; }, "Listen port");
    add_threshold(serve);

    std::string history;
    std::string repo;
    std::string out;
    bool rolling = false;
    auto* mine = app.add_subcommand("mine-crr", "Label posted comments from git history");
    mine->add_option("--history", history, "JSON file listing pull requests and their comments")->required();
    mine->add_option("--repo", repo, "Path to the git clone");
    mine->add_option("--out", out, "Write resolution records (JSON lines)");
    mine->add_flag("--rolling", rolling, "Print the 7-day rolling CRR");
    add_window(mine, "Lines around the anchor that count as touched");

    std::string raw_dir;
    std::string curated_dir;
    auto* curate = app.add_subcommand("curate", "Filter raw cases into a benchmark");
    curate->add_option("--raw", raw_dir, "Directory of raw cases")->required();
    curate->add_option("--out", curated_dir, "Write kept cases here");

    std::string bench_dir;
    std::string json_out;
    auto* evalc = app.add_subcommand("eval", "Human-alignment evaluation");
    evalc->add_option("--benchmark", bench_dir, "Benchmark directory")->required();
    evalc->add_option("--json", json_out, "Write the JSON report here ('-' for stdout)");
    add_threshold(evalc);
    add_window(evalc, "Location-match window in lines");
    add_repeats(evalc);

    auto* ablate = app.add_subcommand("ablate", "Prompt component and gate ablation");
    ablate->add_option("--benchmark", bench_dir, "Benchmark directory")->required();
    ablate->add_option("--json", json_out, "Write the JSON report here ('-' for stdout)");
    add_threshold(ablate);
    add_window(ablate, "Location-match window in lines");
    add_repeats(ablate);

    std::string records_path;
    std::string cutoff;
    std::string train_out;
    auto* exportc = app.add_subcommand("export-train", "Export <comment, resolved?> training pairs");
    exportc->add_option("--records", records_path, "Resolution records (JSON lines)")->required();
    exportc->add_option("--cutoff", cutoff, "Only records observed before this date")->required();
    exportc->add_option("--out", train_out, "Output file ('-' for stdout)");

    auto* statsc = app.add_subcommand("stats", "Statistics");
    statsc->require_subcommand(1);
    double treatment = 0;
    double control = 0;
    auto* rel = statsc->add_subcommand("relative-diff", "100 * (treatment - control) / control");
    rel->add_option("treatment", treatment)->required();
    rel->add_option("control", control)->required();
    std::string list_a;
    std::string list_b;
    auto* mwu = statsc->add_subcommand("mwu", "Mann-Whitney U test");
    mwu->add_option("a", list_a, "Comma-separated sample")->required();
    mwu->add_option("b", list_b, "Comma-separated sample")->required();
    std::string its_values;
    std::size_t intervention = 0;
    auto* its = statsc->add_subcommand("its", "Interrupted time series (OLS)");
    its->add_option("values", its_values, "Comma-separated series")->required();
    its->add_option("--intervention", intervention, "Index of the first post-intervention value")->required();
    auto* spear = statsc->add_subcommand("spearman", "Spearman rank correlation");
    spear->add_option("x", list_a, "Comma-separated sample")->required();
    spear->add_option("y", list_b, "Comma-separated sample")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (review->parsed())
            return cmd_review(g, fixtures, pr_id, g.dry_run ? std::string() : store_path);
        if (serve->parsed())
            return cmd_serve(g, serve_fixtures, port);
        if (mine->parsed())
            return cmd_mine(g, history, repo, g.dry_run ? std::string() : out, rolling);
        if (curate->parsed())
            return cmd_curate(g, raw_dir, curated_dir);
        if (evalc->parsed())
            return cmd_eval(g, bench_dir, json_out);
        if (ablate->parsed())
            return cmd_ablate(g, bench_dir, json_out);
        if (exportc->parsed())
            return cmd_export(records_path, cutoff, g.dry_run ? std::string("-") : train_out);
        if (rel->parsed()) {
            std::cout << fmt("%.1f%%", stats::round_to(stats::relative_difference(treatment, control), 1)) << "\n";
            return 0;
        }
        if (mwu->parsed()) {
            auto r = stats::mann_whitney_u(parse_list(list_a), parse_list(list_b));
            std::cout << "U_a=" << fmt("%g", r.u_a) << " U_b=" << fmt("%g", r.u_b) << " p=" << fmt("%.6g", r.p_value)
                      << (r.exact ? " (exact)" : " (normal approximation)") << "\n";
            return 0;
        }
        if (its->parsed()) {
            auto r = stats::interrupted_time_series(parse_list(its_values), intervention);
            const char* names[] = {"intercept", "time", "intervention"};
            for (int i = 0; i < 3; ++i)
                std::cout << names[i] << " " << fmt("%.6f", r.fit.coefficients[i]) << " se "
                          << fmt("%.6f", r.fit.std_errors[i]) << " p " << fmt("%.6g", r.fit.p_values[i]) << "\n";
            return 0;
        }
        if (spear->parsed()) {
            std::cout << fmt("%.6f", stats::spearman(parse_list(list_a), parse_list(list_b))) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "revkit: " << e.what() << "\n";
        switch (e.code()) {
        case ErrorCode::config_error:
        case ErrorCode::invalid_argument:
            return exit_usage;
        case ErrorCode::backend_unreachable:
        case ErrorCode::classifier_unavailable:
            return exit_backend;
        default:
            return exit_pipeline;
        }
    } catch (const std::exception& e) {
        std::cerr << "revkit: " << e.what() << "\n";
        return exit_pipeline;
    }
    return exit_usage;
}
