#include <gtest/gtest.h>

#include <map>
#include <random>

#include "histories.hpp"
#include "revkit/diff.hpp"
#include "revkit/resolution.hpp"
#include "test_support.hpp"

using namespace revkit;
using namespace revkit::resolution;
namespace rt = revkit::testing;

namespace {

ResolutionRecord record(Verdict v, Timestamp t, Origin origin = Origin::generated)
{
    ResolutionRecord r;
    r.comment = rt::comment("c", "a.py", 1, "x", origin, CommentState::posted);
    r.verdict = v;
    if (v == Verdict::resolved)
        r.resolving_commit = "k";
    r.observed_at = t;
    return r;
}

}  // namespace

TEST(ScriptedHistories, HandDerivedVerdictsAndCommits)
{
    auto scripts = rt::scripted_histories();
    ASSERT_EQ(scripts.size(), 25u);
    for (const auto& s : scripts) {
        auto sim = rt::simulate(s);
        auto got = track(sim.pr, sim.comments, sim.commits, sim.config);
        ASSERT_EQ(got.size(), s.expected.size()) << s.name;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].verdict, s.expected[i]) << s.name << " comment " << i;
            EXPECT_EQ(sim.oracle[i].verdict, s.expected[i]) << s.name << " oracle " << i;
            if (s.expected_commit[i] >= 0)
                EXPECT_EQ(got[i].resolving_commit, sim.commits[static_cast<std::size_t>(s.expected_commit[i])].id)
                    << s.name;
            else
                EXPECT_FALSE(got[i].resolving_commit) << s.name;
            EXPECT_TRUE(validate(got[i]).empty());
        }
        EXPECT_EQ(got, sim.oracle) << s.name;
    }
}

TEST(ScriptedHistories, PooledCrrMatchesHandCount)
{
    std::vector<ResolutionRecord> all;
    for (const auto& s : rt::scripted_histories()) {
        auto sim = rt::simulate(s);
        auto got = track(sim.pr, sim.comments, sim.commits, sim.config);
        all.insert(all.end(), got.begin(), got.end());
    }
    // 18 resolved, 10 unresolved, 4 indeterminate across the 25 scripts.
    int r = 0, u = 0, i = 0;
    for (auto& rec : all) {
        r += rec.verdict == Verdict::resolved;
        u += rec.verdict == Verdict::unresolved;
        i += rec.verdict == Verdict::indeterminate;
    }
    EXPECT_EQ(r, 18);
    EXPECT_EQ(u, 10);
    EXPECT_EQ(i, 4);
    EXPECT_DOUBLE_EQ(crr(all), 18.0 / 28.0);
}

TEST(RandomHistories, TrackEqualsIdentityOracle)
{
    std::mt19937 rng(2024);
    for (int i = 0; i < 100; ++i) {
        auto s = rt::random_history(rng, i);
        auto sim = rt::simulate(s);
        auto got = track(sim.pr, sim.comments, sim.commits, sim.config);
        EXPECT_EQ(got, sim.oracle) << s.name;
    }
}

TEST(Track, SpecExamples)
{
    auto run = [](std::vector<std::vector<rt::Op>> commits) {
        rt::Script s;
        s.name = "x";
        s.files = {{"f", 20}, {"g", 20}};
        s.comments = {{"f", 10}};
        s.commits = std::move(commits);
        auto sim = rt::simulate(s);
        return track(sim.pr, sim.comments, sim.commits, sim.config)[0];
    };
    auto a = run({{{rt::Op::replace, "f", 10, 1, {}}}});
    EXPECT_EQ(a.verdict, Verdict::resolved);
    EXPECT_EQ(a.resolving_commit, "x-k1");
    EXPECT_EQ(run({{{rt::Op::replace, "g", 10, 1, {}}}}).verdict, Verdict::unresolved);
    EXPECT_EQ(run({{{rt::Op::rename, "f", 0, 0, "h"}}, {{rt::Op::replace, "h", 10, 1, {}}}}).verdict,
              Verdict::indeterminate);
}

TEST(Track, ObservedAtFallbacks)
{
    PullRequestContext pr;
    pr.pr_id = "p";
    pr.created_at = rt::day(2025, 1, 1);
    auto c = rt::comment("c", "a.py", 1, "x", Origin::generated, CommentState::posted);
    EXPECT_EQ(track(pr, {c}, {})[0].observed_at, pr.created_at);
    pr.merged_at = rt::day(2025, 1, 3);
    EXPECT_EQ(track(pr, {c}, {})[0].observed_at, *pr.merged_at);
    SubsequentCommit k{"k", {}, rt::day(2025, 1, 2)};
    EXPECT_EQ(track(pr, {c}, {k})[0].observed_at, k.committed_at);
    EXPECT_THROW(track(pr, {c}, {}, {-1, false}), Error);
}

TEST(Crr, Examples)
{
    std::vector<ResolutionRecord> recs;
    for (int i = 0; i < 387; ++i)
        recs.push_back(record(Verdict::resolved, rt::day(2025, 1, 1)));
    for (int i = 0; i < 613; ++i)
        recs.push_back(record(Verdict::unresolved, rt::day(2025, 1, 1)));
    EXPECT_NEAR(crr(recs), 0.3870, 1e-12);
    recs.push_back(record(Verdict::indeterminate, rt::day(2025, 1, 1)));
    EXPECT_NEAR(crr(recs), 0.3870, 1e-12);
    EXPECT_DOUBLE_EQ(crr({record(Verdict::resolved, {}), record(Verdict::resolved, {})}), 1.0);
    try {
        crr({record(Verdict::indeterminate, {})});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_after_filtering);
    }
    EXPECT_THROW(crr(recs, Origin::human), Error);
    recs.push_back(record(Verdict::resolved, {}, Origin::human));
    EXPECT_DOUBLE_EQ(crr(recs, Origin::human), 1.0);
}

TEST(RollingCrr, ConstantSeries)
{
    std::vector<ResolutionRecord> recs;
    for (unsigned d = 1; d <= 30; ++d)
        for (int i = 0; i < 10; ++i)
            recs.push_back(record(i < 4 ? Verdict::resolved : Verdict::unresolved, rt::day(2025, 1, d)));
    auto series = rolling_crr(recs);
    ASSERT_EQ(series.size(), 30u);
    for (auto& p : series)
        EXPECT_NEAR(p.crr, 0.4, 1e-12);
}

TEST(RollingCrr, SingleDay)
{
    auto series = rolling_crr({record(Verdict::resolved, rt::day(2025, 5, 5) + std::chrono::hours(23)),
                               record(Verdict::unresolved, rt::day(2025, 5, 5))});
    ASSERT_EQ(series.size(), 1u);
    EXPECT_EQ(series[0].day, std::chrono::sys_days(std::chrono::floor<std::chrono::days>(rt::day(2025, 5, 5))));
    EXPECT_DOUBLE_EQ(series[0].crr, 0.5);
}

TEST(RollingCrr, StepCrossesHalfOnDayThirteen)
{
    std::vector<ResolutionRecord> recs;
    for (unsigned d = 1; d <= 20; ++d)
        for (int i = 0; i < 3; ++i)
            recs.push_back(record(d >= 10 ? Verdict::resolved : Verdict::unresolved, rt::day(2025, 3, d)));
    auto series = rolling_crr(recs);
    unsigned first_above = 0;
    for (auto& p : series) {
        auto ymd = std::chrono::year_month_day(p.day);
        if (p.crr > 0.5) {
            first_above = static_cast<unsigned>(ymd.day());
            break;
        }
    }
    EXPECT_EQ(first_above, 13u);
}

TEST(RollingCrr, MatchesBruteForceOnRandomRecords)
{
    std::mt19937 rng(9);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<ResolutionRecord> recs;
        int n = 1 + static_cast<int>(rng() % 80);
        for (int i = 0; i < n; ++i) {
            auto v = static_cast<Verdict>(rng() % 3);
            recs.push_back(record(v, rt::day(2025, 6, 1) + std::chrono::hours(rng() % (24 * 40))));
        }
        int window = 1 + static_cast<int>(rng() % 10);
        auto series = rolling_crr(recs, window);
        std::map<std::chrono::sys_days, int> days;
        for (auto& r : recs)
            if (r.verdict != Verdict::indeterminate)
                days[std::chrono::floor<std::chrono::days>(r.observed_at)] = 1;
        ASSERT_EQ(series.size(), days.size());
        for (auto& p : series) {
            int res = 0, tot = 0;
            for (auto& r : recs) {
                if (r.verdict == Verdict::indeterminate)
                    continue;
                auto d = std::chrono::floor<std::chrono::days>(r.observed_at);
                auto age = (p.day - d).count();
                if (age >= 0 && age < window) {
                    ++tot;
                    res += r.verdict == Verdict::resolved;
                }
            }
            EXPECT_EQ(p.total, tot);
            EXPECT_EQ(p.resolved, res);
            EXPECT_DOUBLE_EQ(p.crr, static_cast<double>(res) / tot);
        }
    }
}

TEST(LoadHistory, GitRepositoryEndToEnd)
{
    rt::ScratchDir dir("hist-git");
    auto at = "cd '" + dir.path().string() + "' && ";
    auto g = at + "git -c user.name=t -c user.email=t@e ";
    rt::run(at + "git init -q");
    std::string body;
    for (int i = 1; i <= 20; ++i)
        body += "row " + std::to_string(i) + "\n";
    rt::write_text(dir.path() / "f.txt", body);
    rt::run(g + "add f.txt && " + g + "commit -q -m base");
    auto base = rt::run(at + "git rev-parse HEAD");
    base.pop_back();
    auto edit = body;
    edit.replace(edit.find("row 10\n"), 7, "row ten\n");
    rt::write_text(dir.path() / "f.txt", edit);
    rt::run(g + "commit -q -am fix");
    auto head = rt::run(at + "git rev-parse HEAD");
    head.pop_back();

    context::GitRepository repo(dir.path());
    auto h = load_history(repo, base, head);
    EXPECT_FALSE(h.history_rewritten);
    ASSERT_EQ(h.commits.size(), 1u);
    EXPECT_EQ(h.commits[0].id, head);
    PullRequestContext pr;
    pr.pr_id = "p";
    pr.source_commit = base;
    auto recs = track(pr, {rt::comment("c", "f.txt", 10, "x", Origin::generated, CommentState::posted),
                           rt::comment("d", "f.txt", 11, "x", Origin::generated, CommentState::posted)},
                      h.commits);
    EXPECT_EQ(recs[0].verdict, Verdict::resolved);
    EXPECT_EQ(recs[1].verdict, Verdict::unresolved);
    auto gone = load_history(repo, "0123456789abcdef0123456789abcdef01234567", head);
    EXPECT_TRUE(gone.history_rewritten);
}
