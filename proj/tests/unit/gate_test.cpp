#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "revkit/gate.hpp"
#include "revkit/http.hpp"
#include "test_support.hpp"

using namespace revkit;
using namespace revkit::gate;
namespace rt = revkit::testing;
using nlohmann::json;

namespace {

ReviewComment checked(const std::string& id, const std::string& body)
{
    return rt::comment(id, "a.py", 1, body, Origin::generated, CommentState::fact_checked);
}

class FixedClassifier : public Classifier {
public:
    explicit FixedClassifier(std::vector<double> p) : p_(std::move(p)) {}
    std::vector<double> probabilities(const std::vector<std::string>&) override { return p_; }
    std::string name() const override { return "fixed"; }

private:
    std::vector<double> p_;
};

class DownClassifier : public Classifier {
public:
    std::vector<double> probabilities(const std::vector<std::string>&) override
    {
        throw Error(ErrorCode::classifier_unavailable, "down");
    }
    std::string name() const override { return "down"; }
};

// Stand-in scorer speaking the wire protocol. Scores are a pure function of
// the text so duplicates and ordering can be checked.
struct FakeScorer {
    http::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> score_calls{0};
    std::atomic<int> fail_first{0};
    std::string mode = "ok";

    FakeScorer()
    {
        server.post("/score", [this](const http::Request& req) {
            ++score_calls;
            if (fail_first > 0) {
                --fail_first;
                return http::Reply{503, "warming up"};
            }
            auto body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("texts") || !body["texts"].is_array())
                return http::Reply{400, R"({"error":"texts must be a list"})"};
            json probs = json::array();
            for (auto& t : body["texts"]) {
                auto s = t.get<std::string>().substr(0, 512);
                probs.push_back(static_cast<double>(s.size() % 10) / 10.0);
            }
            if (mode == "short" && !probs.empty())
                probs.erase(probs.end() - 1);
            if (mode == "range" && !probs.empty())
                probs[0] = 1.5;
            if (mode == "garbage")
                return http::Reply{200, "not json"};
            return http::Reply{200, json{{"probabilities", probs}}.dump()};
        });
        server.post("/healthz", [](const http::Request&) {
            return http::Reply{200, R"({"status":"ok","model_version":"m-7"})"};
        });
        port = server.bind_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeScorer()
    {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

llm::RetryPolicy fast_retry()
{
    return {3, std::chrono::milliseconds(1), 2.0};
}

}  // namespace

TEST(LexicalBaseline, RejectsNoiseExemplars)
{
    for (auto text : {"Good job!", "Add a blank line here", "Needs improvement", "Is this the best way?"})
        EXPECT_LT(LexicalBaselineClassifier::probability(text), 0.5) << text;
}

TEST(LexicalBaseline, AcceptsIdentifierImperativeConsequence)
{
    auto text = "Close the handle returned by `open()`, otherwise the descriptor leaks.";
    auto f = LexicalBaselineClassifier::features(text);
    EXPECT_TRUE(f.code_span);
    EXPECT_TRUE(f.imperative_lead);
    EXPECT_TRUE(f.consequence);
    EXPECT_GE(LexicalBaselineClassifier::probability(text), 0.5);
}

TEST(LexicalBaseline, LogitIsTheDocumentedSum)
{
    LexicalFeatures f;
    f.words = 8;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), -1.0);
    f.words = 0;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), -2.0);
    f.code_span = f.imperative_lead = f.consequence = true;
    f.words = 12;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), 3.0);
    f = {};
    f.praise_only = true;
    f.words = 2;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), -5.0);
    f = {};
    f.formatting_nit = true;
    f.question_only = true;
    f.vague = true;
    f.words = 6;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), -6.0);
    f.consequence = true;
    EXPECT_DOUBLE_EQ(LexicalBaselineClassifier::logit(f), -5.0);
    EXPECT_FALSE(LexicalBaselineClassifier::features("Add a blank line here, otherwise the linter fails.").formatting_nit);
    EXPECT_TRUE(LexicalBaselineClassifier::features("Add a blank line here").formatting_nit);
}

TEST(LexicalBaseline, HandLabeledSetAgreement)
{
    auto pairs = training_pairs_from_json_lines(rt::read_text(rt::test_data("gate/labeled.jsonl")));
    ASSERT_EQ(pairs.size(), 50u);
    int agree = 0;
    for (auto& p : pairs)
        agree += (LexicalBaselineClassifier::probability(p.text) >= 0.5) == (p.label == 1);
    EXPECT_GE(agree, 45);
}

TEST(LexicalBaseline, Deterministic)
{
    LexicalBaselineClassifier c;
    auto a = c.probabilities({"Use `x`.", "Nice", "Use `x`."});
    EXPECT_EQ(a, c.probabilities({"Use `x`.", "Nice", "Use `x`."}));
    EXPECT_EQ(a[0], a[2]);
}

TEST(GateScore, PassingAdvancesFailingRejects)
{
    FixedClassifier c({0.9, 0.2});
    auto r = score({checked("a", "x"), checked("b", "y")}, c);
    EXPECT_EQ(r.comments[0].state, CommentState::gated);
    EXPECT_EQ(r.comments[1].state, CommentState::rejected);
    EXPECT_EQ(r.comments[1].note, "rejected by gate: p=0.200 < 0.500");
    EXPECT_TRUE(r.scores[0].passed);
    EXPECT_FALSE(r.scores[1].fallback);
}

TEST(GateScore, ThresholdMonotonicity)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> p(10);
        std::vector<ReviewComment> cs;
        for (int i = 0; i < 10; ++i) {
            p[i] = u(rng);
            cs.push_back(checked(std::to_string(i), "x"));
        }
        FixedClassifier c(p);
        double t1 = u(rng), t2 = u(rng);
        if (t1 > t2)
            std::swap(t1, t2);
        auto lo = score(cs, c, {t1, true});
        auto hi = score(cs, c, {t2, true});
        for (int i = 0; i < 10; ++i)
            if (hi.scores[i].passed)
                EXPECT_TRUE(lo.scores[i].passed);
    }
}

TEST(GateScore, UnavailableFailsOpenByDefault)
{
    DownClassifier c;
    auto open = score({checked("a", "x")}, c);
    EXPECT_EQ(open.comments[0].state, CommentState::gated);
    EXPECT_TRUE(open.scores[0].fallback);
    EXPECT_EQ(open.comments[0].note, "gate failed open");
    EXPECT_EQ(open.warnings.size(), 1u);
    auto closed = score({checked("a", "x")}, c, {0.5, false});
    EXPECT_EQ(closed.comments[0].state, CommentState::rejected);
    EXPECT_TRUE(closed.scores[0].fallback);
}

TEST(GateScore, PreconditionsChecked)
{
    FixedClassifier c({0.9});
    EXPECT_THROW(score({rt::comment("a", "a.py", 1, "x")}, c), Error);
    EXPECT_THROW(score({checked("a", "x")}, c, {1.5, true}), Error);
    EXPECT_TRUE(score({}, c).comments.empty());
}

TEST(RemoteClassifier, WireProtocol)
{
    FakeScorer fake;
    RemoteClassifier rc(fake.url(), fast_retry(), {});
    EXPECT_TRUE(rc.probabilities({}).empty());
    auto p = rc.probabilities({"abc", "abcdefg", "abc"});
    EXPECT_EQ(p, (std::vector<double>{0.3, 0.7, 0.3}));
    auto h = rc.healthz();
    EXPECT_EQ(h.status, "ok");
    EXPECT_EQ(h.model_version, "m-7");
    auto big = rc.probabilities({std::string(10000, 'x')});
    EXPECT_DOUBLE_EQ(big[0], 0.2);
}

TEST(RemoteClassifier, RetriesServerErrors)
{
    FakeScorer fake;
    fake.fail_first = 2;
    RemoteClassifier rc(fake.url(), fast_retry(), {});
    EXPECT_EQ(rc.probabilities({"a"}).size(), 1u);
    EXPECT_EQ(fake.score_calls.load(), 3);
    fake.fail_first = 5;
    EXPECT_THROW(rc.probabilities({"a"}), Error);
}

TEST(RemoteClassifier, MalformedRepliesAreUnavailable)
{
    FakeScorer fake;
    RemoteClassifier rc(fake.url(), fast_retry(), {});
    for (auto mode : {"short", "range", "garbage"}) {
        fake.mode = mode;
        try {
            rc.probabilities({"a", "b"});
            FAIL() << mode;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::classifier_unavailable) << mode;
        }
    }
}

TEST(RemoteClassifier, DeadEndpointFailsOpenThroughGate)
{
    int port;
    {
        FakeScorer fake;
        port = fake.port;
    }
    RemoteClassifier rc("http://127.0.0.1:" + std::to_string(port), fast_retry(), {}, std::chrono::seconds(1));
    auto r = score({checked("a", "x")}, rc);
    EXPECT_TRUE(r.scores[0].fallback);
    EXPECT_EQ(r.comments[0].state, CommentState::gated);
}

TEST(TrainingExport, LabelsAndOrder)
{
    std::vector<ResolutionRecord> recs;
    auto add = [&](Verdict v, Timestamp t, const std::string& body) {
        ResolutionRecord r;
        r.comment = rt::comment("c", "a", 1, body, Origin::generated, CommentState::posted);
        r.verdict = v;
        if (v == Verdict::resolved)
            r.resolving_commit = "x";
        r.observed_at = t;
        recs.push_back(r);
    };
    for (int i = 0; i < 3; ++i)
        add(Verdict::resolved, rt::day(2025, 1, 1 + i), "r" + std::to_string(i));
    add(Verdict::unresolved, rt::day(2025, 1, 5), "u0");
    add(Verdict::unresolved, rt::day(2025, 1, 6), "u1");
    add(Verdict::resolved, rt::day(2025, 2, 1), "late");
    add(Verdict::indeterminate, rt::day(2025, 1, 2), "ind");
    auto pairs = export_training_pairs(recs, rt::day(2025, 2, 1));
    ASSERT_EQ(pairs.size(), 5u);
    std::vector<int> labels;
    for (auto& p : pairs)
        labels.push_back(p.label);
    EXPECT_EQ(labels, (std::vector<int>{1, 1, 1, 0, 0}));
    auto text = to_json_lines(pairs);
    EXPECT_EQ(text.substr(0, text.find('\n')), R"({"label":1,"text":"r0"})");
    EXPECT_EQ(training_pairs_from_json_lines(text), pairs);
    try {
        export_training_pairs(recs, rt::day(2024, 1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_after_filtering);
    }
}
