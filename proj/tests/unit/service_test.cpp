#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "revkit/prompt.hpp"
#include "revkit/service.hpp"
#include "test_support.hpp"

using namespace revkit;
using namespace revkit::service;
namespace rt = revkit::testing;

namespace {

struct Rig {
    explicit Rig(ServiceConfig cfg = {}, std::optional<std::filesystem::path> store_file = std::nullopt)
        : host(rt::fixtures("prs")),
          tracker(rt::fixtures("prs/issues.json")),
          repo(rt::fixtures("prs")),
          mock(llm::make_scripted_mock()),
          gateway(*mock, {}),
          store(store_file),
          clock(parse_timestamp("2025-06-01T12:00:00Z")),
          service(std::move(cfg), repo, {&host, &tracker}, gateway, classifier, store, clock)
    {
    }

    context::FixtureCodeHost host;
    context::FixtureIssueTracker tracker;
    context::FixtureRepository repo;
    std::unique_ptr<llm::MockBackend> mock;
    llm::Gateway gateway;
    gate::LexicalBaselineClassifier classifier;
    Store store;
    ManualClock clock;
    ReviewService service;
};

ReviewEvent event(const std::string& id, const std::string& pr, EventKind kind = EventKind::pr_created)
{
    return {id, pr, "demo/shop", kind, parse_timestamp("2025-06-01T12:00:00Z"), ""};
}

http::Request signed_post(const std::string& secret, const std::string& body)
{
    http::Request req;
    req.method = "POST";
    req.path = "/events";
    req.body = body;
    req.headers.emplace("X-Revkit-Signature", "sha256=" + hmac_sha256_hex(secret, body));
    return req;
}

}  // namespace

TEST(Service, PostsEveryGatedComment)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e1", "PR-2"));
    EXPECT_EQ(run.stage, Stage::done);
    EXPECT_EQ(run.source_commit, "src02");
    EXPECT_EQ(run.counts.candidates, 3);
    EXPECT_EQ(run.counts.posted, 3);
    EXPECT_TRUE(run.counts.balanced());
    ASSERT_EQ(run.comments.size(), 3u);
    for (auto& c : run.comments) {
        EXPECT_EQ(c.state, CommentState::posted);
        EXPECT_TRUE(c.host_comment_id.has_value());
    }
    EXPECT_EQ(rig.host.posted().size(), 3u);
    EXPECT_EQ(rig.store.posted_comments().at("PR-2").size(), 3u);
    EXPECT_EQ(rig.store.run(run.run_id), run);
}

TEST(Service, OnlyFetchesAndPostsComments)
{
    Rig rig;
    for (int i = 1; i <= 5; ++i)
        rig.service.handle_event(event("e" + std::to_string(i), "PR-" + std::to_string(i)));
    for (auto& call : rig.host.calls())
        EXPECT_TRUE(call.rfind("fetch_pull_request ", 0) == 0 || call.rfind("post_comment ", 0) == 0) << call;
}

TEST(Service, StagesAdvanceMonotonically)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e1", "PR-1"));
    std::vector<Stage> stages;
    for (auto& m : run.timings)
        stages.push_back(m.stage);
    EXPECT_EQ(stages, (std::vector<Stage>{Stage::assembling, Stage::generating, Stage::fact_checking, Stage::gating,
                                          Stage::posting, Stage::done}));
}

TEST(Service, DuplicateEventIsHandledOnce)
{
    Rig rig;
    auto first = rig.service.handle_event(event("dup", "PR-1"));
    auto second = rig.service.handle_event(event("dup", "PR-1"));
    EXPECT_EQ(first, second);
    EXPECT_EQ(rig.host.posted().size(), static_cast<std::size_t>(first.counts.posted));
    EXPECT_EQ(rig.store.events().size(), 1u);
}

TEST(Service, SameRevisionIsReviewedOnce)
{
    Rig rig;
    auto first = rig.service.handle_event(event("a", "PR-1"));
    auto again = rig.service.handle_event(event("b", "PR-1", EventKind::pr_updated));
    EXPECT_TRUE(first.skip_reason.empty());
    EXPECT_EQ(again.skip_reason, "already-reviewed");
    EXPECT_EQ(again.stage, Stage::done);
    EXPECT_EQ(again.counts, RunCounts{});
    EXPECT_EQ(rig.host.posted().size(), static_cast<std::size_t>(first.counts.posted));
}

TEST(Service, DisabledTriggerSkipsWithoutTraffic)
{
    ServiceConfig cfg;
    cfg.triggers = {EventKind::pr_created};
    Rig rig(cfg);
    auto run = rig.service.handle_event(event("u", "PR-1", EventKind::pr_updated));
    EXPECT_EQ(run.skip_reason, "trigger-disabled");
    EXPECT_TRUE(rig.host.calls().empty());
    EXPECT_EQ(rig.mock->call_count(), 0u);
}

TEST(Service, PostFailureKeepsCommentGated)
{
    Rig rig;
    rig.host.reject_anchor("auth/login.py", 4);
    auto run = rig.service.handle_event(event("e", "PR-2"));
    EXPECT_EQ(run.stage, Stage::done);
    EXPECT_EQ(run.counts.posted, 2);
    EXPECT_EQ(run.counts.post_failed, 1);
    EXPECT_TRUE(run.counts.balanced());
    int gated = 0;
    for (auto& c : run.comments)
        if (c.state == CommentState::gated) {
            ++gated;
            EXPECT_EQ(c.line, 4);
            ASSERT_TRUE(c.note);
            EXPECT_EQ(c.note->rfind("post failed: ", 0), 0u);
        }
    EXPECT_EQ(gated, 1);
}

TEST(Service, PraiseIsGatedAndNothingPosted)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e", "PR-3"));
    EXPECT_EQ(run.counts.candidates, 1);
    EXPECT_EQ(run.counts.gate_rejected, 1);
    EXPECT_EQ(run.counts.posted, 0);
    EXPECT_TRUE(run.counts.balanced());
    EXPECT_EQ(run.comments[0].state, CommentState::rejected);
    EXPECT_TRUE(rig.host.posted().empty());
}

TEST(Service, MissingIssueDegradesContext)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e", "PR-5"));
    EXPECT_EQ(run.stage, Stage::done);
    EXPECT_FALSE(run.warnings.empty());
    EXPECT_EQ(run.counts.posted, 2);
}

TEST(Service, FactRejectionCounted)
{
    Rig rig;
    rig.mock->set_responder([](const llm::ChatRequest& r) {
        if (r.prompt.find("<<SECTION candidates>>") != std::string::npos) {
            auto body = *prompt::find_section(r.prompt, "candidates");
            auto items = nlohmann::json::parse(body);
            nlohmann::json out = nlohmann::json::array();
            for (auto& c : items)
                out.push_back({{"comment_id", c["comment_id"]}, {"verdict", c["line"] != 2}, {"rationale", "r"}});
            return "```json\n" + out.dump() + "\n```";
        }
        return llm::scripted_response(r);
    });
    auto run = rig.service.handle_event(event("e", "PR-2"));
    EXPECT_EQ(run.counts.fact_rejected, 1);
    EXPECT_EQ(run.counts.posted, 2);
    EXPECT_TRUE(run.counts.balanced());
}

TEST(Service, DryRunHoldsComments)
{
    ServiceConfig cfg;
    cfg.dry_run = true;
    Rig rig(cfg);
    auto run = rig.service.handle_event(event("e", "PR-2"));
    EXPECT_EQ(run.counts.held, 3);
    EXPECT_EQ(run.counts.posted, 0);
    EXPECT_TRUE(run.counts.balanced());
    EXPECT_TRUE(rig.host.posted().empty());
}

TEST(Service, UnknownPullRequestFailsInAssembly)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e", "PR-404"));
    EXPECT_EQ(run.stage, Stage::failed);
    EXPECT_EQ(run.failed_stage, Stage::assembling);
    EXPECT_FALSE(run.error.empty());
}

TEST(Service, BackendOutageFailsInGeneration)
{
    Rig rig;
    rig.mock->set_responder([](const llm::ChatRequest&) -> std::string {
        throw llm::TransportError("down");
    });
    llm::GatewayConfig gc;
    gc.retry.initial_backoff = std::chrono::milliseconds(0);
    llm::Gateway gw(*rig.mock, gc, [](std::chrono::milliseconds) {});
    ReviewService svc({}, rig.repo, {&rig.host, &rig.tracker}, gw, rig.classifier, rig.store, rig.clock);
    auto run = svc.handle_event(event("e", "PR-1"));
    EXPECT_EQ(run.stage, Stage::failed);
    EXPECT_EQ(run.failed_stage, Stage::generating);
    // The revision is released for a later retry.
    rig.mock->set_responder(llm::scripted_response);
    auto retry = svc.handle_event(event("e2", "PR-1"));
    EXPECT_EQ(retry.stage, Stage::done);
    EXPECT_TRUE(retry.skip_reason.empty());
}

TEST(Service, ShuffledDuplicateDeliveriesPostExactlyOnce)
{
    Rig reference;
    std::map<std::string, int> expected;
    for (int i = 1; i <= 5; ++i) {
        auto id = "PR-" + std::to_string(i);
        expected[id] = reference.service.handle_event(event("e" + id, id)).counts.posted;
    }

    std::mt19937 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        Rig rig;
        std::vector<ReviewEvent> deliveries;
        for (int i = 1; i <= 5; ++i)
            for (int k = 0; k < 3; ++k) {
                auto id = "PR-" + std::to_string(i);
                deliveries.push_back(event("e" + id, id));
            }
        std::shuffle(deliveries.begin(), deliveries.end(), rng);
        for (auto& d : deliveries)
            rig.service.submit(d);
        rig.service.drain();
        std::map<std::string, int> posted;
        for (auto& p : rig.host.posted())
            ++posted[p.pr_id];
        for (auto& [pr, n] : expected)
            EXPECT_EQ(posted[pr], n) << pr;
        EXPECT_EQ(rig.store.runs().size(), 5u);
        for (auto& r : rig.store.runs()) {
            EXPECT_EQ(r.stage, Stage::done);
            EXPECT_TRUE(r.counts.balanced());
        }
    }
}

TEST(Service, StoreSurvivesRestart)
{
    rt::ScratchDir dir;
    auto file = dir.path() / "store.jsonl";
    ReviewRun first;
    {
        Rig rig({}, file);
        first = rig.service.handle_event(event("e", "PR-1"));
    }
    Rig rig({}, file);
    EXPECT_EQ(rig.store.run(first.run_id), first);
    EXPECT_EQ(rig.service.handle_event(event("e", "PR-1")), first);
    auto other = rig.service.handle_event(event("f", "PR-1"));
    EXPECT_EQ(other.skip_reason, "already-reviewed");
    EXPECT_TRUE(rig.host.posted().empty());
    auto log = rig.store.log_text();
    EXPECT_NE(log.find("\"kind\":\"comment\""), std::string::npos);
}

TEST(Service, RunJsonRoundTrip)
{
    Rig rig;
    auto run = rig.service.handle_event(event("e", "PR-2"));
    EXPECT_EQ(run_from_json(to_json(run)), run);
    auto ev = event("x", "PR-9", EventKind::pr_updated);
    EXPECT_EQ(event_from_json(to_json(ev)), ev);
    EXPECT_EQ(run_id_for("e"), run_id_for("e"));
    EXPECT_NE(run_id_for("e"), run_id_for("f"));
}

TEST(Webhook, SignatureChecked)
{
    Rig rig;
    WebhookServer server(rig.service, rig.store, "s3cret", rig.clock);
    std::string body = R"({"event_id":"w1","kind":"pr_created","pr":{"id":"PR-1"}})";
    auto bad = signed_post("wrong", body);
    EXPECT_EQ(server.handle_post_event(bad).status, 401);
    http::Request unsigned_req;
    unsigned_req.body = body;
    EXPECT_EQ(server.handle_post_event(unsigned_req).status, 401);

    auto ok = server.handle_post_event(signed_post("s3cret", body));
    EXPECT_EQ(ok.status, 202);
    auto run_id = nlohmann::json::parse(ok.body)["run_id"].get<std::string>();
    EXPECT_EQ(run_id, run_id_for("w1"));
    rig.service.drain();
    auto got = server.handle_get_run(run_id);
    EXPECT_EQ(got.status, 200);
    EXPECT_EQ(nlohmann::json::parse(got.body)["stage"], "done");
    EXPECT_EQ(server.handle_get_run("run-nope").status, 404);
}

TEST(Webhook, MalformedBodies)
{
    Rig rig;
    WebhookServer server(rig.service, rig.store, "k", rig.clock);
    EXPECT_EQ(server.handle_post_event(signed_post("k", "not json")).status, 400);
    EXPECT_EQ(server.handle_post_event(signed_post("k", R"({"event_id":"x"})")).status, 400);
    EXPECT_EQ(server.handle_post_event(signed_post("k", R"({"event_id":"x","kind":"closed","pr":{"id":1}})")).status,
              400);
    EXPECT_EQ(server.handle_post_event(
                  signed_post("k", R"({"event_id":"x","kind":"pr_created","pr":{"id":1},"diff":"garbage"})"))
                  .status,
              400);
}

TEST(Webhook, InlineDiffOverSocket)
{
    Rig rig;
    WebhookServer server(rig.service, rig.store, "k", rig.clock);
    int port = server.start("127.0.0.1", 0);
    nlohmann::json payload{{"event_id", "inline-1"},
                           {"kind", "pr_created"},
                           {"repo", "demo/other"},
                           {"pr",
                            {{"id", 77},
                             {"title", "Inline"},
                             {"source_commit", "abc"},
                             {"target_commit", "def"},
                             {"created_at", "2025-06-01T10:00:00Z"}}},
                           {"diff", rt::unified_diff("x.py", "a = 1\n", "a = 1\nprint(a)\n")}};
    auto body = payload.dump();
    http::Headers h{{"X-Revkit-Signature", hmac_sha256_hex("k", body)}};
    auto base = "http://127.0.0.1:" + std::to_string(port);
    auto r = http::post_json(base, "/events", body, h);
    ASSERT_EQ(r.status, 202) << r.body;
    rig.service.drain();
    auto run = rig.store.run(run_id_for("inline-1"));
    ASSERT_TRUE(run);
    EXPECT_EQ(run->stage, Stage::done);
    EXPECT_EQ(run->pr_id, "77");
    EXPECT_EQ(run->counts.posted, 1);
    auto g = http::get(base, "/runs/" + run->run_id);
    EXPECT_EQ(g.status, 200);
    EXPECT_EQ(http::get(base, "/runs/run-0").status, 404);
    server.stop();
}
