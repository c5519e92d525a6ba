#include "tabreason/gateway.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace tabreason;
namespace fs = std::filesystem;

namespace {

/// Replays a queue of canned responses and records payloads.
class QueueTransport final : public Transport {
public:
    TransportResponse send(const ChatPayload& payload) override {
        sent.push_back(payload);
        if (replies.empty()) return {500, "exhausted", std::nullopt};
        auto r = replies.front();
        replies.pop_front();
        return r;
    }

    static TransportResponse ok(const std::string& text) {
        nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
        return {200, body.dump(), std::nullopt};
    }

    std::deque<TransportResponse> replies;
    std::vector<ChatPayload> sent;
};

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("tabreason_gateway_" + name);
    fs::remove_all(dir);
    return dir;
}

GatewayConfig config(GatewayMode mode) {
    GatewayConfig c;
    c.mode = mode;
    return c;
}

CompletionRequest request(std::string prompt, int sample = 0, int turn = 0) {
    CompletionRequest r;
    r.prompt = std::move(prompt);
    r.sample_index = sample;
    r.turn = turn;
    return r;
}

} // namespace

TEST(Routing, ShortPromptsUseSmallModel) {
    RoutingConfig routing;
    EXPECT_EQ(route_model(request(std::string(3584 * 4, 'x')), routing), routing.small_model);
    EXPECT_EQ(route_model(request(std::string(3584 * 4 + 1, 'x')), routing), routing.large_model);
    auto forced = request("x");
    forced.model_class = ModelClass::large_ctx;
    EXPECT_EQ(route_model(forced, routing), routing.large_model);
}

TEST(Routing, TokenEstimateCountsCodePoints) {
    EXPECT_EQ(estimate_tokens(""), 0u);
    EXPECT_EQ(estimate_tokens("abcde"), 2u);
    EXPECT_EQ(estimate_tokens("üüüü"), 1u);
}

TEST(FixtureKey, PinnedSerialization) {
    auto r = request("hello", 2, 1);
    r.temperature = 0.8;
    EXPECT_EQ(fixture_key(r, "gpt-3.5-turbo-0613"), "f09c9efdf42f5184ab8e6cd06a7ffaf41e43080b1504fd40a8dc22462dfb8181");
}

TEST(FixtureKey, EveryFieldChangesTheKey) {
    const auto base = request("p", 0, 0);
    const auto k = fixture_key(base, "m");
    auto t = base;
    t.temperature = 0.8;
    EXPECT_NE(fixture_key(t, "m"), k);
    EXPECT_NE(fixture_key(request("p", 1, 0), "m"), k);
    EXPECT_NE(fixture_key(request("p", 0, 1), "m"), k);
    EXPECT_NE(fixture_key(request("q", 0, 0), "m"), k);
    EXPECT_NE(fixture_key(base, "n"), k);
    auto tokens = base;
    tokens.max_output_tokens = 7;
    EXPECT_EQ(fixture_key(tokens, "m"), k);
}

TEST(Retry, BackoffDoublesAndHonoursRetryAfter) {
    RetryPolicy p;
    EXPECT_EQ(p.delay_for(1, std::nullopt).count(), 500);
    EXPECT_EQ(p.delay_for(3, std::nullopt).count(), 2000);
    EXPECT_EQ(p.delay_for(10, std::nullopt).count(), 30000);
    EXPECT_EQ(p.delay_for(1, std::chrono::milliseconds(1234)).count(), 1234);
    EXPECT_TRUE(RetryPolicy::retryable(429));
    EXPECT_TRUE(RetryPolicy::retryable(503));
    EXPECT_FALSE(RetryPolicy::retryable(400));
}

TEST(Gateway, RetriesTransientFailures) {
    auto transport = std::make_shared<QueueTransport>();
    transport->replies = {{429, "slow down", std::chrono::milliseconds(7)}, {503, "busy", std::nullopt},
                          QueueTransport::ok("done")};
    Gateway gw(config(GatewayMode::live), transport, nullptr);
    std::vector<long> sleeps;
    gw.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(static_cast<long>(d.count())); });
    EXPECT_EQ(gw.complete(request("hi")), "done");
    EXPECT_EQ(sleeps, (std::vector<long>{7, 1000}));
    EXPECT_EQ(gw.stats().live_calls, 3u);
    EXPECT_EQ(transport->sent[0].to_json().at("messages").at(0).at("content"), "hi");
}

TEST(Gateway, RateLimitedAfterMaxAttempts) {
    auto transport = std::make_shared<QueueTransport>();
    for (int i = 0; i < 5; ++i) transport->replies.push_back({429, "", std::nullopt});
    Gateway gw(config(GatewayMode::live), transport, nullptr);
    gw.set_sleeper([](std::chrono::milliseconds) {});
    try {
        gw.complete(request("hi"));
        FAIL() << "expected RateLimited";
    } catch (const RateLimited& e) {
        EXPECT_EQ(e.attempts(), 5);
    }
}

TEST(Gateway, ClientErrorsAreNotRetried) {
    auto transport = std::make_shared<QueueTransport>();
    transport->replies = {{401, "bad key", std::nullopt}};
    Gateway gw(config(GatewayMode::live), transport, nullptr);
    EXPECT_THROW(gw.complete(request("hi")), ProviderError);
    EXPECT_EQ(transport->sent.size(), 1u);
}

TEST(Gateway, RecordThenReplay) {
    const auto dir = scratch("record");
    auto transport = std::make_shared<QueueTransport>();
    transport->replies = {QueueTransport::ok("first"), QueueTransport::ok("second")};
    {
        Gateway rec(config(GatewayMode::record), transport, std::make_shared<FixtureStore>(dir));
        rec.set_clock([] { return std::string("2024-01-01T00:00:00Z"); });
        EXPECT_EQ(rec.complete(request("a")), "first");
        EXPECT_EQ(rec.complete(request("a", 1)), "second");
        EXPECT_EQ(rec.complete(request("a")), "first");
        EXPECT_EQ(transport->sent.size(), 2u);
    }
    Gateway replay(config(GatewayMode::replay), nullptr, std::make_shared<FixtureStore>(dir));
    EXPECT_EQ(replay.complete(request("a", 1)), "second");
    EXPECT_EQ(replay.stats().fixture_hits, 1u);
    try {
        replay.complete(request("a", 2));
        FAIL() << "expected FixtureMiss";
    } catch (const FixtureMiss& e) {
        EXPECT_EQ(e.key().size(), 64u);
    }
}

TEST(Gateway, ModeRequirements) {
    EXPECT_THROW(Gateway(config(GatewayMode::replay), nullptr, nullptr), ConfigError);
    EXPECT_THROW(Gateway(config(GatewayMode::record), nullptr, std::make_shared<FixtureStore>(scratch("req"))),
                 ConfigError);
    EXPECT_EQ(parse_gateway_mode("record"), GatewayMode::record);
    EXPECT_THROW(parse_gateway_mode("offline"), std::invalid_argument);
}

TEST(FixtureStore, IndexIsSortedAndRebuildable) {
    const auto dir = scratch("index");
    FixtureStore store(dir);
    const std::string k1(64, 'b');
    const std::string k2(64, 'a');
    store.put({k1, "m", 0.0, 0, 0, "p", "r1", "t"});
    store.put({k2, "m", 0.8, 3, 2, "p", "r2", "t"});
    const auto index = std::string(k2 + "\tm\t3\t2\n" + k1 + "\tm\t0\t0\n");
    std::ifstream in(dir / "index.tsv");
    std::string got((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(got, index);
    fs::remove(dir / "index.tsv");
    FixtureStore reopened(dir);
    EXPECT_EQ(reopened.keys(), (std::vector<std::string>{k2, k1}));
    EXPECT_EQ(reopened.find(k2)->response, "r2");
    EXPECT_FALSE(reopened.find("../etc/passwd").has_value());
    EXPECT_THROW(store.put({"nothex", "m", 0.0, 0, 0, "p", "r", "t"}), GatewayError);
}

TEST(RateLimiter, CapsConcurrency) {
    RateLimiter limiter(2);
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] {
            auto permit = limiter.acquire();
            const int now = ++active;
            int p = peak.load();
            while (now > p && !peak.compare_exchange_weak(p, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --active;
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_LE(peak.load(), 2);
}

TEST(Completion, ExtractsFirstChoice) {
    EXPECT_EQ(extract_completion_text(QueueTransport::ok("x").body), "x");
    EXPECT_THROW(extract_completion_text("{}"), GatewayError);
}
