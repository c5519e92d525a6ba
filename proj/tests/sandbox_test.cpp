#include "support/testkit.hpp"

#include "tabreason/sandbox.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

using namespace tabreason;
namespace fs = std::filesystem;

namespace {

TablePayload payload() {
    return TablePayload::from_table(
        Table("t", {{"Year", "City", "Year"}, {"1996", "Atlanta", "x"}, {"2000", "Sydney", "y"}, {"2004", "Athens", "z"}}));
}

class WorkerTest : public ::testing::Test {
protected:
    void SetUp() override {
        argv_ = testkit::fake_worker_argv();
        if (argv_.empty()) GTEST_SKIP() << "python3 with pandas is not available";
    }

    std::unique_ptr<SubprocessSandbox> make(int timeout_ms = 5000) {
        SandboxLimits limits;
        limits.default_timeout_ms = timeout_ms;
        limits.memory_bytes = 0;
        auto sb = std::make_unique<SubprocessSandbox>(argv_, limits);
        sb->start(payload());
        return sb;
    }

    std::vector<std::string> argv_;
};

} // namespace

TEST(Sandbox, UniquifiesDuplicateHeaders) {
    EXPECT_EQ(uniquify_headers({"a", "b", "a", "a"}), (std::vector<std::string>{"a", "b", "a.1", "a.2"}));
    EXPECT_EQ(payload().header, (std::vector<std::string>{"Year", "City", "Year.1"}));
    EXPECT_EQ(payload().rows.size(), 3u);
}

TEST(Sandbox, SplitCommandHonoursQuotes) {
    EXPECT_EQ(split_command("python3  \"my worker.py\" -u"),
              (std::vector<std::string>{"python3", "my worker.py", "-u"}));
}

TEST(Sandbox, ObservationRendersErrors) {
    Observation o;
    o.ok = false;
    o.output = "partial";
    o.error = SandboxError{"KeyError", "'Nation'", "tb"};
    EXPECT_EQ(o.render(), "partial\nKeyError: 'Nation'");
    const auto back = Observation::from_json(o.to_json());
    EXPECT_EQ(back.error, o.error);
}

TEST(Sandbox, MissingExecutableIsSpawnFailure) {
    SubprocessSandbox sb({"/nonexistent/worker"});
    EXPECT_THROW(sb.start(payload()), SpawnFailure);
}

TEST_F(WorkerTest, ShapeAndObjectDtypes) {
    auto sb = make();
    EXPECT_EQ(sb->execute("df.shape", 5000).output, "(3, 3)");
    const auto dtypes = sb->execute("df.dtypes.tolist()", 5000).output;
    EXPECT_EQ(dtypes, "[dtype('O'), dtype('O'), dtype('O')]");
    EXPECT_TRUE(sb->ping());
}

TEST_F(WorkerTest, ExceptionsCarryTypeAndMessage) {
    auto sb = make();
    const auto o = sb->execute("df['Nation']", 5000);
    EXPECT_FALSE(o.ok);
    ASSERT_TRUE(o.error.has_value());
    EXPECT_EQ(o.error->type, "KeyError");
    EXPECT_EQ(o.error->message, "'Nation'");
}

TEST_F(WorkerTest, StatePersistsBetweenCalls) {
    auto sb = make();
    EXPECT_TRUE(sb->execute("x = df['City'].tolist()", 5000).ok);
    EXPECT_EQ(sb->execute("print(len(x))", 5000).output, "3");
}

TEST_F(WorkerTest, InfiniteLoopTimesOutAndSessionRecovers) {
    auto sb = make(1000);
    const auto start = std::chrono::steady_clock::now();
    const auto o = sb->execute("while True:\n    pass", 1000);
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    EXPECT_TRUE(o.timed_out);
    EXPECT_EQ(o.error->type, "Timeout");
    EXPECT_LE(elapsed, 1500);
    EXPECT_EQ(sb->execute("df.shape", 5000).output, "(3, 3)");
}

TEST_F(WorkerTest, ShutdownIsIdempotent) {
    auto sb = make();
    sb->shutdown();
    sb->shutdown();
    EXPECT_FALSE(sb->ping());
    EXPECT_THROW(sb->execute("1", 1000), SessionDead);
}

TEST(ObservationStore, RecordThenReplay) {
    const auto dir = fs::temp_directory_path() / "tabreason_observations";
    fs::remove_all(dir);
    auto store = std::make_shared<ObservationStore>(dir);

    auto inner = std::make_unique<testkit::EchoSandbox>();
    RecordingSandbox rec(std::move(inner), store);
    rec.start(payload());
    EXPECT_EQ(rec.execute("a", 100).output, "ran a");
    EXPECT_EQ(rec.execute("b", 100).output, "ran b");
    EXPECT_EQ(store->size(), 2u);

    ReplaySandbox replay(store);
    replay.start(payload());
    EXPECT_EQ(replay.execute("a", 100).output, "ran a");
    EXPECT_EQ(replay.execute("b", 100).output, "ran b");
    EXPECT_THROW(replay.execute("c", 100), ObservationMiss);

    ReplaySandbox other_order(store);
    other_order.start(payload());
    EXPECT_THROW(other_order.execute("b", 100), ObservationMiss);
}
