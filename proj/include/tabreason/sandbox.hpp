#pragma once

#include "tabreason/table.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Client side of the code-execution worker. The worker itself is a separate
// program; this header defines the line-delimited JSON protocol it speaks and
// the session handles the agent loop drives.
//
// Wire protocol, one JSON object per line on the worker's stdin/stdout:
//
//   -> {"id": n, "op": "init", "table": {"header": [..], "rows": [[..]]}}
//   -> {"id": n, "op": "exec", "code": "...", "timeout_ms": 10000}
//   -> {"id": n, "op": "ping"}
//   -> {"id": n, "op": "shutdown"}
//   <- {"id": n, "ok": bool, "output": "...", "error": null | {"type", "message", "traceback"},
//       "duration_ms": int, "truncated": bool}
//
// stderr is left to the worker for diagnostics.
namespace tabreason {

struct TablePayload {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static TablePayload from_table(const Table& table);
    nlohmann::json to_json() const;
};

struct SandboxError {
    std::string type;
    std::string message;
    std::string traceback;

    friend bool operator==(const SandboxError&, const SandboxError&) = default;
};

struct Observation {
    bool ok = true;
    std::string output;
    std::optional<SandboxError> error;
    std::int64_t duration_ms = 0;
    bool truncated = false;
    bool timed_out = false;

    /// Text shown to the agent after "Observation: ".
    std::string render() const;

    nlohmann::json to_json() const;
    static Observation from_json(const nlohmann::json& j);
};

class SessionDead : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class SpawnFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class InitFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ObservationMiss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One code-execution session holding a dataframe named `df`.
class Sandbox {
public:
    virtual ~Sandbox() = default;
    virtual void start(const TablePayload& table) = 0;
    virtual Observation execute(const std::string& code, int timeout_ms) = 0;
    virtual bool ping() = 0;
    /// Idempotent.
    virtual void shutdown() = 0;
};

using SandboxFactory = std::function<std::unique_ptr<Sandbox>()>;

struct SandboxLimits {
    int default_timeout_ms = 10000;
    std::uint64_t memory_bytes = 512ull << 20; ///< RLIMIT_AS in the child; 0 disables
    bool isolate_network = true;               ///< best-effort unshare(CLONE_NEWNET)
    std::chrono::milliseconds shutdown_grace{2000};
};

/// Worker subprocess speaking the protocol above. A timed-out exec kills the
/// process, starts a fresh one and re-sends init, so the session stays usable
/// but loses its variables.
class SubprocessSandbox final : public Sandbox {
public:
    SubprocessSandbox(std::vector<std::string> argv, SandboxLimits limits = {});
    ~SubprocessSandbox() override;

    SubprocessSandbox(const SubprocessSandbox&) = delete;
    SubprocessSandbox& operator=(const SubprocessSandbox&) = delete;

    void start(const TablePayload& table) override;
    Observation execute(const std::string& code, int timeout_ms) override;
    bool ping() override;
    void shutdown() override;

    int pid() const { return pid_; }

private:
    void spawn();
    void kill_worker();
    void send(const nlohmann::json& request);
    /// nullopt on deadline expiry.
    std::optional<nlohmann::json> receive(std::chrono::steady_clock::time_point deadline);
    nlohmann::json round_trip(nlohmann::json request, std::chrono::milliseconds budget);

    std::vector<std::string> argv_;
    SandboxLimits limits_;
    std::optional<TablePayload> table_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buffer_;
    std::int64_t next_id_ = 1;
    bool closed_ = false;
};

/// Persists observations keyed by the table and the code history of the
/// session, so agent runs can be replayed without a worker:
///
///   <root>/observations/<key>.json
///
/// key = sha256("tabreason-observation-v1\n" + table JSON + "\n" + each exec'd
/// code followed by "\n\x1e\n"). The history resets after a timeout because
/// the worker restarts.
class ObservationStore {
public:
    explicit ObservationStore(std::filesystem::path root);

    std::optional<Observation> find(const std::string& key) const;
    void put(const std::string& key, const Observation& obs, const std::vector<std::string>& history);
    std::size_t size() const;

    static std::string key_for(const TablePayload& table, const std::vector<std::string>& history);

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
};

/// Forwards to a live sandbox and stores every observation.
class RecordingSandbox final : public Sandbox {
public:
    RecordingSandbox(std::unique_ptr<Sandbox> inner, std::shared_ptr<ObservationStore> store);
    void start(const TablePayload& table) override;
    Observation execute(const std::string& code, int timeout_ms) override;
    bool ping() override { return inner_->ping(); }
    void shutdown() override { inner_->shutdown(); }

private:
    std::unique_ptr<Sandbox> inner_;
    std::shared_ptr<ObservationStore> store_;
    std::optional<TablePayload> table_;
    std::vector<std::string> history_;
};

/// Answers from the store only; throws ObservationMiss on unknown history.
class ReplaySandbox final : public Sandbox {
public:
    explicit ReplaySandbox(std::shared_ptr<ObservationStore> store);
    void start(const TablePayload& table) override;
    Observation execute(const std::string& code, int timeout_ms) override;
    bool ping() override { return table_.has_value() && !closed_; }
    void shutdown() override { closed_ = true; }

private:
    std::shared_ptr<ObservationStore> store_;
    std::optional<TablePayload> table_;
    std::vector<std::string> history_;
    bool closed_ = false;
};

/// Splits a shell-style command line on whitespace, honouring double quotes.
std::vector<std::string> split_command(const std::string& command);

/// Column names as the worker will see them: duplicates get ".1", ".2", ...
std::vector<std::string> uniquify_headers(const std::vector<std::string>& header);

} // namespace tabreason
