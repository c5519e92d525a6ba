#include "tabreason/sandbox.hpp"

#include "tabreason/dataset.hpp"
#include "tabreason/hash.hpp"

#include <spdlog/spdlog.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <map>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

namespace tabreason {

namespace fs = std::filesystem;

std::vector<std::string> uniquify_headers(const std::vector<std::string>& header) {
    std::map<std::string, int> seen;
    std::vector<std::string> out;
    out.reserve(header.size());
    for (const auto& h : header) {
        const int n = seen[h]++;
        out.push_back(n == 0 ? h : h + "." + std::to_string(n));
    }
    return out;
}

TablePayload TablePayload::from_table(const Table& table) {
    TablePayload p;
    p.header = uniquify_headers(table.header());
    for (std::size_t r = 1; r < table.rows(); ++r) p.rows.push_back(table.row(r));
    return p;
}

nlohmann::json TablePayload::to_json() const { return {{"header", header}, {"rows", rows}}; }

std::string Observation::render() const {
    if (ok) return output;
    std::string out = output;
    if (error) {
        if (!out.empty() && out.back() != '\n') out += '\n';
        out += error->type + ": " + error->message;
    }
    return out;
}

nlohmann::json Observation::to_json() const {
    nlohmann::json err = nullptr;
    if (error) err = {{"type", error->type}, {"message", error->message}, {"traceback", error->traceback}};
    return {{"ok", ok},
            {"output", output},
            {"error", err},
            {"duration_ms", duration_ms},
            {"truncated", truncated},
            {"timed_out", timed_out}};
}

Observation Observation::from_json(const nlohmann::json& j) {
    Observation o;
    o.ok = j.at("ok").get<bool>();
    o.output = j.value("output", std::string{});
    if (j.contains("error") && !j.at("error").is_null()) {
        const auto& e = j.at("error");
        o.error = SandboxError{e.value("type", std::string{}), e.value("message", std::string{}),
                               e.value("traceback", std::string{})};
    }
    o.duration_ms = j.value("duration_ms", std::int64_t{0});
    o.truncated = j.value("truncated", false);
    o.timed_out = j.value("timed_out", false);
    if (!o.ok && !o.error) o.error = SandboxError{"Error", "worker reported failure without details", ""};
    return o;
}

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool have = false;
    for (char c : command) {
        if (c == '"') {
            quoted = !quoted;
            have = true;
        } else if (!quoted && (c == ' ' || c == '\t')) {
            if (have) out.push_back(std::move(cur));
            cur.clear();
            have = false;
        } else {
            cur.push_back(c);
            have = true;
        }
    }
    if (have) out.push_back(std::move(cur));
    return out;
}

// SubprocessSandbox ------------------------------------------------------------

SubprocessSandbox::SubprocessSandbox(std::vector<std::string> argv, SandboxLimits limits)
    : argv_(std::move(argv)), limits_(limits) {
    if (argv_.empty()) throw SpawnFailure("empty worker command");
    // A worker that dies mid-write must surface as SessionDead, not kill us.
    std::signal(SIGPIPE, SIG_IGN);
}

SubprocessSandbox::~SubprocessSandbox() {
    try {
        shutdown();
    } catch (...) {
    }
}

void SubprocessSandbox::spawn() {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
    }
    // Report exec failures through a close-on-exec pipe.
    int err_pipe[2];
    if (pipe2(err_pipe, O_CLOEXEC) != 0) throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));

    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) throw SpawnFailure(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        if (limits_.memory_bytes > 0) {
            rlimit rl{limits_.memory_bytes, limits_.memory_bytes};
            setrlimit(RLIMIT_AS, &rl);
        }
        if (limits_.isolate_network) unshare(CLONE_NEWNET); // needs privileges; ignored otherwise
        execvp(args[0], args.data());
        const int e = errno;
        [[maybe_unused]] auto n = write(err_pipe[1], &e, sizeof e);
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    int child_errno = 0;
    const auto n = read(err_pipe[0], &child_errno, sizeof child_errno);
    close(err_pipe[0]);
    if (n == static_cast<ssize_t>(sizeof child_errno)) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        waitpid(pid, nullptr, 0);
        throw SpawnFailure("cannot execute " + argv_[0] + ": " + std::strerror(child_errno));
    }
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    read_buffer_.clear();
}

void SubprocessSandbox::kill_worker() {
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
    }
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    pid_ = -1;
    to_child_ = -1;
    from_child_ = -1;
    read_buffer_.clear();
}

void SubprocessSandbox::send(const nlohmann::json& request) {
    const std::string line = request.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
        const auto n = ::write(to_child_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw SessionDead(std::string("worker pipe closed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<nlohmann::json> SubprocessSandbox::receive(std::chrono::steady_clock::time_point deadline) {
    while (true) {
        if (const auto nl = read_buffer_.find('\n'); nl != std::string::npos) {
            const std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            try {
                return nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                spdlog::warn("sandbox: ignoring non-JSON worker line: {}", line);
                continue;
            }
        }
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return std::nullopt;
        const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(std::max<std::int64_t>(1, wait)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw SessionDead(std::string("poll: ") + std::strerror(errno));
        }
        if (rc == 0) continue;
        char buf[65536];
        const auto n = ::read(from_child_, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw SessionDead(std::string("read: ") + std::strerror(errno));
        }
        if (n == 0) throw SessionDead("worker exited");
        read_buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

nlohmann::json SubprocessSandbox::round_trip(nlohmann::json request, std::chrono::milliseconds budget) {
    const auto id = next_id_++;
    request["id"] = id;
    send(request);
    const auto deadline = std::chrono::steady_clock::now() + budget;
    while (auto reply = receive(deadline)) {
        if (reply->value("id", std::int64_t{-1}) == id) return *reply;
    }
    return nullptr;
}

void SubprocessSandbox::start(const TablePayload& table) {
    if (closed_) throw SessionDead("session was shut down");
    if (pid_ < 0) spawn();
    table_ = table;
    const auto reply = round_trip({{"op", "init"}, {"table", table.to_json()}},
                                  std::chrono::milliseconds(limits_.default_timeout_ms));
    if (reply.is_null()) {
        kill_worker();
        throw InitFailure("worker did not acknowledge init");
    }
    if (!reply.value("ok", false)) {
        const auto obs = Observation::from_json(reply);
        throw InitFailure("worker rejected table: " + obs.render());
    }
}

Observation SubprocessSandbox::execute(const std::string& code, int timeout_ms) {
    if (closed_ || !table_) throw SessionDead("session is not running");
    if (pid_ < 0) start(*table_);
    if (timeout_ms <= 0) timeout_ms = limits_.default_timeout_ms;
    const auto grace = std::chrono::milliseconds(std::min(timeout_ms / 5, 500));
    const auto started = std::chrono::steady_clock::now();
    const auto reply = round_trip({{"op", "exec"}, {"code", code}, {"timeout_ms", timeout_ms}},
                                  std::chrono::milliseconds(timeout_ms) + grace);
    if (!reply.is_null()) return Observation::from_json(reply);

    // Restart lazily on the next call; the worker state is gone either way.
    kill_worker();
    Observation obs;
    obs.ok = false;
    obs.timed_out = true;
    obs.error = SandboxError{"Timeout", "execution exceeded " + std::to_string(timeout_ms) + " ms", ""};
    obs.duration_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return obs;
}

bool SubprocessSandbox::ping() {
    if (closed_ || pid_ < 0) return false;
    try {
        const auto reply = round_trip({{"op", "ping"}}, std::chrono::milliseconds(1000));
        return !reply.is_null() && reply.value("ok", false);
    } catch (const SessionDead&) {
        return false;
    }
}

void SubprocessSandbox::shutdown() {
    if (closed_) return;
    closed_ = true;
    if (pid_ < 0) return;
    try {
        send({{"id", next_id_++}, {"op", "shutdown"}});
    } catch (const SessionDead&) {
    }
    close(to_child_);
    to_child_ = -1;
    const auto deadline = std::chrono::steady_clock::now() + limits_.shutdown_grace;
    while (std::chrono::steady_clock::now() < deadline) {
        if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
            pid_ = -1;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill_worker();
}

// Observation record / replay ----------------------------------------------------

ObservationStore::ObservationStore(fs::path root) : dir_(std::move(root) / "observations") {}

std::string ObservationStore::key_for(const TablePayload& table, const std::vector<std::string>& history) {
    std::string material = "tabreason-observation-v1\n" + table.to_json().dump() + "\n";
    for (const auto& code : history) material += code + "\n\x1e\n";
    return sha256_hex(material);
}

std::optional<Observation> ObservationStore::find(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto path = dir_ / (key + ".json");
    if (!fs::exists(path)) return std::nullopt;
    return Observation::from_json(nlohmann::json::parse(read_file(path)).at("observation"));
}

void ObservationStore::put(const std::string& key, const Observation& obs, const std::vector<std::string>& history) {
    auto stored = obs.to_json();
    stored["duration_ms"] = 0; // wall time is not reproducible
    const nlohmann::json j = {{"key", key}, {"history", history}, {"observation", stored}};
    std::lock_guard lock(mu_);
    write_file(dir_ / (key + ".json"), j.dump(2) + "\n");
}

std::size_t ObservationStore::size() const {
    std::lock_guard lock(mu_);
    if (!fs::exists(dir_)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir_)) n += e.path().extension() == ".json";
    return n;
}

RecordingSandbox::RecordingSandbox(std::unique_ptr<Sandbox> inner, std::shared_ptr<ObservationStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

void RecordingSandbox::start(const TablePayload& table) {
    inner_->start(table);
    table_ = table;
    history_.clear();
}

Observation RecordingSandbox::execute(const std::string& code, int timeout_ms) {
    if (!table_) throw SessionDead("session is not running");
    history_.push_back(code);
    const auto key = ObservationStore::key_for(*table_, history_);
    auto obs = inner_->execute(code, timeout_ms);
    store_->put(key, obs, history_);
    if (obs.timed_out) history_.clear();
    return obs;
}

ReplaySandbox::ReplaySandbox(std::shared_ptr<ObservationStore> store) : store_(std::move(store)) {}

void ReplaySandbox::start(const TablePayload& table) {
    table_ = table;
    history_.clear();
    closed_ = false;
}

Observation ReplaySandbox::execute(const std::string& code, int) {
    if (closed_ || !table_) throw SessionDead("session is not running");
    history_.push_back(code);
    const auto key = ObservationStore::key_for(*table_, history_);
    auto obs = store_->find(key);
    if (!obs) throw ObservationMiss("no observation recorded for key " + key);
    if (obs->timed_out) history_.clear();
    return *obs;
}

} // namespace tabreason
