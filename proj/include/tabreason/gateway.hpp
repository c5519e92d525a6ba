#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tabreason {

enum class ModelClass { auto_route, small_ctx, large_ctx };

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    /// Distinguishes self-consistency samples of the same prompt.
    int sample_index = 0;
    /// Agent turn number within one sample; 0 for single-shot prompts.
    int turn = 0;
    ModelClass model_class = ModelClass::auto_route;
};

struct RoutingConfig {
    std::string small_model = "gpt-3.5-turbo-0613";
    std::string large_model = "gpt-3.5-turbo-16k-0613";
    /// Inclusive upper bound on estimated prompt tokens for the small model.
    std::size_t small_ctx_max_tokens = 3584;
};

/// ceil(code points / 4).
std::size_t estimate_tokens(std::string_view prompt);
std::string route_model(const CompletionRequest& req, const RoutingConfig& routing);

/// Lowercase hex SHA-256 over the canonical key serialization:
///
///   tabreason-fixture-v1\n
///   model:<model id>\n
///   temperature:<temperature, fixed 4 decimals>\n
///   sample_index:<n>\n
///   turn:<n>\n
///   prompt:<prompt bytes verbatim>
std::string fixture_key(const CompletionRequest& req, std::string_view model_id);
std::string fixture_key_material(const CompletionRequest& req, std::string_view model_id);

// Errors ------------------------------------------------------------------

class GatewayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FixtureMiss : public GatewayError {
public:
    explicit FixtureMiss(std::string key)
        : GatewayError("no fixture recorded for key " + key), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class RateLimited : public GatewayError {
public:
    explicit RateLimited(int attempts)
        : GatewayError("rate limited after " + std::to_string(attempts) + " attempts"), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class ProviderError : public GatewayError {
public:
    ProviderError(int status, const std::string& body)
        : GatewayError("provider returned status " + std::to_string(status) + ": " + body), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class ConfigError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// Transport ---------------------------------------------------------------

/// Chat-completion request as it goes on the wire.
struct ChatPayload {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 1024;

    /// {"model", "messages": [{"role": "user", "content"}], "temperature", "max_tokens"}
    nlohmann::json to_json() const;
};

struct TransportResponse {
    /// HTTP status, or 0 when the connection itself failed.
    int status = 0;
    std::string body;
    std::optional<std::chrono::milliseconds> retry_after;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResponse send(const ChatPayload& payload) = 0;
};

struct ProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "TABREASON_API_KEY";
    std::chrono::seconds timeout{120};
};

/// HTTPS JSON transport. Reads the bearer token from the environment variable
/// named in the config at construction; throws ConfigError if it is unset.
std::shared_ptr<Transport> make_http_transport(const ProviderConfig& config);

/// First choice text of a chat-completion response body.
std::string extract_completion_text(const std::string& body);

// Retry / rate limiting -----------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_delay{500};
    std::chrono::milliseconds max_delay{30000};
    double multiplier = 2.0;

    /// Delay before attempt `attempt` (1-based retry count), honouring a
    /// server-provided Retry-After when present.
    std::chrono::milliseconds delay_for(int attempt, std::optional<std::chrono::milliseconds> retry_after) const;
    static bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }
};

/// Counting gate on concurrent live requests.
class RateLimiter {
public:
    explicit RateLimiter(std::size_t max_in_flight);

    class Permit {
    public:
        explicit Permit(RateLimiter& owner) : owner_(&owner) {}
        Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit() {
            if (owner_) owner_->release();
        }

    private:
        RateLimiter* owner_;
    };

    Permit acquire();
    std::size_t max_in_flight() const { return max_; }

private:
    void release();

    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t max_;
    std::size_t in_flight_ = 0;
};

// Fixture store -------------------------------------------------------------

struct Fixture {
    std::string key;
    std::string model;
    double temperature = 0.0;
    int sample_index = 0;
    int turn = 0;
    std::string prompt;
    std::string response;
    std::string recorded_at;
};

/// Directory layout:
///
///   <root>/responses/<key>.json   one Fixture per file (pretty JSON, sorted keys)
///   <root>/index.tsv              "<key>\t<model>\t<sample_index>\t<turn>\n", sorted by key
///
/// Safe for concurrent use within one process.
class FixtureStore {
public:
    explicit FixtureStore(std::filesystem::path root);

    std::optional<Fixture> find(const std::string& key) const;
    void put(const Fixture& fixture);
    std::vector<std::string> keys() const;
    const std::filesystem::path& root() const { return root_; }

    /// Rewrites index.tsv from the response files.
    void rebuild_index();

    static nlohmann::json to_json(const Fixture& f);
    static Fixture from_json(const nlohmann::json& j);

private:
    std::filesystem::path response_path(const std::string& key) const;
    void write_index_locked() const;

    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> index_; // key -> index.tsv line
};

// Gateway -------------------------------------------------------------------

/// Anything that turns a prompt into a completion. Normalizer, reasoners and
/// self-evaluation depend only on this.
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual std::string complete(const CompletionRequest& req) = 0;
};

enum class GatewayMode { live, record, replay };

GatewayMode parse_gateway_mode(std::string_view name);
std::string_view to_string(GatewayMode mode);

struct GatewayConfig {
    GatewayMode mode = GatewayMode::replay;
    RoutingConfig routing;
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
};

struct GatewayStats {
    std::size_t requests = 0;
    std::size_t fixture_hits = 0;
    std::size_t live_calls = 0;
};

class Gateway final : public CompletionClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    using Clock = std::function<std::string()>;

    /// `transport` may be null in replay mode; `store` may be null in live mode.
    Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<FixtureStore> store);

    std::string complete(const CompletionRequest& req) override;

    void set_sleeper(Sleeper sleeper) { sleep_ = std::move(sleeper); }
    void set_clock(Clock clock) { clock_ = std::move(clock); }
    GatewayStats stats() const;
    const GatewayConfig& config() const { return config_; }

private:
    std::string call_live(const ChatPayload& payload);

    GatewayConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<FixtureStore> store_;
    RateLimiter limiter_;
    Sleeper sleep_;
    Clock clock_;
    mutable std::mutex stats_mu_;
    GatewayStats stats_;
};

} // namespace tabreason
