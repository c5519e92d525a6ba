#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "tabreason/gateway.hpp"

#include <cstdlib>

namespace tabreason {

namespace {

class HttpTransport final : public Transport {
public:
    HttpTransport(ProviderConfig config, std::string api_key)
        : config_(std::move(config)), api_key_(std::move(api_key)) {}

    TransportResponse send(const ChatPayload& payload) override {
        httplib::Client client(config_.base_url);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        client.set_bearer_token_auth(api_key_);

        auto res = client.Post(config_.path, payload.to_json().dump(), "application/json");
        if (!res) return {0, httplib::to_string(res.error()), std::nullopt};

        TransportResponse out{res->status, res->body, std::nullopt};
        if (res->has_header("Retry-After")) {
            try {
                out.retry_after = std::chrono::seconds(std::stoll(res->get_header_value("Retry-After")));
            } catch (const std::exception&) {
                // HTTP-date form; fall back to exponential backoff.
            }
        }
        return out;
    }

private:
    ProviderConfig config_;
    std::string api_key_;
};

} // namespace

std::shared_ptr<Transport> make_http_transport(const ProviderConfig& config) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + config.api_key_env + " is not set");
    }
    return std::make_shared<HttpTransport>(config, key);
}

} // namespace tabreason
