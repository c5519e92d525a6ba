#include "tabreason/gateway.hpp"

#include "tabreason/dataset.hpp"
#include "tabreason/hash.hpp"
#include "tabreason/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <thread>

namespace tabreason {

namespace fs = std::filesystem;

std::size_t estimate_tokens(std::string_view prompt) { return (text::utf8_length(prompt) + 3) / 4; }

std::string route_model(const CompletionRequest& req, const RoutingConfig& routing) {
    switch (req.model_class) {
    case ModelClass::small_ctx: return routing.small_model;
    case ModelClass::large_ctx: return routing.large_model;
    case ModelClass::auto_route: break;
    }
    return estimate_tokens(req.prompt) <= routing.small_ctx_max_tokens ? routing.small_model : routing.large_model;
}

std::string fixture_key_material(const CompletionRequest& req, std::string_view model_id) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.4f", req.temperature);
    std::string material = "tabreason-fixture-v1\n";
    material += "model:";
    material += model_id;
    material += "\ntemperature:";
    material += temp;
    material += "\nsample_index:" + std::to_string(req.sample_index);
    material += "\nturn:" + std::to_string(req.turn);
    material += "\nprompt:";
    material += req.prompt;
    return material;
}

std::string fixture_key(const CompletionRequest& req, std::string_view model_id) {
    return sha256_hex(fixture_key_material(req, model_id));
}

nlohmann::json ChatPayload::to_json() const {
    return {{"model", model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", temperature},
            {"max_tokens", max_tokens}};
}

std::string extract_completion_text(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(200, std::string("malformed completion body: ") + e.what());
    }
}

// Retry / rate limiting -----------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_for(int attempt,
                                                 std::optional<std::chrono::milliseconds> retry_after) const {
    if (retry_after) return std::min(*retry_after, max_delay);
    double ms = static_cast<double>(initial_delay.count());
    for (int i = 1; i < attempt; ++i) ms *= multiplier;
    return std::min(std::chrono::milliseconds(static_cast<std::int64_t>(ms)), max_delay);
}

RateLimiter::RateLimiter(std::size_t max_in_flight) : max_(std::max<std::size_t>(1, max_in_flight)) {}

RateLimiter::Permit RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_; });
    ++in_flight_;
    return Permit(*this);
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

// Fixture store -------------------------------------------------------------

namespace {
bool valid_key(const std::string& key) {
    return key.size() == 64 && std::all_of(key.begin(), key.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

std::string utc_now() {
    const auto t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}
} // namespace

namespace {
std::string index_line(const Fixture& f) {
    return f.key + "\t" + f.model + "\t" + std::to_string(f.sample_index) + "\t" + std::to_string(f.turn) + "\n";
}
} // namespace

FixtureStore::FixtureStore(fs::path root) : root_(std::move(root)) {
    const auto dir = root_ / "responses";
    if (!fs::exists(dir)) return;
    std::map<std::string, std::string> indexed;
    if (fs::exists(root_ / "index.tsv")) {
        for (const auto& line : text::split_lines(read_file(root_ / "index.tsv"))) {
            if (line.empty()) continue;
            indexed.emplace(line.substr(0, line.find('\t')), line + "\n");
        }
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        const auto key = entry.path().stem().string();
        if (auto it = indexed.find(key); it != indexed.end()) {
            index_.emplace(key, it->second);
        } else {
            index_.emplace(key, index_line(from_json(nlohmann::json::parse(read_file(entry.path())))));
        }
    }
}

fs::path FixtureStore::response_path(const std::string& key) const { return root_ / "responses" / (key + ".json"); }

nlohmann::json FixtureStore::to_json(const Fixture& f) {
    return {{"key", f.key},           {"model", f.model},   {"temperature", f.temperature},
            {"sample_index", f.sample_index}, {"turn", f.turn}, {"prompt", f.prompt},
            {"response", f.response}, {"recorded_at", f.recorded_at}};
}

Fixture FixtureStore::from_json(const nlohmann::json& j) {
    Fixture f;
    f.key = j.at("key").get<std::string>();
    f.model = j.at("model").get<std::string>();
    f.temperature = j.at("temperature").get<double>();
    f.sample_index = j.at("sample_index").get<int>();
    f.turn = j.value("turn", 0);
    f.prompt = j.at("prompt").get<std::string>();
    f.response = j.at("response").get<std::string>();
    f.recorded_at = j.value("recorded_at", std::string{});
    return f;
}

std::optional<Fixture> FixtureStore::find(const std::string& key) const {
    if (!valid_key(key)) return std::nullopt;
    std::lock_guard lock(mu_);
    if (!index_.contains(key)) return std::nullopt;
    return from_json(nlohmann::json::parse(read_file(response_path(key))));
}

void FixtureStore::put(const Fixture& fixture) {
    if (!valid_key(fixture.key)) throw GatewayError("invalid fixture key: " + fixture.key);
    std::lock_guard lock(mu_);
    write_file(response_path(fixture.key), to_json(fixture).dump(2) + "\n");
    index_[fixture.key] = index_line(fixture);
    write_index_locked();
}

std::vector<std::string> FixtureStore::keys() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const auto& [key, _] : index_) out.push_back(key);
    return out;
}

void FixtureStore::rebuild_index() {
    std::lock_guard lock(mu_);
    for (auto& [key, line] : index_) line = index_line(from_json(nlohmann::json::parse(read_file(response_path(key)))));
    write_index_locked();
}

void FixtureStore::write_index_locked() const {
    std::string index;
    for (const auto& [_, line] : index_) index += line;
    write_file(root_ / "index.tsv", index);
}

// Gateway -------------------------------------------------------------------

GatewayMode parse_gateway_mode(std::string_view name) {
    if (name == "live") return GatewayMode::live;
    if (name == "record") return GatewayMode::record;
    if (name == "replay") return GatewayMode::replay;
    throw std::invalid_argument("unknown gateway mode: " + std::string(name));
}

std::string_view to_string(GatewayMode mode) {
    switch (mode) {
    case GatewayMode::live: return "live";
    case GatewayMode::record: return "record";
    case GatewayMode::replay: return "replay";
    }
    return "replay";
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<FixtureStore> store)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      store_(std::move(store)),
      limiter_(config_.max_in_flight),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      clock_(utc_now) {
    if (config_.mode != GatewayMode::live && !store_) throw ConfigError("record/replay mode needs a fixture store");
    if (config_.mode != GatewayMode::replay && !transport_) throw ConfigError("live/record mode needs a transport");
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
}

std::string Gateway::complete(const CompletionRequest& req) {
    const std::string model = route_model(req, config_.routing);
    {
        std::lock_guard lock(stats_mu_);
        ++stats_.requests;
    }
    const std::string key = store_ ? fixture_key(req, model) : std::string{};

    if (config_.mode != GatewayMode::live) {
        if (auto hit = store_->find(key)) {
            std::lock_guard lock(stats_mu_);
            ++stats_.fixture_hits;
            return hit->response;
        }
        if (config_.mode == GatewayMode::replay) throw FixtureMiss(key);
    }

    const std::string response = call_live({model, req.prompt, req.temperature, req.max_output_tokens});
    if (config_.mode == GatewayMode::record) {
        store_->put({key, model, req.temperature, req.sample_index, req.turn, req.prompt, response, clock_()});
    }
    return response;
}

std::string Gateway::call_live(const ChatPayload& payload) {
    const auto permit = limiter_.acquire();
    TransportResponse last;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        {
            std::lock_guard lock(stats_mu_);
            ++stats_.live_calls;
        }
        last = transport_->send(payload);
        if (last.status >= 200 && last.status < 300) return extract_completion_text(last.body);
        if (!RetryPolicy::retryable(last.status)) throw ProviderError(last.status, last.body);
        if (attempt == config_.retry.max_attempts) break;
        const auto delay = config_.retry.delay_for(attempt, last.retry_after);
        spdlog::warn("completion attempt {} failed with status {}; retrying in {} ms", attempt, last.status,
                     delay.count());
        sleep_(delay);
    }
    if (last.status == 429) throw RateLimited(config_.retry.max_attempts);
    throw ProviderError(last.status, last.body);
}

} // namespace tabreason
