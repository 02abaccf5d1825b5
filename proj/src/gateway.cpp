#include "promptopt/gateway.hpp"

#include <cctype>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace promptopt {

std::int64_t estimate_tokens(std::string_view text) {
    std::int64_t count = 0;
    bool in_run = false;
    for (unsigned char c : text) {
        bool ws = std::isspace(c) != 0;
        if (!ws && !in_run) ++count;
        in_run = !ws;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Mock provider

ChatResponse mock_complete(const ChatRequest& request, std::uint64_t seed) {
    std::uint64_t state = fnv1a64(std::to_string(seed));
    state = fnv1a64("\x1f", state);
    state = fnv1a64(request.system, state);
    state = fnv1a64("\x1f", state);
    state = fnv1a64(request.user, state);
    std::string digest = to_hex16(state);

    ChatResponse response;
    // Requests carrying the combined-output contract get both labeled
    // sections so downstream parsing works end to end.
    if (request.system.find("=== OPTIMIZED_PROMPT ===") != std::string::npos) {
        std::string second = to_hex16(fnv1a64(digest + "/prompt"));
        response.text = "=== ANALYSIS ===\nmock analysis " + digest +
                        "\n=== OPTIMIZED_PROMPT ===\nmock optimized prompt " + second + "\n";
    } else {
        response.text = "mock completion " + digest;
    }
    response.usage.input_tokens = estimate_tokens(request.system) + estimate_tokens(request.user);
    response.usage.output_tokens = estimate_tokens(response.text);
    response.usage.calls = 1;
    return response;
}

ChatResponse MockProvider::complete(const ChatRequest& request) {
    return mock_complete(request, seed_);
}

// ---------------------------------------------------------------------------
// HTTP provider

namespace {

using json = nlohmann::json;

bool is_retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

// Splits "https://host[:port]/base/path" into (scheme://host:port, /base/path).
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string host = base_url.substr(0, path_start);
    std::string path = base_url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {host, path};
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("live provider needs a base URL");
    if (config_.model_id.empty()) throw ConfigError("live provider needs a model id");
    if (!config_.sleeper) {
        config_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

HttpChatProvider::Attempt HttpChatProvider::attempt_once(const ChatRequest& request) {
    auto [host, base_path] = split_base_url(config_.base_url);

    json messages = json::array();
    if (!request.system.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {{"model", request.model_id.empty() ? config_.model_id : request.model_id},
                 {"messages", std::move(messages)},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_output_tokens}};

    httplib::Client client(host);
    client.set_connection_timeout(config_.timeout.count(), 0);
    client.set_read_timeout(config_.timeout.count(), 0);
    client.set_write_timeout(config_.timeout.count(), 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    Attempt attempt;
    auto result = client.Post(base_path + "/chat/completions", headers, body.dump(),
                              "application/json");
    if (!result) {
        attempt.transport_failed = true;
        attempt.transport_detail = httplib::to_string(result.error());
        return attempt;
    }
    attempt.status = result->status;
    attempt.body = result->body;
    return attempt;
}

ChatResponse HttpChatProvider::complete(const ChatRequest& request) {
    std::mt19937_64 jitter_rng(std::random_device{}());
    const auto& retry = config_.retry;

    for (int attempt_no = 1;; ++attempt_no) {
        Attempt attempt = attempt_once(request);

        bool retryable = attempt.transport_failed || is_retryable_status(attempt.status);
        if (retryable && attempt_no < retry.max_attempts) {
            double cap = static_cast<double>(retry.base_delay.count());
            for (int i = 1; i < attempt_no; ++i) cap *= retry.factor;
            auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(
                retry.full_jitter
                    ? std::uniform_real_distribution<double>(0.0, cap)(jitter_rng)
                    : cap));
            config_.sleeper(delay);
            continue;
        }
        if (attempt.transport_failed) {
            throw TransportError(attempt.transport_detail, attempt_no);
        }
        if (attempt.status < 200 || attempt.status >= 300) {
            throw ProviderError(attempt.status, attempt.body.substr(0, 512), attempt_no);
        }

        json payload;
        try {
            payload = json::parse(attempt.body);
        } catch (const json::exception& e) {
            throw ProviderError(attempt.status, std::string("unparseable body: ") + e.what(),
                                attempt_no);
        }
        std::string text;
        if (payload.contains("choices") && !payload["choices"].empty()) {
            const auto& message = payload["choices"][0].value("message", json::object());
            text = message.value("content", "");
        }
        if (trim_copy(text).empty()) throw EmptyCompletion();

        ChatResponse response;
        response.text = text;
        if (payload.contains("usage") && payload["usage"].is_object()) {
            const auto& usage = payload["usage"];
            response.usage.input_tokens = usage.value("prompt_tokens", std::int64_t{0});
            response.usage.output_tokens = usage.value("completion_tokens", std::int64_t{0});
        } else {
            response.usage.input_tokens =
                estimate_tokens(request.system) + estimate_tokens(request.user);
            response.usage.output_tokens = estimate_tokens(text);
        }
        response.usage.calls = 1;
        return response;
    }
}

std::shared_ptr<ChatProvider> make_provider(const std::string& provider_id,
                                            std::uint64_t seed,
                                            const ProviderSettings& settings) {
    if (provider_id == "mock") return std::make_shared<MockProvider>(seed);
    if (provider_id == "live") {
        HttpProviderConfig config;
        config.base_url = settings.base_url;
        config.model_id = settings.model_id;
        config.api_key = settings.api_key;
        config.timeout = std::chrono::seconds(settings.timeout_seconds);
        return std::make_shared<HttpChatProvider>(std::move(config));
    }
    throw ConfigError("unknown provider id: " + provider_id);
}

}  // namespace promptopt
