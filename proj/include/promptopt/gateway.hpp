#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "promptopt/core.hpp"

namespace promptopt {

struct ChatRequest {
    std::string system;            // the agent's role instructions
    std::string user;              // rendered task payload
    double temperature = 0.0;      // pipeline requests always use 0
    int max_output_tokens = 1024;
    std::string model_id;
};

struct ChatResponse {
    std::string text;
    UsageStats usage;  // calls == 1 exactly
};

/// Fallback token estimate: number of maximal non-whitespace runs. Used when
/// a provider reports no usage; the mock provider reports exactly this.
std::int64_t estimate_tokens(std::string_view text);

// ---------------------------------------------------------------------------
// Errors

struct TransportError : Error {
    explicit TransportError(const std::string& message, int attempts = 1)
        : Error("TransportError", message), attempts(attempts) {}
    int attempts;
};

struct ProviderError : Error {
    ProviderError(int status, const std::string& message, int attempts = 1)
        : Error("ProviderError", "status " + std::to_string(status) + ": " + message),
          status(status),
          attempts(attempts) {}
    int status;
    int attempts;
};

struct EmptyCompletion : Error {
    EmptyCompletion() : Error("EmptyCompletion", "provider returned empty text") {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

// ---------------------------------------------------------------------------
// Providers

class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    /// Issues one chat completion. Throws TransportError / ProviderError /
    /// EmptyCompletion. The returned usage always has calls == 1.
    virtual ChatResponse complete(const ChatRequest& request) = 0;

    virtual std::string id() const = 0;
};

/// Pure function backing MockProvider: the completion text depends only on
/// (seed, system, user) and embeds an FNV digest of them, so tests can prove
/// which inputs flowed into which outputs.
ChatResponse mock_complete(const ChatRequest& request, std::uint64_t seed);

class MockProvider final : public ChatProvider {
public:
    explicit MockProvider(std::uint64_t seed) : seed_(seed) {}

    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return "mock"; }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// Up to `max_attempts` tries on transport and 429-class failures with
/// exponential backoff (base 1s, factor 2, full jitter). Other failures are
/// terminal immediately.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    bool full_jitter = true;
};

struct HttpProviderConfig {
    std::string base_url;       // e.g. "https://api.example.com/v1"
    std::string model_id;
    std::string api_key;        // resolved from the environment by the CLI
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
    /// Injectable for tests; defaults to a real sleep.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

/// OpenAI-compatible chat-completion client (messages array of role/content
/// pairs against {base_url}/chat/completions).
class HttpChatProvider final : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config);

    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return "live:" + config_.model_id; }

private:
    struct Attempt {
        bool transport_failed = false;
        std::string transport_detail;
        int status = 0;
        std::string body;
    };
    Attempt attempt_once(const ChatRequest& request);

    HttpProviderConfig config_;
};

/// "mock" -> MockProvider(seed); "live" -> HttpChatProvider from settings.
/// Anything else throws ConfigError.
struct ProviderSettings {
    std::string base_url;
    std::string model_id;
    std::string api_key;
    int timeout_seconds = 120;
};
std::shared_ptr<ChatProvider> make_provider(const std::string& provider_id,
                                            std::uint64_t seed,
                                            const ProviderSettings& settings = {});

}  // namespace promptopt
