#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace dsare {

enum class PromptKind { augmentation, inference, selector };

const char* to_string(PromptKind kind);

// A rendered prompt. `key` identifies what the prompt is about (the query
// example id, or the target relation for augmentation) and doubles as the
// replay key for scripted transports.
struct Prompt {
    PromptKind kind = PromptKind::inference;
    std::string key;
    std::string text;

    std::string replay_key() const { return std::string(to_string(kind)) + ":" + key; }
};

struct TransportError : std::runtime_error {
    int status;  // last HTTP status; 0 when the failure never reached HTTP
    explicit TransportError(const std::string& msg, int status_code = 0)
        : std::runtime_error(msg), status(status_code) {}
};

struct ReplayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Completion transport. Subclasses implement complete_impl; the base class
// keeps per-kind call counters so tests can assert call contracts.
class LlmClient {
public:
    virtual ~LlmClient() = default;

    std::string complete(const Prompt& prompt) {
        counts_[static_cast<std::size_t>(prompt.kind)].fetch_add(1, std::memory_order_relaxed);
        return complete_impl(prompt);
    }

    std::size_t calls() const {
        std::size_t total = 0;
        for (const auto& c : counts_) total += c.load(std::memory_order_relaxed);
        return total;
    }
    std::size_t calls(PromptKind kind) const {
        return counts_[static_cast<std::size_t>(kind)].load(std::memory_order_relaxed);
    }

protected:
    virtual std::string complete_impl(const Prompt& prompt) = 0;

private:
    std::array<std::atomic<std::size_t>, 3> counts_{};
};

// Deterministic replay transport. The transcript maps "<kind>:<key>" to a
// response string, or to an array of responses consumed one per call (the
// last entry repeats once exhausted). Key "__default__" supplies a fallback;
// without one, an unknown prompt raises ReplayError.
class ScriptedClient : public LlmClient {
public:
    ScriptedClient() = default;
    explicit ScriptedClient(const nlohmann::json& transcript);
    static std::unique_ptr<ScriptedClient> from_file(const std::filesystem::path& path);

    void add_response(const std::string& replay_key, std::string response);
    void set_default_response(std::string response) { default_ = std::move(response); }

protected:
    std::string complete_impl(const Prompt& prompt) override;

private:
    std::map<std::string, std::vector<std::string>> transcript_;
    std::map<std::string, std::size_t> cursor_;
    std::optional<std::string> default_;
    std::mutex mu_;
};

struct HttpClientConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8080" or "https://api.example.com"
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "DSARE_API_KEY";  // env var NAME holding the bearer token
    double temperature = 0.0;
    int max_tokens = 256;
    int retries = 2;  // retries after the first attempt
    int timeout_sec = 60;
    int backoff_ms = 250;
    int in_flight = 1;  // max concurrent requests
};

// Chat-completions transport. Sends {model, messages, temperature,
// max_tokens}, reads choices[0].message.content. Transient failures
// (connection errors, 429, 5xx) are retried with exponential backoff.
class HttpClient : public LlmClient {
public:
    explicit HttpClient(HttpClientConfig config);

protected:
    std::string complete_impl(const Prompt& prompt) override;

private:
    void acquire_slot();
    void release_slot();

    HttpClientConfig config_;
    std::mutex slot_mu_;
    std::condition_variable slot_cv_;
    int slots_in_use_ = 0;
};

}  // namespace dsare
