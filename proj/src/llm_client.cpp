#include "dsare/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"

namespace dsare {

using nlohmann::json;

const char* to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::augmentation: return "augmentation";
        case PromptKind::inference: return "inference";
        case PromptKind::selector: return "selector";
    }
    return "unknown";
}

ScriptedClient::ScriptedClient(const nlohmann::json& transcript) {
    if (!transcript.is_object()) throw std::invalid_argument("transcript must be a JSON object");
    for (const auto& [key, value] : transcript.items()) {
        if (key == "__default__") {
            default_ = value.get<std::string>();
            continue;
        }
        std::vector<std::string> responses;
        if (value.is_string()) {
            responses.push_back(value.get<std::string>());
        } else if (value.is_array()) {
            for (const auto& v : value) responses.push_back(v.get<std::string>());
        } else {
            throw std::invalid_argument("transcript entry '" + key +
                                        "' must be a string or an array of strings");
        }
        transcript_.emplace(key, std::move(responses));
    }
}

std::unique_ptr<ScriptedClient> ScriptedClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transcript file: " + path.string());
    return std::make_unique<ScriptedClient>(json::parse(in));
}

void ScriptedClient::add_response(const std::string& replay_key, std::string response) {
    transcript_[replay_key].push_back(std::move(response));
}

std::string ScriptedClient::complete_impl(const Prompt& prompt) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::string key = prompt.replay_key();
    auto it = transcript_.find(key);
    if (it == transcript_.end()) {
        if (default_) return *default_;
        throw ReplayError("no transcript entry for prompt '" + key + "'");
    }
    std::size_t& pos = cursor_[key];
    const auto& responses = it->second;
    const std::string& out = responses[std::min(pos, responses.size() - 1)];
    ++pos;
    return out;
}

HttpClient::HttpClient(HttpClientConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("HTTP client needs a base URL");
    if (config_.in_flight < 1) throw std::invalid_argument("in_flight must be >= 1");
}

void HttpClient::acquire_slot() {
    std::unique_lock<std::mutex> lock(slot_mu_);
    slot_cv_.wait(lock, [&] { return slots_in_use_ < config_.in_flight; });
    ++slots_in_use_;
}

void HttpClient::release_slot() {
    {
        std::lock_guard<std::mutex> lock(slot_mu_);
        --slots_in_use_;
    }
    slot_cv_.notify_one();
}

std::string HttpClient::complete_impl(const Prompt& prompt) {
    acquire_slot();
    struct SlotGuard {
        HttpClient* c;
        ~SlotGuard() { c->release_slot(); }
    } guard{this};

    json body{{"model", config_.model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})},
              {"temperature", config_.temperature},
              {"max_tokens", config_.max_tokens}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* token = std::getenv(config_.api_key_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    int last_status = 0;
    std::string last_detail = "connection failed";
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(config_.backoff_ms) * (1 << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client cli(config_.base_url);
        cli.set_connection_timeout(config_.timeout_sec, 0);
        cli.set_read_timeout(config_.timeout_sec, 0);
        cli.set_write_timeout(config_.timeout_sec, 0);

        auto res = cli.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_status = 0;
            last_detail = "connection error: " + httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 200) {
            json reply;
            try {
                reply = json::parse(res->body);
            } catch (const json::parse_error& e) {
                throw TransportError("unparseable completion response: " + std::string(e.what()),
                                     res->status);
            }
            if (!reply.contains("choices") || reply["choices"].empty())
                throw TransportError("completion response has no choices", res->status);
            const json& msg = reply["choices"][0].value("message", json::object());
            if (msg.contains("content") && msg["content"].is_string())
                return msg["content"].get<std::string>();
            return "";
        }
        last_detail = "HTTP status " + std::to_string(res->status);
        const bool retryable = res->status == 429 || res->status >= 500;
        if (!retryable)
            throw TransportError("completion request failed: " + last_detail, res->status);
    }
    throw TransportError("completion request failed after " + std::to_string(config_.retries + 1) +
                             " attempts: " + last_detail,
                         last_status);
}

}  // namespace dsare
