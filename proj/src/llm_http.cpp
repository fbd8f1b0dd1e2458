#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>
#include <thread>

#include "taskmem/error.hpp"
#include "taskmem/llm.hpp"

namespace taskmem::llm {

namespace {

std::string env_or(const char* name, const char* fallback) {
    const char* v = std::getenv(name);
    return v != nullptr ? v : fallback;
}

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(ErrorKind::ConfigError, "bad endpoint URL: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : "/v1/chat/completions"};
}

}  // namespace

HttpConfig HttpConfig::from_env() {
    HttpConfig c;
    c.endpoint = env_or("TASKMEM_LLM_ENDPOINT", "");
    if (c.endpoint.empty()) throw Error(ErrorKind::ConfigError, "TASKMEM_LLM_ENDPOINT is not set");
    c.api_key = env_or("TASKMEM_LLM_KEY", "");
    c.model_reasoning = env_or("TASKMEM_MODEL_REASONING", "gpt-4-turbo");
    c.model_fast = env_or("TASKMEM_MODEL_FAST", "gpt-3.5-turbo");
    return c;
}

HttpBackend::HttpBackend(HttpConfig config, CostRates rates, SleepFn sleep)
    : config_(std::move(config)), rates_(rates), sleep_(std::move(sleep)), in_flight_(64) {
    if (config_.max_in_flight < 1 || config_.max_in_flight > 64) {
        throw Error(ErrorKind::ConfigError, "max_in_flight must be within 1..64");
    }
    split_endpoint(config_.endpoint);
    // Park the permits above the configured limit.
    for (int i = config_.max_in_flight; i < 64; ++i) in_flight_.acquire();
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpBackend::~HttpBackend() = default;

LlmResponse HttpBackend::complete(const LlmRequest& req) {
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) sleep_(config_.backoff_base * (1 << (attempt - 1)));
        bool transport_failed = false;
        try {
            return complete_once(req, transport_failed);
        } catch (const Error& e) {
            if (!transport_failed) throw;
            last_error = e.what();
        }
    }
    throw Error(ErrorKind::TransportError, "giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

LlmResponse HttpBackend::complete_once(const LlmRequest& req, bool& transport_failed) {
    auto ep = split_endpoint(config_.endpoint);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    Json body;
    body["model"] = req.tier == Tier::reasoning ? config_.model_reasoning : config_.model_fast;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    body["messages"] = Json::array();
    for (const auto& m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        transport_failed = true;
        throw Error(ErrorKind::TransportError, httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorKind::NonRetryableApiError, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    LlmResponse out;
    try {
        Json j = Json::parse(res->body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            out.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
            out.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::NonRetryableApiError, std::string("unexpected response body: ") + e.what());
    }
    out.latency_ms = elapsed;
    out.cost = rates_.cost(req.tier, out.prompt_tokens + out.completion_tokens);
    return out;
}

}  // namespace taskmem::llm
