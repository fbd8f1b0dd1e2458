#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskmem::llm {

using Json = nlohmann::json;

// reasoning: planning phases; fast: normalization, slot filling, screen reading.
enum class Tier { reasoning, fast };

std::string_view to_string(Tier t);
std::optional<Tier> tier_from_string(std::string_view s);

struct Message {
    std::string role;  // "system" or "user"
    std::string content;
    bool operator==(const Message&) const = default;
};

struct LlmRequest {
    std::vector<Message> messages;
    Tier tier = Tier::reasoning;
    std::string phase;  // purpose label used by logs and mock rules
    int max_tokens = 1024;
    double temperature = 0.0;

    // All message contents joined by blank lines.
    std::string prompt_text() const;
    bool operator==(const LlmRequest&) const = default;
};

struct LlmResponse {
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double latency_ms = 0.0;
    double cost = 0.0;
    bool operator==(const LlmResponse&) const = default;
};

Json to_json(const LlmRequest& r);
LlmRequest request_from_json(const Json& j);
Json to_json(const LlmResponse& r);
LlmResponse response_from_json(const Json& j);

// SHA-256 (hex) of the canonical request JSON.
std::string request_hash(const LlmRequest& r);

// Dollar rates per 1K tokens, prompt and completion alike.
struct CostRates {
    double reasoning_per_1k = 0.01;
    double fast_per_1k = 0.003;

    double cost(Tier tier, std::size_t tokens) const;
    static CostRates from_json(const Json& j);
    static CostRates load(const std::filesystem::path& path);
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual LlmResponse complete(const LlmRequest& req) = 0;
};

// Table-driven canned responses; the first matching rule wins.
//
// Rule fields: phase, tier, contains (all substrings), excludes (none of the
// substrings), regex (ECMAScript, searched in the prompt), response (string or
// JSON value). "{{1}}".."{{9}}" in the response are replaced by regex groups.
class MockBackend final : public LlmBackend {
public:
    struct Rule {
        std::optional<std::string> phase;
        std::optional<Tier> tier;
        std::vector<std::string> contains;
        std::vector<std::string> excludes;
        std::optional<std::string> pattern;
        std::string response;
    };

    explicit MockBackend(std::vector<Rule> rules, CostRates rates = {});
    static MockBackend from_json(const Json& j, CostRates rates = {});
    static MockBackend load(const std::filesystem::path& path, CostRates rates = {});

    LlmResponse complete(const LlmRequest& req) override;
    std::size_t rule_count() const { return rules_.size(); }

private:
    std::vector<Rule> rules_;
    std::vector<std::optional<std::regex>> compiled_;
    CostRates rates_;
};

struct Recorded {
    std::string request_hash;
    LlmRequest request;
    LlmResponse response;
};

std::vector<Recorded> load_recording(const std::filesystem::path& path);
void save_recording(const std::vector<Recorded>& entries, const std::filesystem::path& path);

// Answers from a recording file keyed by request hash.
class ReplayBackend final : public LlmBackend {
public:
    explicit ReplayBackend(const std::vector<Recorded>& entries);
    static ReplayBackend load(const std::filesystem::path& path);

    LlmResponse complete(const LlmRequest& req) override;

private:
    std::vector<std::pair<std::string, LlmResponse>> by_hash_;
};

// Forwards to another backend and keeps every exchange; save() writes a
// recording file readable by ReplayBackend.
class RecordingBackend final : public LlmBackend {
public:
    explicit RecordingBackend(LlmBackend& inner) : inner_(inner) {}

    LlmResponse complete(const LlmRequest& req) override;
    std::vector<Recorded> entries() const;
    void save(const std::filesystem::path& path) const;

private:
    LlmBackend& inner_;
    mutable std::mutex mutex_;
    std::vector<Recorded> entries_;
};

struct HttpConfig {
    std::string endpoint;  // e.g. https://host/v1/chat/completions
    std::string api_key;
    std::string model_reasoning;
    std::string model_fast;
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000};
    int max_in_flight = 4;
    std::chrono::seconds timeout{60};

    // TASKMEM_LLM_ENDPOINT, TASKMEM_LLM_KEY, TASKMEM_MODEL_REASONING,
    // TASKMEM_MODEL_FAST. Throws ConfigError when the endpoint is unset.
    static HttpConfig from_env();
};

// Chat-completions client. Transport failures are retried with exponential
// backoff; a non-2xx status fails at once.
class HttpBackend final : public LlmBackend {
public:
    using SleepFn = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpConfig config, CostRates rates = {}, SleepFn sleep = {});
    ~HttpBackend() override;

    LlmResponse complete(const LlmRequest& req) override;

private:
    LlmResponse complete_once(const LlmRequest& req, bool& transport_failed);

    HttpConfig config_;
    CostRates rates_;
    SleepFn sleep_;
    std::counting_semaphore<64> in_flight_;
};

}  // namespace taskmem::llm
