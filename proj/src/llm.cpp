#include "taskmem/llm.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "taskmem/error.hpp"
#include "taskmem/text.hpp"

namespace taskmem::llm {

namespace {

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
}

std::vector<std::string> string_list(const Json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    const auto& v = j.at(key);
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_array()) {
        for (const auto& s : v) out.push_back(s.get<std::string>());
    } else {
        throw Error(ErrorKind::ConfigError, std::string("mock rule field '") + key + "' must be a string or list");
    }
    return out;
}

std::string substitute_groups(std::string response, const std::smatch& m) {
    for (std::size_t g = 1; g < m.size() && g <= 9; ++g) {
        std::string key = "{{" + std::to_string(g) + "}}";
        std::size_t pos = 0;
        std::string value = m[g].str();
        while ((pos = response.find(key, pos)) != std::string::npos) {
            response.replace(pos, key.size(), value);
            pos += value.size();
        }
    }
    return response;
}

}  // namespace

std::string_view to_string(Tier t) { return t == Tier::reasoning ? "reasoning" : "fast"; }

std::optional<Tier> tier_from_string(std::string_view s) {
    if (s == "reasoning") return Tier::reasoning;
    if (s == "fast") return Tier::fast;
    return std::nullopt;
}

std::string LlmRequest::prompt_text() const {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "\n\n";
        out += m.content;
    }
    return out;
}

Json to_json(const LlmRequest& r) {
    Json msgs = Json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"messages", msgs},
            {"tier", std::string(to_string(r.tier))},
            {"phase", r.phase},
            {"max_tokens", r.max_tokens},
            {"temperature", r.temperature}};
}

LlmRequest request_from_json(const Json& j) {
    LlmRequest r;
    for (const auto& m : j.at("messages")) r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    auto tier = tier_from_string(j.at("tier").get<std::string>());
    if (!tier) throw std::invalid_argument("unknown tier");
    r.tier = *tier;
    r.phase = j.value("phase", "");
    r.max_tokens = j.value("max_tokens", 1024);
    r.temperature = j.value("temperature", 0.0);
    return r;
}

Json to_json(const LlmResponse& r) {
    return {{"text", r.text},
            {"prompt_tokens", r.prompt_tokens},
            {"completion_tokens", r.completion_tokens},
            {"latency_ms", r.latency_ms},
            {"cost", r.cost}};
}

LlmResponse response_from_json(const Json& j) {
    LlmResponse r;
    r.text = j.at("text").get<std::string>();
    r.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
    r.completion_tokens = j.value("completion_tokens", std::size_t{0});
    r.latency_ms = j.value("latency_ms", 0.0);
    r.cost = j.value("cost", 0.0);
    return r;
}

std::string request_hash(const LlmRequest& r) {
    std::string canonical = to_json(r).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

double CostRates::cost(Tier tier, std::size_t tokens) const {
    double rate = tier == Tier::reasoning ? reasoning_per_1k : fast_per_1k;
    return rate * static_cast<double>(tokens) / 1000.0;
}

CostRates CostRates::from_json(const Json& j) {
    CostRates c;
    try {
        if (j.contains("reasoning")) c.reasoning_per_1k = j.at("reasoning").at("per_1k_tokens").get<double>();
        if (j.contains("fast")) c.fast_per_1k = j.at("fast").at("per_1k_tokens").get<double>();
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("cost rates: ") + e.what());
    }
    if (c.reasoning_per_1k < 0 || c.fast_per_1k < 0) throw Error(ErrorKind::ConfigError, "cost rates must be non-negative");
    return c;
}

CostRates CostRates::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

MockBackend::MockBackend(std::vector<Rule> rules, CostRates rates) : rules_(std::move(rules)), rates_(rates) {
    for (const auto& r : rules_) {
        if (!r.pattern) {
            compiled_.emplace_back();
            continue;
        }
        try {
            compiled_.emplace_back(std::regex(*r.pattern, std::regex::ECMAScript));
        } catch (const std::regex_error& e) {
            throw Error(ErrorKind::ConfigError, "bad mock regex '" + *r.pattern + "': " + e.what());
        }
    }
}

MockBackend MockBackend::from_json(const Json& j, CostRates rates) {
    const Json& list = j.is_object() ? j.at("rules") : j;
    if (!list.is_array()) throw Error(ErrorKind::ConfigError, "mock rules must be a list");
    std::vector<Rule> rules;
    for (const auto& r : list) {
        Rule rule;
        if (r.contains("phase")) rule.phase = r.at("phase").get<std::string>();
        if (r.contains("tier")) {
            rule.tier = tier_from_string(r.at("tier").get<std::string>());
            if (!rule.tier) throw Error(ErrorKind::ConfigError, "unknown tier in mock rule");
        }
        rule.contains = string_list(r, "contains");
        rule.excludes = string_list(r, "excludes");
        if (r.contains("regex")) rule.pattern = r.at("regex").get<std::string>();
        if (!r.contains("response")) throw Error(ErrorKind::ConfigError, "mock rule without response");
        const auto& resp = r.at("response");
        rule.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
        rules.push_back(std::move(rule));
    }
    return MockBackend(std::move(rules), rates);
}

MockBackend MockBackend::load(const std::filesystem::path& path, CostRates rates) {
    return from_json(read_json_file(path), rates);
}

LlmResponse MockBackend::complete(const LlmRequest& req) {
    const std::string prompt = req.prompt_text();
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        if (r.phase && *r.phase != req.phase) continue;
        if (r.tier && *r.tier != req.tier) continue;
        bool ok = true;
        for (const auto& s : r.contains) ok = ok && prompt.find(s) != std::string::npos;
        for (const auto& s : r.excludes) ok = ok && prompt.find(s) == std::string::npos;
        if (!ok) continue;
        std::string text = r.response;
        if (compiled_[i]) {
            std::smatch m;
            if (!std::regex_search(prompt, m, *compiled_[i])) continue;
            text = substitute_groups(text, m);
        }
        LlmResponse resp;
        resp.text = std::move(text);
        resp.prompt_tokens = text::count_tokens(prompt);
        resp.completion_tokens = text::count_tokens(resp.text);
        resp.cost = rates_.cost(req.tier, resp.prompt_tokens + resp.completion_tokens);
        return resp;
    }
    throw Error(ErrorKind::NoMockRule, "no rule for " + std::string(to_string(req.tier)) + " request (phase '" + req.phase +
                                           "'):\n" + prompt);
}

std::vector<Recorded> load_recording(const std::filesystem::path& path) {
    Json j = read_json_file(path);
    if (!j.is_array()) throw Error(ErrorKind::ConfigError, "recording must be a JSON list");
    std::vector<Recorded> out;
    try {
        for (const auto& e : j) {
            out.push_back({e.at("request_hash").get<std::string>(), request_from_json(e.at("request")),
                           response_from_json(e.at("response"))});
        }
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
    return out;
}

void save_recording(const std::vector<Recorded>& entries, const std::filesystem::path& path) {
    Json j = Json::array();
    for (const auto& e : entries) {
        j.push_back({{"request_hash", e.request_hash}, {"request", to_json(e.request)}, {"response", to_json(e.response)}});
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

ReplayBackend::ReplayBackend(const std::vector<Recorded>& entries) {
    for (const auto& e : entries) by_hash_.emplace_back(e.request_hash, e.response);
}

ReplayBackend ReplayBackend::load(const std::filesystem::path& path) { return ReplayBackend(load_recording(path)); }

LlmResponse ReplayBackend::complete(const LlmRequest& req) {
    auto h = request_hash(req);
    for (const auto& [hash, resp] : by_hash_) {
        if (hash == h) return resp;
    }
    throw Error(ErrorKind::ReplayMiss, "no recorded response for request " + h + " (phase '" + req.phase + "')");
}

LlmResponse RecordingBackend::complete(const LlmRequest& req) {
    auto resp = inner_.complete(req);
    std::lock_guard lock(mutex_);
    auto h = request_hash(req);
    bool seen = false;
    for (const auto& e : entries_) seen = seen || e.request_hash == h;
    if (!seen) entries_.push_back({h, req, resp});
    return resp;
}

std::vector<Recorded> RecordingBackend::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

void RecordingBackend::save(const std::filesystem::path& path) const { save_recording(entries(), path); }

}  // namespace taskmem::llm
