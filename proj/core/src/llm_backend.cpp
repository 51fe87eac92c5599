#include "tailaug/llm_backend.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tailaug/error.hpp"

namespace tailaug::lkg {

Transport make_http_transport(int timeout_s) {
    return [timeout_s](const std::string& url, const std::string& body, const HttpHeaders& headers) -> HttpReply {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, url_re)) throw BackendError("malformed endpoint URL: " + url);
        httplib::Client client(m[1].str());
        client.set_connection_timeout(timeout_s, 0);
        client.set_read_timeout(timeout_s, 0);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        const std::string path = m[2].matched ? m[2].str() : "/";
        auto res = client.Post(path, h, body, "application/json");
        if (!res) throw BackendError("HTTP request failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    };
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    try {
        const auto doc = nlohmann::json::parse(in);
        entries_ = doc.get<std::map<std::string, std::map<std::string, double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("unreadable LLM cache " + path_.string() + ": " + e.what());
    }
}

std::optional<double> ResponseCache::get(const std::string& model, const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto m = entries_.find(model);
    if (m == entries_.end()) return std::nullopt;
    const auto it = m->second.find(key);
    if (it == m->second.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& model, const std::string& key, double score) {
    std::unique_lock lock(mutex_);
    entries_[model][key] = score;
}

void ResponseCache::save() const {
    if (path_.empty()) return;
    std::shared_lock lock(mutex_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_);
    if (!out) throw IoError("cannot write LLM cache: " + path_.string());
    out << nlohmann::json(entries_).dump(2) << '\n';
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& [model, entries] : entries_) n += entries.size();
    return n;
}

std::string pair_key(const core::ClassRegistry& registry, const ClassPair& pair) {
    return registry.name(pair.first) + "|" + registry.name(pair.second);
}

LlmBackend::LlmBackend(LlmConfig config, core::ClassRegistry registry, Transport transport)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      transport_(transport ? std::move(transport) : make_http_transport(config_.timeout_s)),
      cache_(config_.cache_path) {
    for (const auto& name : registry_.names()) {
        if (name.find('|') != std::string::npos) {
            throw ArgumentError("class names used with the LLM backend may not contain '|': " + name);
        }
    }
}

std::string LlmBackend::system_prompt() {
    return "You are a thoracic radiology expert. For chest X-ray findings, you estimate how likely two "
           "lesion categories are to overlap spatially in a single frontal radiograph, so that erasing "
           "one would also erase the other. Answer with a single JSON object and nothing else.";
}

std::string LlmBackend::render_prompt(const core::ClassRegistry& registry, const std::vector<ClassPair>& pairs) {
    std::string prompt =
        "For each pair below (first: a common finding, second: a rare finding), give the probability "
        "between 0 and 1 that the two findings occupy overlapping image regions when they co-occur.\n"
        "Reply with a JSON object whose keys are exactly the pair strings below and whose values are numbers.\n"
        "Pairs:\n";
    for (const auto& pair : pairs) prompt += "- " + pair_key(registry, pair) + "\n";
    return prompt;
}

PairScores LlmBackend::parse_reply(const std::string& content, const core::ClassRegistry& registry,
                                   const std::vector<ClassPair>& expected) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("LLM reply is not valid JSON: ") + e.what(), content);
    }
    if (!doc.is_object()) throw ParseError("LLM reply is not a JSON object", content);

    PairScores parsed;
    for (const auto& [key, value] : doc.items()) {
        const auto bar = key.find('|');
        if (bar == std::string::npos) throw ParseError("LLM reply key lacks '|': " + key, content);
        const auto head = registry.find(key.substr(0, bar));
        const auto tail = registry.find(key.substr(bar + 1));
        if (!head || !tail) throw ParseError("LLM reply names an unknown class: " + key, content);
        if (!value.is_number()) throw ParseError("LLM reply score is not a number: " + key, content);
        const double score = value.get<double>();
        if (!(score >= 0.0 && score <= 1.0)) throw ParseError("LLM reply score outside [0,1]: " + key, content);
        parsed[{*head, *tail}] = score;
    }
    PairScores out;
    for (const auto& pair : expected) {
        const auto it = parsed.find(pair);
        if (it == parsed.end()) {
            throw ParseError("LLM reply is missing pair " + pair_key(registry, pair), content);
        }
        out[pair] = it->second;
    }
    return out;
}

void LlmBackend::throttle() {
    if (config_.min_interval_ms <= 0) return;
    const auto now = std::chrono::steady_clock::now();
    const auto spacing = std::chrono::milliseconds(config_.min_interval_ms);
    if (last_call_ && now - *last_call_ < spacing) std::this_thread::sleep_for(spacing - (now - *last_call_));
    last_call_ = std::chrono::steady_clock::now();
}

std::string LlmBackend::call_with_retries(const std::string& body) {
    HttpHeaders headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
    }
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0 && config_.backoff_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
        }
        throttle();
        ++network_calls_;
        try {
            const HttpReply reply = transport_(config_.endpoint, body, headers);
            if (reply.status >= 200 && reply.status < 300) return reply.body;
            last_error = "HTTP status " + std::to_string(reply.status);
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("LLM request to " + config_.endpoint + " failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

PairScores LlmBackend::query(const std::vector<ClassPair>& pairs) {
    std::lock_guard lock(call_mutex_);
    PairScores out;
    std::vector<ClassPair> missing;
    for (const auto& pair : pairs) {
        if (!registry_.contains(pair.first) || !registry_.contains(pair.second)) {
            throw ArgumentError("entanglement query names a class outside the registry");
        }
        if (auto cached = cache_.get(config_.model, pair_key(registry_, pair))) {
            out[pair] = *cached;
        } else {
            missing.push_back(pair);
        }
    }
    if (missing.empty()) return out;

    nlohmann::ordered_json request;
    request["model"] = config_.model;
    request["temperature"] = 0;
    request["messages"] = nlohmann::json::array({
        {{"role", "system"}, {"content", system_prompt()}},
        {{"role", "user"}, {"content", render_prompt(registry_, missing)}},
    });
    const std::string raw = call_with_retries(request.dump());

    std::string content;
    try {
        const auto envelope = nlohmann::json::parse(raw);
        content = envelope.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("unexpected chat-completion envelope: ") + e.what(), raw);
    }
    const auto trimmed_begin = content.find_first_not_of(" \t\r\n");
    const auto trimmed_end = content.find_last_not_of(" \t\r\n");
    if (trimmed_begin != std::string::npos) content = content.substr(trimmed_begin, trimmed_end - trimmed_begin + 1);

    const PairScores fresh = parse_reply(content, registry_, missing);
    for (const auto& [pair, score] : fresh) {
        cache_.put(config_.model, pair_key(registry_, pair), score);
        out[pair] = score;
    }
    cache_.save();
    return out;
}

}  // namespace tailaug::lkg
