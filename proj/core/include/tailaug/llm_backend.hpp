#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "tailaug/lkg.hpp"

namespace tailaug::lkg {

struct LlmConfig {
    /// Chat-completions URL, e.g. https://api.openai.com/v1/chat/completions.
    std::string endpoint;
    std::string model = "gpt-4";
    /// Environment variable holding the bearer token; unset means no auth header.
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 3;
    int backoff_ms = 500;
    /// Minimum spacing between network calls.
    int min_interval_ms = 0;
    int timeout_s = 60;
    /// JSON cache file; empty keeps the cache in memory only.
    std::filesystem::path cache_path;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;
/// POSTs a JSON body. Throwing or returning a non-2xx status counts as a transport failure.
using Transport = std::function<HttpReply(const std::string& url, const std::string& body, const HttpHeaders& headers)>;

/// Transport backed by cpp-httplib (http and https URLs).
Transport make_http_transport(int timeout_s);

/// (model, "Head|Tail") -> score. Concurrent readers, exclusive writers.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path path);

    std::optional<double> get(const std::string& model, const std::string& key) const;
    void put(const std::string& model, const std::string& key, double score);
    /// Writes the cache file if a path was given.
    void save() const;
    std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::map<std::string, double>> entries_;
};

/// Pair key used in prompts, replies and the cache: "HeadName|TailName".
std::string pair_key(const core::ClassRegistry& registry, const ClassPair& pair);

/// Asks an OpenAI-compatible chat endpoint (temperature 0) for a 0-1
/// spatial-entanglement likelihood per pair and caches the answers.
class LlmBackend final : public KnowledgeBackend {
public:
    LlmBackend(LlmConfig config, core::ClassRegistry registry, Transport transport = {});

    PairScores query(const std::vector<ClassPair>& pairs) override;
    std::string name() const override { return "llm:" + config_.model; }

    std::size_t network_calls() const { return network_calls_; }
    const ResponseCache& cache() const { return cache_; }

    static std::string system_prompt();
    static std::string render_prompt(const core::ClassRegistry& registry, const std::vector<ClassPair>& pairs);
    /// Parses a strict JSON object keyed "Head|Tail". Throws ParseError (with the raw text) on
    /// malformed JSON, missing pairs, unknown names or scores outside [0,1].
    static PairScores parse_reply(const std::string& content, const core::ClassRegistry& registry,
                                  const std::vector<ClassPair>& expected);

private:
    std::string call_with_retries(const std::string& body);
    void throttle();

    LlmConfig config_;
    core::ClassRegistry registry_;
    Transport transport_;
    ResponseCache cache_;
    std::mutex call_mutex_;
    std::optional<std::chrono::steady_clock::time_point> last_call_;
    std::size_t network_calls_ = 0;
};

}  // namespace tailaug::lkg
