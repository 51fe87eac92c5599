#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/lkg.hpp"
#include "tailaug/llm_backend.hpp"

using namespace tailaug;
using lkg::RetentionMode;

namespace {

core::ClassRegistry registry(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("C" + std::to_string(i));
    return core::ClassRegistry(names);
}

std::string chat_envelope(const std::string& content) {
    nlohmann::json env;
    env["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    return env.dump();
}

core::ClassIndex cxr(const std::string& abbreviation) {
    const auto& abbr = core::ClassRegistry::cxr_abbreviations();
    for (std::size_t i = 0; i < abbr.size(); ++i) {
        if (abbr[i] == abbreviation) return static_cast<core::ClassIndex>(i);
    }
    throw std::logic_error("no abbreviation " + abbreviation);
}

}  // namespace

TEST_CASE("target selection matches the subset oracle on every small configuration") {
    // Exhaustive over label vectors and head/tail splits for K up to 4, random scores on a coarse grid.
    const double grid[] = {0.0, 0.3, 0.7, 1.0};
    core::CounterRng rng(17);
    std::size_t checked = 0;
    for (std::size_t k = 2; k <= 4; ++k) {
        for (std::uint32_t tail_bits = 0; tail_bits < (1u << k); ++tail_bits) {
            stats::HeadTailPartition part;
            for (std::size_t c = 0; c < k; ++c) {
                ((tail_bits >> c) & 1u ? part.tail : part.head).insert(static_cast<core::ClassIndex>(c));
            }
            for (std::uint32_t label_bits = 0; label_bits < (1u << k); ++label_bits) {
                core::LabelVector labels(k);
                for (std::size_t c = 0; c < k; ++c) labels.set(static_cast<core::ClassIndex>(c), (label_bits >> c) & 1u);
                for (int draw = 0; draw < 4; ++draw) {
                    lkg::PairScores scores;
                    for (auto h : part.head)
                        for (auto t : part.tail) scores[{h, t}] = grid[rng.below(4)];
                    for (double tau : {0.0, 0.3, 0.5, 1.0}) {
                        for (auto mode : {RetentionMode::all_above_threshold, RetentionMode::strongest_only}) {
                            const auto got = lkg::select_inpaint_targets(labels, part, scores, tau, mode);
                            CHECK(got.inpaint_targets == oracle::lkg_targets(labels, part, scores, tau, mode));
                            core::ClassSet all = got.inpaint_targets;
                            all.insert(got.retained_heads.begin(), got.retained_heads.end());
                            core::ClassSet present_heads;
                            for (auto c : labels.positives())
                                if (part.is_head(c)) present_heads.insert(c);
                            CHECK(all == present_heads);
                            ++checked;
                        }
                    }
                }
            }
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("target selection against the oracle for K up to 6 with random partitions") {
    const double grid[] = {0.0, 0.3, 0.7, 1.0};
    core::CounterRng rng(5);
    for (int trial = 0; trial < 3000; ++trial) {
        const std::size_t k = static_cast<std::size_t>(1 + rng.below(6));
        stats::HeadTailPartition part;
        core::LabelVector labels(k);
        for (std::size_t c = 0; c < k; ++c) {
            const auto ci = static_cast<core::ClassIndex>(c);
            (rng.bernoulli(0.4) ? part.tail : part.head).insert(ci);
            labels.set(ci, rng.bernoulli(0.6));
        }
        lkg::PairScores scores;
        for (auto h : part.head)
            for (auto t : part.tail) scores[{h, t}] = grid[rng.below(4)];
        const double tau = grid[rng.below(4)];
        for (auto mode : {RetentionMode::all_above_threshold, RetentionMode::strongest_only}) {
            CHECK(lkg::select_inpaint_targets(labels, part, scores, tau, mode).inpaint_targets ==
                  oracle::lkg_targets(labels, part, scores, tau, mode));
        }
    }
}

TEST_CASE("raising the threshold never shrinks the target set") {
    core::CounterRng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t k = 6;
        stats::HeadTailPartition part;
        core::LabelVector labels(k);
        for (std::size_t c = 0; c < k; ++c) {
            const auto ci = static_cast<core::ClassIndex>(c);
            (c < 3 ? part.head : part.tail).insert(ci);
            labels.set(ci, rng.bernoulli(0.6));
        }
        lkg::PairScores scores;
        for (auto h : part.head)
            for (auto t : part.tail) scores[{h, t}] = rng.uniform();
        core::ClassSet previous;
        for (double tau = 0.0; tau <= 1.0001; tau += 0.1) {
            const auto now = lkg::select_inpaint_targets(labels, part, scores, tau).inpaint_targets;
            CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
            previous = now;
        }
    }
}

TEST_CASE("target selection worked examples and errors") {
    stats::HeadTailPartition part{{0, 1}, {2}, {}};
    core::LabelVector labels = core::LabelVector::from_set(3, {0, 1, 2});
    lkg::PairScores scores{{{0, 2}, 0.9}, {{1, 2}, 0.1}};
    auto d = lkg::select_inpaint_targets(labels, part, scores, 0.5);
    CHECK(d.inpaint_targets == core::ClassSet{1});
    CHECK(d.retained_heads == core::ClassSet{0});
    CHECK(d.rationale.size() == 2);

    // No tail present: every head is a target. No head: nothing.
    CHECK(lkg::select_inpaint_targets(core::LabelVector::from_set(3, {0, 1}), part, {}, 0.5).inpaint_targets ==
          core::ClassSet{0, 1});
    CHECK(lkg::select_inpaint_targets(core::LabelVector::from_set(3, {2}), part, {}, 0.5).inpaint_targets.empty());

    // Strongest-only with a tie keeps the lower index.
    lkg::PairScores tie{{{0, 2}, 0.8}, {{1, 2}, 0.8}};
    d = lkg::select_inpaint_targets(labels, part, tie, 0.5, RetentionMode::strongest_only);
    CHECK(d.retained_heads == core::ClassSet{0});
    CHECK(d.inpaint_targets == core::ClassSet{1});

    CHECK_THROWS_AS(lkg::select_inpaint_targets(labels, part, {{{0, 2}, 0.9}}, 0.5), ArgumentError);
    CHECK_THROWS_AS(lkg::select_inpaint_targets(labels, part, scores, 1.5), ArgumentError);
}

TEST_CASE("entanglement matrix validation and reordering on load") {
    auto reg = registry(3);
    auto m = lkg::EntanglementMatrix::zeros(reg, lkg::MatrixProvenance::hand_authored);
    m.set(0, 2, 0.75);
    CHECK(m.at(2, 0) == 0.75);
    CHECK_NOTHROW(m.validate());

    auto bad = m;
    bad.scores[1] = 0.4;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.scores[1] = bad.scores[3] = 1.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    testing_support::TempDir dir("lkg");
    m.save(dir / "m.json");
    const core::ClassRegistry reordered({"C2", "C0", "C1"});
    const auto back = lkg::EntanglementMatrix::load(dir / "m.json", reordered);
    CHECK(back.at(0, 1) == 0.75);
    CHECK(back.at(1, 2) == 0.0);
    CHECK(back.provenance == lkg::MatrixProvenance::hand_authored);
    CHECK_THROWS(lkg::EntanglementMatrix::load(dir / "m.json", registry(4)));
    for (auto p : {lkg::MatrixProvenance::llm_cache, lkg::MatrixProvenance::hand_authored,
                   lkg::MatrixProvenance::synthetic_ground_truth}) {
        CHECK(lkg::matrix_provenance_from_string(lkg::to_string(p)) == p);
    }
}

TEST_CASE("matrix backend and query_entanglement") {
    auto m = lkg::EntanglementMatrix::zeros(registry(4), lkg::MatrixProvenance::synthetic_ground_truth);
    m.set(0, 3, 0.6);
    lkg::MatrixBackend backend(m);
    const auto scores = lkg::query_entanglement(backend, {0, 1}, {3}, m.registry);
    CHECK(scores.size() == 2);
    CHECK(scores.at({0, 3}) == 0.6);
    CHECK(scores.at({1, 3}) == 0.0);
    CHECK(lkg::query_entanglement(backend, {0, 1}, {}, m.registry).empty());
    CHECK_THROWS_AS(lkg::query_entanglement(backend, {0}, {0}, m.registry), ArgumentError);
    CHECK_THROWS_AS(lkg::query_entanglement(backend, {7}, {3}, m.registry), ArgumentError);
}

TEST_CASE("fallback backend switches once the primary fails") {
    struct Failing final : lkg::KnowledgeBackend {
        int calls = 0;
        lkg::PairScores query(const std::vector<lkg::ClassPair>&) override {
            ++calls;
            throw BackendError("down");
        }
        std::string name() const override { return "failing"; }
    } failing;
    auto m = lkg::EntanglementMatrix::zeros(registry(2), lkg::MatrixProvenance::hand_authored);
    m.set(0, 1, 0.2);
    lkg::MatrixBackend matrix(m);
    lkg::FallbackBackend fb(failing, matrix);
    CHECK(fb.query({{0, 1}}).at({0, 1}) == 0.2);
    CHECK(fb.fell_back());
    CHECK(fb.query({{0, 1}}).at({0, 1}) == 0.2);
    CHECK(failing.calls == 1);
}

TEST_CASE("LLM reply parsing") {
    const auto reg = core::ClassRegistry::cxr_profile();
    const lkg::ClassPair co_pa{cxr("CO"), cxr("PA")};
    const auto parsed = lkg::LlmBackend::parse_reply(R"({"Consolidation|Pneumonia": 0.9})", reg, {co_pa});
    CHECK(parsed.size() == 1);
    CHECK(parsed.at(co_pa) == 0.9);

    try {
        lkg::LlmBackend::parse_reply("not json {", reg, {co_pa});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.raw() == "not json {");
    }
    CHECK_THROWS_AS(lkg::LlmBackend::parse_reply(R"({"Consolidation|Pneumonia": 1.5})", reg, {co_pa}), ParseError);
    CHECK_THROWS_AS(lkg::LlmBackend::parse_reply(R"({"Consolidation|Nope": 0.5})", reg, {co_pa}), ParseError);
    CHECK_THROWS_AS(lkg::LlmBackend::parse_reply(R"({})", reg, {co_pa}), ParseError);
    CHECK_THROWS_AS(lkg::LlmBackend::parse_reply(R"([0.5])", reg, {co_pa}), ParseError);
    CHECK(lkg::LlmBackend::render_prompt(reg, {co_pa}).find("Consolidation|Pneumonia") != std::string::npos);
}

TEST_CASE("LLM backend caches, retries and persists") {
    const auto reg = registry(3);
    testing_support::TempDir dir("llm");
    int calls = 0;
    int fail_first = 2;
    std::string last_body;
    lkg::Transport transport = [&](const std::string&, const std::string& body, const lkg::HttpHeaders&) {
        ++calls;
        last_body = body;
        if (fail_first-- > 0) return lkg::HttpReply{503, "busy"};
        return lkg::HttpReply{200, chat_envelope(" {\"C0|C2\": 0.25, \"C1|C2\": 0.8}\n")};
    };
    lkg::LlmConfig cfg;
    cfg.endpoint = "http://unused/v1/chat/completions";
    cfg.backoff_ms = 1;
    cfg.max_retries = 3;
    cfg.api_key_env.clear();
    cfg.cache_path = dir / "cache.json";
    {
        lkg::LlmBackend llm(cfg, reg, transport);
        const auto s = llm.query({{0, 2}, {1, 2}});
        CHECK(s.at({0, 2}) == 0.25);
        CHECK(s.at({1, 2}) == 0.8);
        CHECK(calls == 3);
        const auto request = nlohmann::json::parse(last_body);
        CHECK(request.at("temperature") == 0);
        CHECK(request.at("model") == cfg.model);
        // Cached now: no further network traffic.
        llm.query({{1, 2}, {0, 2}});
        CHECK(calls == 3);
        CHECK(llm.cache().size() == 2);
    }
    // A fresh backend reads the cache file.
    lkg::LlmBackend again(cfg, reg, transport);
    CHECK(again.query({{0, 2}}).at({0, 2}) == 0.25);
    CHECK(calls == 3);

    // Exhausted retries surface as BackendError; a fallback takes over.
    lkg::Transport down = [&](const std::string&, const std::string&, const lkg::HttpHeaders&) -> lkg::HttpReply {
        throw std::runtime_error("connection refused");
    };
    cfg.cache_path.clear();
    lkg::LlmBackend dead(cfg, reg, down);
    CHECK_THROWS_AS(dead.query({{0, 2}}), BackendError);
    CHECK(dead.network_calls() == 4);
    auto m = lkg::EntanglementMatrix::zeros(reg, lkg::MatrixProvenance::hand_authored);
    lkg::MatrixBackend matrix(m);
    lkg::LlmBackend dead2(cfg, reg, down);
    lkg::FallbackBackend fb(dead2, matrix);
    CHECK(lkg::query_entanglement(fb, {0}, {2}, reg).at({0, 2}) == 0.0);
    CHECK(fb.fell_back());

    // Malformed content is a ParseError with the raw text, not a retry.
    lkg::Transport garbage = [&](const std::string&, const std::string&, const lkg::HttpHeaders&) {
        return lkg::HttpReply{200, chat_envelope("sure! C0|C2 is 0.3")};
    };
    lkg::LlmBackend chatty(cfg, reg, garbage);
    try {
        chatty.query({{0, 2}});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.raw() == "sure! C0|C2 is 0.3");
    }
    CHECK(chatty.network_calls() == 1);
}

TEST_CASE("LLM backend over HTTP against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        auth = req.get_header_value("Authorization");
        const auto body = nlohmann::json::parse(req.body);
        const std::string prompt = body.at("messages").at(1).at("content");
        const bool asks = prompt.find("C0|C1") != std::string::npos;
        res.set_content(chat_envelope(asks ? R"({"C0|C1": 0.4})" : "{}"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("TAILAUG_TEST_KEY", "secret", 1);
    lkg::LlmConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.api_key_env = "TAILAUG_TEST_KEY";
    cfg.backoff_ms = 1;
    cfg.timeout_s = 5;
    lkg::LlmBackend llm(cfg, registry(2));
    CHECK(llm.query({{0, 1}}).at({0, 1}) == 0.4);
    CHECK(hits == 1);
    CHECK(auth == "Bearer secret");

    lkg::LlmConfig missing = cfg;
    missing.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/nope";
    missing.max_retries = 1;
    lkg::LlmBackend wrong(missing, registry(2));
    CHECK_THROWS_AS(wrong.query({{0, 1}}), BackendError);

    server.stop();
    thread.join();
}
