#include "doctest.h"
#include "json.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/stats.hpp"

using namespace tailaug;

namespace {

core::Manifest with_counts(const std::vector<int>& counts) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < counts.size(); ++i) names.push_back("C" + std::to_string(i));
    core::Manifest m;
    m.registry = core::ClassRegistry(names);
    const int n = *std::max_element(counts.begin(), counts.end());
    for (int i = 0; i < n; ++i) {
        core::SampleRecord r;
        r.id = "r" + std::to_string(i);
        r.image_path = r.id + ".png";
        r.labels = core::LabelVector(counts.size());
        for (std::size_t c = 0; c < counts.size(); ++c) r.labels.set(static_cast<int>(c), i < counts[c]);
        m.records.push_back(r);
    }
    return m;
}

}  // namespace

TEST_CASE("frequency threshold picks the rare classes") {
    const auto m = with_counts({100, 5, 80, 3});
    const auto st = stats::compute_class_stats(m);
    CHECK(st.counts == std::vector<std::int64_t>{100, 5, 80, 3});
    CHECK(st.total_samples == 100);
    const auto p = stats::partition_head_tail(st, m.registry, stats::FrequencyThreshold{0.1});
    CHECK(p.tail == core::ClassSet{1, 3});
    CHECK(p.head == core::ClassSet{0, 2});
    CHECK(p.warnings.empty());
}

TEST_CASE("equal counts give an empty tail with a warning") {
    const auto m = with_counts({10, 10, 10});
    const auto p = stats::partition_head_tail(stats::compute_class_stats(m), m.registry, stats::FrequencyThreshold{0.1});
    CHECK(p.tail.empty());
    CHECK(p.head.size() == 3);
    CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("explicit tails are resolved by name") {
    const auto m = with_counts({10, 4, 7});
    const auto st = stats::compute_class_stats(m);
    const auto p = stats::partition_head_tail(st, m.registry, stats::ExplicitTail{{"C2"}});
    CHECK(p.tail == core::ClassSet{2});
    CHECK_THROWS_AS(stats::partition_head_tail(st, m.registry, stats::ExplicitTail{{"nope"}}), ArgumentError);
}

TEST_CASE("the chest X-ray tail policy names six registry classes") {
    const auto reg = core::ClassRegistry::cxr_profile();
    const auto policy = stats::cxr_tail_policy();
    CHECK(policy.names.size() == 6);
    for (const auto& name : policy.names) CHECK(reg.find(name).has_value());
}

TEST_CASE("counts equal an independent recount and the partition covers every class") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        core::CounterRng rng(seed);
        const std::size_t k = 2 + seed % 7;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < k; ++i) names.push_back("K" + std::to_string(i));
        core::Manifest m;
        m.registry = core::ClassRegistry(names);
        std::vector<double> freq(k);
        for (auto& f : freq) f = rng.uniform() * rng.uniform();
        for (int i = 0; i < 200; ++i) {
            core::SampleRecord r;
            r.id = std::to_string(i);
            r.labels = core::LabelVector(k);
            for (std::size_t c = 0; c < k; ++c) r.labels.set(static_cast<int>(c), rng.bernoulli(freq[c]));
            m.records.push_back(r);
        }
        const auto st = stats::compute_class_stats(m);
        for (std::size_t c = 0; c < k; ++c) {
            std::int64_t recount = 0;
            for (const auto& r : m.records) recount += r.labels.test(static_cast<int>(c)) ? 1 : 0;
            CHECK(st.counts[c] == recount);
        }
        const double tau = 0.05 + 0.02 * static_cast<double>(seed);
        const auto p = stats::partition_head_tail(st, m.registry, stats::FrequencyThreshold{tau});
        const auto max_count = *std::max_element(st.counts.begin(), st.counts.end());
        for (std::size_t c = 0; c < k; ++c) {
            const int ci = static_cast<int>(c);
            CHECK(p.is_head(ci) != p.is_tail(ci));
            CHECK(p.is_tail(ci) == (static_cast<double>(st.counts[c]) < tau * static_cast<double>(max_count)));
        }
    }
}

TEST_CASE("stats report lists each class with its group") {
    const auto m = with_counts({3, 1, 2});
    const auto st = stats::compute_class_stats(m);
    const auto p = stats::partition_head_tail(st, m.registry, stats::ExplicitTail{{"C1"}});
    const auto j = nlohmann::json::parse(stats::stats_report_json(st, m.registry, p));
    CHECK(j.at("total_samples") == 3);
    REQUIRE(j.at("classes").size() == 3);
    CHECK(j.at("classes")[1].at("group") == "tail");
    CHECK(j.at("classes")[0].at("count") == 3);
}

TEST_CASE("empty manifests and bad thresholds are rejected") {
    core::Manifest empty;
    empty.registry = core::ClassRegistry({"A", "B"});
    CHECK_THROWS_AS(stats::compute_class_stats(empty), ArgumentError);
    const auto m = with_counts({2, 1});
    CHECK_THROWS_AS(stats::partition_head_tail(stats::compute_class_stats(m), m.registry, stats::FrequencyThreshold{1.5}),
                    ArgumentError);
}
