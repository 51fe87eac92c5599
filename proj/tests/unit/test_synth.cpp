#include <filesystem>

#include "doctest.h"
#include "support/temp_dir.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/manifest.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/synth.hpp"

using namespace tailaug;

namespace {

bool masks_overlap(const cam::InpaintMask& a, const cam::InpaintMask& b) {
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            if (a.at(y, x) && b.at(y, x)) return true;
    return false;
}

}  // namespace

TEST_CASE("world config validation") {
    auto w = synth::SynthWorldConfig::default_world();
    CHECK_NOTHROW(w.validate());
    CHECK(w.num_classes() == 8);
    CHECK(w.entangle(0, 6) == w.entangle(6, 0));

    auto bad = w;
    bad.class_frequencies[0] = 1.2;
    CHECK_THROWS(bad.validate());
    bad = w;
    bad.class_frequencies.pop_back();
    CHECK_THROWS(bad.validate());
    bad = w;
    bad.entangle_prob[1] = -0.1;
    CHECK_THROWS(bad.validate());
    bad = w;
    bad.lesions[0].max_radius = 40.0;
    CHECK_THROWS(bad.validate());
    bad = w;
    bad.num_samples = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("inclusion rates follow the configured frequencies") {
    auto w = synth::SynthWorldConfig::with_classes({"A", "T"}, {0.9, 0.02});
    w.num_samples = 1000;
    w.seed = 1;
    const auto d = synth::generate_synthetic_dataset(w);
    REQUIRE(d.manifest.records.size() == 1000);
    double counts[2] = {0, 0};
    for (const auto& r : d.manifest.records) {
        counts[0] += r.labels.test(0);
        counts[1] += r.labels.test(1);
    }
    CHECK(std::abs(counts[0] / 1000.0 - 0.9) <= 0.03);
    CHECK(std::abs(counts[1] / 1000.0 - 0.02) <= 0.03);
}

TEST_CASE("entanglement probability controls mask overlap") {
    auto w = synth::SynthWorldConfig::with_classes({"A", "T"}, {0.95, 0.9});
    w.set_entangle(0, 1, 0.3);
    w.num_samples = 1000;
    w.seed = 2;
    const auto d = synth::generate_synthetic_dataset(w);
    double both = 0, overlapping = 0;
    for (const auto& r : d.manifest.records) {
        if (!(r.labels.test(0) && r.labels.test(1))) continue;
        ++both;
        const auto& t = d.truth.get(r.id);
        const bool hit = masks_overlap(t.lesion_masks.at(0), t.lesion_masks.at(1));
        overlapping += hit;
        CHECK(hit == (t.overlapping.count({0, 1}) == 1));
    }
    MESSAGE("co-present " << both << ", overlap fraction " << overlapping / both);
    CHECK(both > 800);
    CHECK(std::abs(overlapping / both - 0.3) <= 0.05);

    const auto gt = synth::ground_truth_entanglement(d.truth, d.manifest.registry);
    CHECK(gt.at(0, 1) == doctest::Approx(overlapping / both));
    CHECK(gt.provenance == lkg::MatrixProvenance::synthetic_ground_truth);
    CHECK_NOTHROW(gt.validate());
}

TEST_CASE("masks agree with labels and lesions are drawn into the image") {
    auto w = synth::SynthWorldConfig::default_world();
    w.num_samples = 300;
    w.seed = 3;
    const auto d = synth::generate_synthetic_dataset(w);
    for (std::size_t i = 0; i < d.manifest.records.size(); ++i) {
        const auto& r = d.manifest.records[i];
        const auto& t = d.truth.get(r.id);
        CHECK(t.present == r.labels.positives());
        CHECK(t.lesion_masks.size() == t.present.size());
        for (const auto& [c, m] : t.lesion_masks) {
            CHECK(r.labels.test(c));
            CHECK(m.popcount() > 0);
        }
        // Outside every lesion the image is the pristine background.
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                bool inside = false;
                for (const auto& [c, m] : t.lesion_masks) inside = inside || m.at(y, x);
                if (!inside) CHECK(d.images[i].at(y, x) == t.background.at(y, x));
            }
        for (float v : d.images[i].data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            CHECK(v * 255.0f == doctest::Approx(std::round(v * 255.0f)).epsilon(1e-5));
        }
    }
}

TEST_CASE("generation is deterministic and seed dependent") {
    auto w = synth::SynthWorldConfig::default_world();
    w.num_samples = 40;
    w.seed = 5;
    const auto a = synth::generate_synthetic_dataset(w);
    const auto b = synth::generate_synthetic_dataset(w);
    CHECK(a.manifest.records == b.manifest.records);
    CHECK(a.images == b.images);
    CHECK(a.degradation_log == b.degradation_log);
    w.seed = 6;
    const auto c = synth::generate_synthetic_dataset(w);
    CHECK(a.images != c.images);
}

TEST_CASE("oracle inpainting selects background under the mask") {
    auto w = synth::SynthWorldConfig::default_world();
    w.num_samples = 10;
    const auto d = synth::generate_synthetic_dataset(w);
    const auto& image = d.images[0];
    const auto& t = d.truth.get(d.manifest.records[0].id);
    CHECK(synth::oracle_inpaint(image, cam::InpaintMask(64, 64), t) == image);
    CHECK(synth::oracle_inpaint(image, cam::InpaintMask(64, 64, true), t) == t.background);
    core::CounterRng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        cam::InpaintMask m(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) m.set(y, x, rng.bernoulli(0.4));
        const auto out = synth::oracle_inpaint(image, m, t);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                CHECK(out.at(y, x) == (m.at(y, x) ? t.background.at(y, x) : image.at(y, x)));
    }
    CHECK_THROWS_AS(synth::oracle_inpaint(image, cam::InpaintMask(32, 32), t), ArgumentError);
}

TEST_CASE("written dataset reloads bit-exactly") {
    auto w = synth::SynthWorldConfig::default_world();
    w.num_samples = 25;
    w.seed = 8;
    auto d = synth::generate_synthetic_dataset(w);
    testing_support::TempDir dir("synth");
    synth::write_synthetic_dataset(d, dir.path());
    CHECK(std::filesystem::exists(dir / "manifest.csv"));
    CHECK(std::filesystem::exists(dir / "registry.json"));
    CHECK(std::filesystem::exists(dir / "degradations.txt"));
    CHECK(d.manifest.base_dir == dir.path());

    const auto m = core::load_manifest(dir / "manifest.csv", d.manifest.registry);
    CHECK(m.records == d.manifest.records);
    CHECK(m.unresolved.empty());
    core::ImageCache cache(64);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        CHECK(cache.get(m.base_dir / m.records[i].image_path) == d.images[i]);
    }
    const auto truth = synth::GroundTruthStore::load(dir / "groundtruth", d.manifest.registry);
    CHECK(truth.size() == d.truth.size());
    for (const auto& [id, t] : d.truth.all()) {
        const auto& back = truth.get(id);
        CHECK(back.present == t.present);
        CHECK(back.background == t.background);
        CHECK(back.overlapping == t.overlapping);
        CHECK(back.degradations == t.degradations);
        for (const auto& [c, mask] : t.lesion_masks) CHECK(back.lesion_masks.at(c).bits() == mask.bits());
    }
    CHECK_THROWS_AS(truth.get("missing"), ArgumentError);
}

TEST_CASE("default world is long tailed") {
    auto w = synth::SynthWorldConfig::default_world();
    CHECK(w.num_samples == 2500);
    for (std::size_t i = 1; i < w.num_classes(); ++i) CHECK(w.class_frequencies[i] <= w.class_frequencies[i - 1]);
    CHECK(w.class_frequencies[6] == 0.02);
    CHECK(w.class_frequencies[7] == 0.02);
}
