#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support/scripted_cam.hpp"
#include "support/temp_dir.hpp"
#include "tailaug/augment.hpp"
#include "tailaug/core/manifest.hpp"
#include "tailaug/error.hpp"
#include "tailaug/pil.hpp"
#include "tailaug/trainer.hpp"

using namespace tailaug;
using testing_support::ScriptedCam;

namespace {

/// Three heads (A, B, C) and one tail (T) at 64 px.
struct World {
    synth::SynthDataset data;
    stats::HeadTailPartition partition{{0, 1, 2}, {3}, {}};

    explicit World(int samples, std::uint64_t seed = 4, double entangle = 0.0) {
        auto cfg = synth::SynthWorldConfig::with_classes({"A", "B", "C", "T"}, {0.5, 0.4, 0.3, 0.15});
        cfg.num_samples = samples;
        cfg.seed = seed;
        if (entangle > 0.0) cfg.set_entangle(0, 3, entangle);
        data = synth::generate_synthetic_dataset(cfg);
    }

    /// First record whose label set is exactly `classes`.
    std::size_t find(const core::ClassSet& classes) const {
        for (std::size_t i = 0; i < data.manifest.records.size(); ++i) {
            if (data.manifest.records[i].labels.positives() == classes) return i;
        }
        throw std::logic_error("no record with the requested labels");
    }
};

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

}  // namespace

TEST_CASE("generation config validation") {
    augment::GenerationConfig c;
    CHECK_NOTHROW(c.validate());
    c.cam_threshold = 1.2;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    c.max_mask_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    c.multiplicity = 0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    c.dilation_radius = -1;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("label rewrite: head cleared, tail kept, pixels outside the mask untouched") {
    World w(400);
    const auto i = w.find({0, 3});
    const auto& rec = w.data.manifest.records[i];
    const auto& truth = w.data.truth.get(rec.id);
    ScriptedCam cam(4, 64);
    cam.script_truth(truth);
    augment::OracleInpainter oracle(w.data.truth);
    augment::GenerationConfig cfg;
    const auto out = augment::synthesize_sample(rec, w.data.images[i], cam, oracle, nullptr, w.partition,
                                                w.data.manifest.registry, cfg, {7});
    REQUIRE(std::holds_alternative<augment::AugmentedSample>(out));
    const auto& s = std::get<augment::AugmentedSample>(out);
    CHECK(s.labels.positives() == core::ClassSet{3});
    CHECK(s.provenance.inpainted_classes == core::ClassSet{0});
    CHECK(s.provenance.retained_head_classes.empty());
    CHECK(s.provenance.source_id == rec.id);
    CHECK(s.provenance.generator_id == "oracle-background");
    CHECK(s.provenance.noise_seed == 7);
    CHECK(s.provenance.mask_area_fraction == doctest::Approx(s.mask.area_fraction()));
    const auto& head_mask = truth.lesion_masks.at(0);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!s.mask.at(y, x)) CHECK(s.image.at(y, x) == w.data.images[i].at(y, x));
            if (head_mask.at(y, x)) {
                CHECK(s.mask.at(y, x));
                CHECK(s.image.at(y, x) == truth.background.at(y, x));
            }
        }
}

TEST_CASE("skip reasons") {
    World w(400, 4, 1.0);
    ScriptedCam cam(4, 64);
    augment::OracleInpainter oracle(w.data.truth);
    augment::GenerationConfig cfg;
    const auto& reg = w.data.manifest.registry;
    const auto reason = [&](std::size_t i, lkg::KnowledgeBackend* backend = nullptr,
                            const augment::GenerationConfig& c = augment::GenerationConfig{}) {
        const auto out = augment::synthesize_sample(w.data.manifest.records[i], w.data.images[i], cam, oracle, backend,
                                                    w.partition, reg, c, {0});
        return std::holds_alternative<augment::Skip>(out) ? std::get<augment::Skip>(out).reason : std::string("emitted");
    };

    cam.script({});
    CHECK(reason(w.find({3})) == "no-head");
    CHECK(reason(w.find({0, 1})) == "no-tail");
    CHECK(reason(w.find({1, 3})) == "empty-cam");

    const auto pair = w.find({0, 3});
    auto m = lkg::EntanglementMatrix::zeros(reg, lkg::MatrixProvenance::hand_authored);
    m.set(0, 3, 0.9);
    lkg::MatrixBackend backend(m);
    cam.script_truth(w.data.truth.get(w.data.manifest.records[pair].id));
    CHECK(reason(pair, &backend) == "all-heads-retained");
    CHECK(reason(pair) == "emitted");

    // A CAM covering the whole image blows the area limit.
    cam.script({{0, cam::InpaintMask(64, 64, true)}});
    CHECK(reason(pair) == "mask-too-large");
    augment::GenerationConfig loose;
    loose.max_mask_fraction = 1.0;
    CHECK(reason(pair, nullptr, loose) == "emitted");
}

TEST_CASE("retained heads stay labeled and are not inpainted") {
    World w(600, 9);
    const auto i = w.find({0, 1, 3});
    const auto& rec = w.data.manifest.records[i];
    ScriptedCam cam(4, 64);
    cam.script_truth(w.data.truth.get(rec.id));
    augment::OracleInpainter oracle(w.data.truth);
    auto m = lkg::EntanglementMatrix::zeros(w.data.manifest.registry, lkg::MatrixProvenance::hand_authored);
    m.set(1, 3, 0.8);
    lkg::MatrixBackend backend(m);
    const auto out = augment::synthesize_sample(rec, w.data.images[i], cam, oracle, &backend, w.partition,
                                                w.data.manifest.registry, augment::GenerationConfig{}, {1});
    REQUIRE(std::holds_alternative<augment::AugmentedSample>(out));
    const auto& s = std::get<augment::AugmentedSample>(out);
    CHECK(s.labels.positives() == core::ClassSet{1, 3});
    CHECK(s.provenance.inpainted_classes == core::ClassSet{0});
    CHECK(s.provenance.retained_head_classes == core::ClassSet{1});
}

TEST_CASE("trained classifier CAMs cover the head lesions they erase") {
    World w(600);
    core::ImageCache cache(64);
    synth::preload(cache, w.data);
    trainer::TrainConfig tc;
    tc.epochs = 8;
    tc.learning_rate = 3e-3;
    tc.seed = 4;
    auto trained = trainer::train_classifier(
        tc, 4, [&](int) { return pil::build_original_dataset(w.data.manifest); }, cache, nullptr, {});
    augment::OracleInpainter oracle(w.data.truth);
    std::size_t lesion = 0, covered = 0, retextured = 0, emitted = 0;
    for (std::size_t i = 0; i < w.data.manifest.records.size(); ++i) {
        const auto& rec = w.data.manifest.records[i];
        const auto out = augment::synthesize_sample(rec, w.data.images[i], trained.model, oracle, nullptr, w.partition,
                                                    w.data.manifest.registry, augment::GenerationConfig{}, {i});
        const auto* s = std::get_if<augment::AugmentedSample>(&out);
        if (!s) continue;
        ++emitted;
        const auto& truth = w.data.truth.get(rec.id);
        for (auto h : s->provenance.inpainted_classes) {
            const auto& gt = truth.lesion_masks.at(h);
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) {
                    if (!gt.at(y, x)) continue;
                    ++lesion;
                    covered += s->mask.at(y, x);
                    retextured += s->mask.at(y, x) && s->image.at(y, x) == truth.background.at(y, x);
                }
        }
    }
    REQUIRE(emitted > 20);
    const double coverage = static_cast<double>(covered) / static_cast<double>(lesion);
    MESSAGE("emitted " << emitted << ", head lesion pixels covered " << coverage);
    CHECK(coverage >= 0.9);
    CHECK(retextured == covered);
}

TEST_CASE("run_generation accounting, files and determinism") {
    World w(200, 11);
    testing_support::TempDir dir("gen");
    synth::write_synthetic_dataset(w.data, dir / "world");
    core::ImageCache cache(64);
    ScriptedCam cam(4, 64);
    // The scripted CAM ignores the image, so cover a fixed square around the center.
    cam::InpaintMask square(64, 64);
    for (int y = 20; y < 40; ++y)
        for (int x = 20; x < 40; ++x) square.set(y, x);
    cam.script({{0, square}, {1, square}, {2, square}});
    augment::OracleInpainter oracle(w.data.truth);
    augment::GenerationConfig cfg;
    cfg.seed = 3;

    const auto first = augment::run_generation(w.data.manifest, cache, cam, oracle, nullptr, w.partition, cfg, dir / "a");
    const auto second = augment::run_generation(w.data.manifest, cache, cam, oracle, nullptr, w.partition, cfg, dir / "b");
    CHECK(first.inputs == 200);
    std::size_t skipped = 0;
    for (const auto& [reason, n] : first.skip_counts) skipped += n;
    CHECK(first.emitted + skipped == first.inputs);
    CHECK(first.emitted == first.augmented.records.size());
    CHECK(first.emitted > 0);
    CHECK(count_lines(dir / "a" / "provenance.jsonl") == 200);
    CHECK(testing_support::read_file(dir / "a" / "provenance.jsonl") ==
          testing_support::read_file(dir / "b" / "provenance.jsonl"));
    CHECK(testing_support::read_file(dir / "a" / "augmented.csv") ==
          testing_support::read_file(dir / "b" / "augmented.csv"));

    std::map<std::string, std::size_t> reasons;
    std::ifstream in(dir / "a" / "provenance.jsonl");
    for (std::string line; std::getline(in, line);) {
        const auto j = nlohmann::json::parse(line);
        const std::string status = j.at("status");
        if (status.rfind("skipped:", 0) == 0) ++reasons[status.substr(8)];
    }
    CHECK(reasons == first.skip_counts);

    for (std::size_t k = 0; k < first.augmented.records.size(); ++k) {
        const auto& rec = first.augmented.records[k];
        CHECK(std::filesystem::exists(first.augmented.base_dir / rec.image_path));
        CHECK(first.source_ids[k] + "_aug0" == rec.id);
        const auto& src = w.data.manifest.records[static_cast<std::size_t>(std::stoi(first.source_ids[k].substr(1)))];
        for (auto t : w.partition.tail) {
            if (src.labels.test(t)) CHECK(rec.labels.test(t));
        }
    }
    const auto reloaded = core::load_manifest(dir / "a" / "augmented.csv", w.data.manifest.registry);
    CHECK(reloaded.records == first.augmented.records);
}

TEST_CASE("multiplicity yields seed-varied copies") {
    World w(120, 11);
    core::ImageCache cache(64);
    synth::preload(cache, w.data);
    ScriptedCam cam(4, 64);
    cam::InpaintMask square(64, 64);
    for (int y = 20; y < 40; ++y)
        for (int x = 20; x < 40; ++x) square.set(y, x);
    cam.script({{0, square}, {1, square}, {2, square}});
    augment::OracleInpainter oracle(w.data.truth);
    augment::GenerationConfig cfg;
    cfg.multiplicity = 3;
    testing_support::TempDir dir("mult");
    const auto r = augment::run_generation(w.data.manifest, cache, cam, oracle, nullptr, w.partition, cfg, dir.path());
    std::size_t skipped = 0;
    for (const auto& [reason, n] : r.skip_counts) skipped += n;
    CHECK(r.emitted == 3 * (r.inputs - skipped));
    CHECK(augment::noise_seed_for(0, "s1", 0) != augment::noise_seed_for(0, "s1", 1));
    CHECK(augment::noise_seed_for(0, "s1", 0) != augment::noise_seed_for(1, "s1", 0));
}

TEST_CASE("empty manifest and unwritable output") {
    World w(10);
    core::ImageCache cache(64);
    ScriptedCam cam(4, 64);
    augment::OracleInpainter oracle(w.data.truth);
    core::Manifest empty;
    empty.registry = w.data.manifest.registry;
    testing_support::TempDir dir("empty");
    const auto r = augment::run_generation(empty, cache, cam, oracle, nullptr, w.partition, {}, dir / "out");
    CHECK(r.inputs == 0);
    CHECK(r.emitted == 0);
    CHECK(count_lines(dir / "out" / "provenance.jsonl") == 0);

    testing_support::write_file(dir / "blocker", "x");
    CHECK_THROWS_AS(augment::run_generation(w.data.manifest, cache, cam, oracle, nullptr, w.partition, {},
                                            dir / "blocker" / "out"),
                    IoError);
}
