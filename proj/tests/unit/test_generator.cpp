#include <cmath>

#include "doctest.h"
#include "support/temp_dir.hpp"
#include "support/toy_world.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/generator.hpp"

using namespace tailaug;

namespace {

const testing_support::ToyGenerator& toy() {
    static const auto g = testing_support::train_toy_generator();
    return g;
}

cam::InpaintMask random_mask(int size, double p, std::uint64_t seed) {
    core::CounterRng rng(seed);
    cam::InpaintMask m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) m.set(y, x, rng.bernoulli(p));
    return m;
}

}  // namespace

TEST_CASE("diffusion config validation") {
    generator::DiffusionConfig c;
    c.timesteps = 0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    c.image_size = 20;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    CHECK(generator::DiffusionConfig::from_json(c.to_json()).timesteps == c.timesteps);
}

TEST_CASE("noise schedule is monotone and ends near pure noise") {
    for (int T : {10, 50, 200, 1000}) {
        generator::DiffusionConfig c;
        c.timesteps = T;
        const generator::NoiseSchedule s(c);
        REQUIRE(s.alpha_bar.size() == static_cast<std::size_t>(T));
        for (int t = 1; t < T; ++t) CHECK(s.alpha_bar[static_cast<std::size_t>(t)] < s.alpha_bar[static_cast<std::size_t>(t - 1)]);
        CHECK(s.alpha_bar.front() < 1.0);
        CHECK(s.alpha_bar.back() < 0.01);
        for (std::size_t t = 0; t < s.beta.size(); ++t) CHECK(s.alpha[t] == doctest::Approx(1.0 - s.beta[t]));
    }
}

TEST_CASE("generator training loss goes down") {
    const auto& log = toy().log.epoch_mean_loss;
    REQUIRE(log.size() >= 2);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < 3; ++i) head += log[i];
    for (std::size_t i = log.size() - 3; i < log.size(); ++i) tail += log[i];
    CHECK(tail < head);
}

TEST_CASE("generator rejects abnormal or empty training sets") {
    auto data = synth::generate_synthetic_dataset(testing_support::small_world({0.9, 0.0}, 10, 3));
    core::ImageCache cache(16);
    synth::preload(cache, data);
    generator::DiffusionConfig cfg;
    cfg.image_size = 16;
    cfg.timesteps = 5;
    cfg.train_epochs = 1;
    CHECK_THROWS_AS(generator::train_normal_generator(data.manifest, cache, cfg, 0), ContaminationError);
    core::Manifest empty;
    empty.registry = data.manifest.registry;
    CHECK_THROWS_AS(generator::train_normal_generator(empty, cache, cfg, 0), ArgumentError);
}

TEST_CASE("generator checkpoints reload to identical samples") {
    testing_support::TempDir dir("gen");
    toy().ckpt.save(dir / "g.ckpt");
    const auto back = generator::GeneratorCheckpoint::load(dir / "g.ckpt");
    CHECK(back.generator_id() == toy().ckpt.generator_id());
    CHECK(generator::sample_unconditional(back, {5}) == generator::sample_unconditional(toy().ckpt, {5}));
    CHECK(generator::sample_unconditional(back, {5}) != generator::sample_unconditional(back, {6}));

    // Flip one weight byte: the stored id no longer matches the content.
    auto bytes = testing_support::read_file(dir / "g.ckpt");
    bytes[bytes.size() - 3] ^= 0x40;
    testing_support::write_file(dir / "bad.ckpt", bytes);
    CHECK_THROWS(generator::GeneratorCheckpoint::load(dir / "bad.ckpt"));
}

TEST_CASE("inpainting keeps unmasked pixels, empty mask is identity, full mask is unconditional") {
    const auto& g = toy();
    const auto& image = g.data.images[3];
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto mask = random_mask(16, 0.3, s);
        const auto out = generator::inpaint(g.ckpt, image, mask, {s});
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                if (!mask.at(y, x)) CHECK(out.at(y, x) == image.at(y, x));
            }
    }
    CHECK(generator::inpaint(g.ckpt, image, cam::InpaintMask(16, 16), {9}) == image);
    CHECK(generator::inpaint(g.ckpt, image, cam::InpaintMask(16, 16, true), {9}) ==
          generator::sample_unconditional(g.ckpt, {9}));
    CHECK_THROWS_AS(generator::inpaint(g.ckpt, image, cam::InpaintMask(8, 8), {1}), ArgumentError);
}

TEST_CASE("samples match the training intensity level") {
    const auto& g = toy();
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint64_t s = 0; s < 64; ++s) {
        const auto img = generator::sample_unconditional(g.ckpt, {s});
        for (float v : img.data()) sum += v;
        n += img.data().size();
    }
    const double mean = sum / static_cast<double>(n);
    MESSAGE("train mean " << g.train_mean << ", sample mean " << mean);
    CHECK(std::abs(mean - g.train_mean) <= 0.1);
}
