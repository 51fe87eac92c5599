#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tailaug/core/manifest.hpp"
#include "tailaug/generator.hpp"
#include "tailaug/synth.hpp"

namespace testing_support {

/// 16 px world with small lesions; frequencies of zero give all-normal images.
inline tailaug::synth::SynthWorldConfig small_world(std::vector<double> frequencies, int samples, std::uint64_t seed) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < frequencies.size(); ++i) names.push_back("K" + std::to_string(i));
    auto world = tailaug::synth::SynthWorldConfig::with_classes(names, std::move(frequencies));
    world.image_size = 16;
    for (auto& lesion : world.lesions) {
        lesion.min_radius = 2.0;
        lesion.max_radius = 3.0;
    }
    world.num_samples = samples;
    world.seed = seed;
    return world;
}

struct ToyGenerator {
    tailaug::synth::SynthDataset data;
    tailaug::generator::GeneratorCheckpoint ckpt;
    tailaug::generator::GeneratorTrainLog log;
    double train_mean = 0.0;
};

/// Small diffusion model trained on 16 px normal images.
inline ToyGenerator train_toy_generator(std::uint64_t seed = 1, int epochs = 40) {
    auto data = tailaug::synth::generate_synthetic_dataset(small_world({0.0, 0.0}, 96, seed));
    tailaug::core::ImageCache cache(16);
    tailaug::synth::preload(cache, data);
    tailaug::generator::DiffusionConfig cfg;
    cfg.image_size = 16;
    cfg.timesteps = 40;
    cfg.base_channels = 8;
    cfg.train_epochs = epochs;
    cfg.batch_size = 16;
    cfg.learning_rate = 3e-3;
    tailaug::generator::GeneratorTrainLog log;
    auto ckpt = tailaug::generator::train_normal_generator(data.manifest, cache, cfg, seed, &log);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& img : data.images) {
        for (float v : img.data()) sum += v;
        n += img.data().size();
    }
    return {std::move(data), std::move(ckpt), std::move(log), sum / static_cast<double>(n)};
}

}  // namespace testing_support
