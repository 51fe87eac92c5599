#pragma once

#include <string>

namespace testing_support {

/// A pipeline config small enough to run in seconds: a 300-sample world at
/// 64 px, a barely trained generator and a short classifier schedule.
inline std::string tiny_pipeline_config(std::uint64_t seed = 7) {
    return "seed = " + std::to_string(seed) + "\n" +
           "synth.num_samples = 300\n"
           "gen.timesteps = 10\n"
           "gen.epochs = 1\n"
           "gen.base_channels = 8\n"
           "train.epochs = 2\n"
           "ft.epochs = 2\n"
           "lkg.backend = matrix\n";
}

}  // namespace testing_support
