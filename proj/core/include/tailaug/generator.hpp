#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tailaug/cam.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/types.hpp"
#include "tailaug/nn/layers.hpp"

namespace tailaug::generator {

/// Linear beta schedule. The bounds are quoted for a 1000-step chain and
/// rescaled by 1000/timesteps, so short chains still end near pure noise.
struct DiffusionConfig {
    int image_size = 64;
    int timesteps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int train_epochs = 5;
    int batch_size = 8;
    double learning_rate = 1e-3;
    int base_channels = 16;

    void validate() const;
    std::string to_json() const;
    static DiffusionConfig from_json(const std::string& text);
};

struct NoiseSeed {
    std::uint64_t seed = 0;
};

/// Precomputed schedule terms indexed by timestep 0..T-1.
struct NoiseSchedule {
    std::vector<double> beta, alpha, alpha_bar;
    explicit NoiseSchedule(const DiffusionConfig& config);
};

/// Small U-shaped conv denoiser predicting the added noise. One full-resolution
/// encoder stage, one half-resolution middle, a skip-connected decoder.
/// Sinusoidal timestep features enter as extra input channels.
class Denoiser {
public:
    static constexpr int kTimeChannels = 4;

    Denoiser(int base_channels, std::uint64_t init_seed);

    /// x: N x 1 x H x W noisy images; t: per-sample timestep.
    nn::Tensor forward(const nn::Tensor& x, const std::vector<int>& t, int timesteps);
    void backward(const nn::Tensor& grad_output);
    std::vector<nn::Parameter*> parameters();

private:
    nn::Conv2d enc_, mid1_, mid2_, dec_, out_;
    nn::ReLU enc_act_, mid1_act_, mid2_act_, dec_act_;
    nn::AvgPool2 down_;
    nn::Upsample2 up_;
    int base_;
};

/// Trained normal-image generator. Immutable once built; sampling works on a
/// private copy of the network so a checkpoint can be shared across workers.
class GeneratorCheckpoint {
public:
    GeneratorCheckpoint(DiffusionConfig config, Denoiser net);

    const DiffusionConfig& config() const { return config_; }
    /// SHA-256 of config + weights.
    const std::string& generator_id() const { return id_; }
    Denoiser network() const { return net_; }

    void save(const std::filesystem::path& path) const;
    static GeneratorCheckpoint load(const std::filesystem::path& path);

private:
    DiffusionConfig config_;
    Denoiser net_;
    std::string id_;
};

struct GeneratorTrainLog {
    std::vector<double> epoch_mean_loss;
};

/// Trains the denoiser on normal images (all-zero labels) under the
/// noise-prediction objective. Deterministic for a fixed seed.
GeneratorCheckpoint train_normal_generator(const core::Manifest& normals, core::ImageCache& images,
                                           const DiffusionConfig& config, std::uint64_t seed,
                                           GeneratorTrainLog* log = nullptr,
                                           const std::function<void(int, double)>& on_epoch = {});

/// Full reverse trajectory from pure noise; output clamped to [0,1].
core::ImageTensor sample_unconditional(const GeneratorCheckpoint& ckpt, NoiseSeed seed);

/// Known-region replacement sampling: after every reverse step, unmasked
/// pixels are reset to the forward-noised original at the matching level,
/// and the final composite copies unmasked pixels from `image` exactly.
core::ImageTensor inpaint(const GeneratorCheckpoint& ckpt, const core::ImageTensor& image, const cam::InpaintMask& mask,
                          NoiseSeed seed);

}  // namespace tailaug::generator
