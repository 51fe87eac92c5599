#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailaug/cam.hpp"
#include "tailaug/nn/layers.hpp"

namespace tailaug::classifier {

/// Small pluggable CNN: 3x3 conv + ReLU stages, 2x max-pool after each of the
/// first `pooled_stages` stages, global average pool, linear head.
struct CnnConfig {
    int image_size = 64;
    int num_classes = 2;
    std::vector<int> channels = {8, 16, 16, 32};
    int pooled_stages = 2;
    std::uint64_t init_seed = 1;

    std::string to_json() const;
    static CnnConfig from_json(const std::string& text);
};

/// Conv feature extractor + GAP + linear head. The target layer for CAM is
/// the output of the last feature stage.
class ConvClassifier final : public cam::ClassifierHandle {
public:
    static constexpr const char* kTargetLayer = "features.out";

    /// Builds the SmallCnn architecture described by `config`.
    explicit ConvClassifier(const CnnConfig& config);
    /// Wraps an arbitrary feature extractor ending in `feature_channels` maps.
    ConvClassifier(nn::Sequential features, int feature_channels, int num_classes, std::uint64_t init_seed);

    ConvClassifier(ConvClassifier&&) = default;
    ConvClassifier& operator=(ConvClassifier&&) = default;

    // Batch interface used by training: images N x 1 x H x W -> logits N x K x 1 x 1.
    nn::Tensor forward_batch(const nn::Tensor& images);
    void backward_batch(const nn::Tensor& grad_logits);
    std::vector<nn::Parameter*> parameters();

    // cam::ClassifierHandle
    int num_classes() const override { return num_classes_; }
    std::vector<float> forward(const core::ImageTensor& image) override;
    std::optional<std::string> target_layer() const override { return std::string(kTargetLayer); }
    nn::Tensor activations_at(const std::string& layer) const override;
    nn::Tensor gradients_at(const std::string& layer, core::ClassIndex class_id) override;

    nn::Sequential& features() { return features_; }
    nn::Linear& head() { return head_; }
    const std::optional<CnnConfig>& config() const { return config_; }

    void save(const std::filesystem::path& path);
    static ConvClassifier load(const std::filesystem::path& path);
    /// Content hash of config + weights.
    std::string checkpoint_id();

private:
    std::optional<CnnConfig> config_;
    nn::Sequential features_;
    nn::GlobalAvgPool gap_;
    nn::Linear head_;
    int num_classes_;
    nn::Tensor last_features_;
};

/// Converts single-channel images to an N x 1 x H x W batch.
nn::Tensor stack_images(const std::vector<const core::ImageTensor*>& images);

}  // namespace tailaug::classifier
