#pragma once

#include <map>

#include "tailaug/cam.hpp"
#include "tailaug/synth.hpp"

namespace testing_support {

/// Classifier whose Grad-CAM for class k is exactly a scripted map: the
/// target layer holds one channel per class and d logit_k / d A is the
/// indicator of channel k.
class ScriptedCam final : public tailaug::cam::ClassifierHandle {
public:
    ScriptedCam(int num_classes, int size) : k_(num_classes), size_(size) {}

    /// Maps keyed by class; absent classes get an all-zero channel.
    void script(std::map<tailaug::core::ClassIndex, tailaug::cam::InpaintMask> maps) { maps_ = std::move(maps); }

    /// Uses the ground-truth lesion masks of `truth` as the maps.
    void script_truth(const tailaug::synth::SampleTruth& truth) { maps_ = truth.lesion_masks; }

    int num_classes() const override { return k_; }
    std::vector<float> forward(const tailaug::core::ImageTensor&) override { return std::vector<float>(static_cast<std::size_t>(k_), 0.0f); }
    std::optional<std::string> target_layer() const override { return "scripted"; }

    tailaug::nn::Tensor activations_at(const std::string&) const override {
        tailaug::nn::Tensor t(1, k_, size_, size_);
        for (const auto& [k, m] : maps_)
            for (int y = 0; y < size_; ++y)
                for (int x = 0; x < size_; ++x) *t.ptr(0, k, y, x) = m.at(y, x) ? 1.0f : 0.0f;
        return t;
    }

    tailaug::nn::Tensor gradients_at(const std::string&, tailaug::core::ClassIndex class_id) override {
        tailaug::nn::Tensor t(1, k_, size_, size_);
        for (int y = 0; y < size_; ++y)
            for (int x = 0; x < size_; ++x) *t.ptr(0, class_id, y, x) = 1.0f;
        return t;
    }

private:
    int k_;
    int size_;
    std::map<tailaug::core::ClassIndex, tailaug::cam::InpaintMask> maps_;
};

}  // namespace testing_support
