#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailaug/core/types.hpp"
#include "tailaug/nn/tensor.hpp"

namespace tailaug::cam {

/// A classifier Grad-CAM can hook. Implementations keep the state of the most
/// recent forward pass, so one handle serves one worker at a time.
class ClassifierHandle {
public:
    virtual ~ClassifierHandle() = default;

    virtual int num_classes() const = 0;
    /// Per-class logits for one image; caches activations for the hooks below.
    virtual std::vector<float> forward(const core::ImageTensor& image) = 0;
    /// Name of the spatial feature map Grad-CAM reads, if the model has one.
    virtual std::optional<std::string> target_layer() const = 0;
    /// 1 x C x h x w activations recorded by the last forward().
    virtual nn::Tensor activations_at(const std::string& layer) const = 0;
    /// d logit[class_id] / d activations at `layer`, for the last forward().
    virtual nn::Tensor gradients_at(const std::string& layer, core::ClassIndex class_id) = 0;
};

struct ActivationMap {
    int height = 0;
    int width = 0;
    std::vector<float> values;  // row-major, each in [0,1]
    core::ClassIndex source_class = 0;

    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool all_zero() const;
};

class InpaintMask {
public:
    InpaintMask() = default;
    InpaintMask(int height, int width, bool fill = false)
        : height_(height), width_(width), bits_(static_cast<std::size_t>(height) * width, fill) {}
    static InpaintMask from_rows(const std::vector<std::vector<int>>& rows);

    int height() const { return height_; }
    int width() const { return width_; }
    bool at(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int y, int x, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v; }
    const std::vector<bool>& bits() const { return bits_; }

    std::size_t popcount() const;
    /// popcount / (H * W).
    double area_fraction() const;
    bool same_shape(const InpaintMask& o) const { return height_ == o.height_ && width_ == o.width_; }
    bool matches(const core::ImageTensor& image) const {
        return height_ == image.height() && width_ == image.width();
    }

    bool operator==(const InpaintMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<bool> bits_;
};

/// Gradient-weighted class activation map at the handle's target layer,
/// bilinearly upsampled to the image size and min-max normalized.
/// An identically zero rectified map is returned as all zeros.
ActivationMap grad_cam(ClassifierHandle& classifier, const core::ImageTensor& image, core::ClassIndex class_id);

/// Thresholds (value >= threshold) then dilates with a (2r+1)^2 square.
InpaintMask cam_to_mask(const ActivationMap& map, double threshold, int dilation_radius);

InpaintMask union_masks(const std::vector<InpaintMask>& masks);

/// Dilation radius for a working resolution, scaled from `radius_at_64` at 64 px.
int scaled_dilation_radius(int radius_at_64, int image_size);

void write_cam_png(const std::filesystem::path& path, const ActivationMap& map);
void write_mask_png(const std::filesystem::path& path, const InpaintMask& mask);

}  // namespace tailaug::cam
