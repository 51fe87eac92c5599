#include "tailaug/cam.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/core/image_io.hpp"
#include "tailaug/error.hpp"

namespace tailaug::cam {

bool ActivationMap::all_zero() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
}

InpaintMask InpaintMask::from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty() || rows.front().empty()) throw ArgumentError("mask rows must be nonempty");
    InpaintMask mask(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int y = 0; y < mask.height(); ++y) {
        if (rows[static_cast<std::size_t>(y)].size() != static_cast<std::size_t>(mask.width())) {
            throw ArgumentError("ragged mask rows");
        }
        for (int x = 0; x < mask.width(); ++x) mask.set(y, x, rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] != 0);
    }
    return mask;
}

std::size_t InpaintMask::popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

double InpaintMask::area_fraction() const {
    if (bits_.empty()) return 0.0;
    return static_cast<double>(popcount()) / static_cast<double>(bits_.size());
}

ActivationMap grad_cam(ClassifierHandle& classifier, const core::ImageTensor& image, core::ClassIndex class_id) {
    if (class_id < 0 || class_id >= classifier.num_classes()) {
        throw ArgumentError("grad_cam: class index " + std::to_string(class_id) + " out of range");
    }
    const auto layer = classifier.target_layer();
    if (!layer) {
        throw CapabilityError("grad_cam: classifier exposes no spatial target layer");
    }
    classifier.forward(image);
    const nn::Tensor activations = classifier.activations_at(*layer);
    const nn::Tensor gradients = classifier.gradients_at(*layer, class_id);
    if (!activations.same_shape(gradients) || activations.n() != 1) {
        throw CapabilityError("grad_cam: activation and gradient shapes disagree at " + *layer);
    }

    const int channels = activations.c();
    const int fh = activations.h();
    const int fw = activations.w();
    const std::size_t plane = activations.plane();

    std::vector<double> raw(plane, 0.0);
    for (int c = 0; c < channels; ++c) {
        const float* g = gradients.ptr(0, c, 0, 0);
        double weight = 0.0;
        for (std::size_t i = 0; i < plane; ++i) weight += g[i];
        weight /= static_cast<double>(plane);
        const float* a = activations.ptr(0, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) raw[i] += weight * a[i];
    }
    bool any_positive = false;
    for (double& v : raw) {
        v = v > 0.0 ? v : 0.0;
        any_positive = any_positive || v > 0.0;
    }

    ActivationMap map;
    map.height = image.height();
    map.width = image.width();
    map.source_class = class_id;
    map.values.assign(static_cast<std::size_t>(map.height) * map.width, 0.0f);
    if (!any_positive) return map;

    // Bilinear upsampling with half-pixel centers.
    std::vector<double> up(map.values.size());
    const double sy = static_cast<double>(fh) / map.height;
    const double sx = static_cast<double>(fw) / map.width;
    for (int y = 0; y < map.height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(fh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, fh - 1);
        const double wy = fy - y0;
        for (int x = 0; x < map.width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(fw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, fw - 1);
            const double wx = fx - x0;
            const auto r = [&](int yy, int xx) { return raw[static_cast<std::size_t>(yy) * fw + xx]; };
            up[static_cast<std::size_t>(y) * map.width + x] =
                (r(y0, x0) * (1 - wx) + r(y0, x1) * wx) * (1 - wy) + (r(y1, x0) * (1 - wx) + r(y1, x1) * wx) * wy;
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(up.begin(), up.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    for (std::size_t i = 0; i < up.size(); ++i) {
        // A constant positive map carries no localization; it is treated as full coverage.
        const double v = span > 0.0 ? (up[i] - lo) / span : 1.0;
        map.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return map;
}

InpaintMask cam_to_mask(const ActivationMap& map, double threshold, int dilation_radius) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ArgumentError("cam_to_mask: threshold must lie in [0,1]");
    }
    if (dilation_radius < 0) throw ArgumentError("cam_to_mask: dilation radius must be >= 0");
    InpaintMask seed(map.height, map.width);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) seed.set(y, x, map.at(y, x) >= threshold);
    if (dilation_radius == 0) return seed;

    // Separable square dilation: rows then columns.
    InpaintMask rows(map.height, map.width);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (!seed.at(y, x)) continue;
            for (int dx = std::max(0, x - dilation_radius); dx <= std::min(map.width - 1, x + dilation_radius); ++dx)
                rows.set(y, dx);
        }
    }
    InpaintMask out(map.height, map.width);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (!rows.at(y, x)) continue;
            for (int dy = std::max(0, y - dilation_radius); dy <= std::min(map.height - 1, y + dilation_radius); ++dy)
                out.set(dy, x);
        }
    }
    return out;
}

InpaintMask union_masks(const std::vector<InpaintMask>& masks) {
    if (masks.empty()) throw ArgumentError("union_masks: empty mask list");
    InpaintMask out = masks.front();
    for (std::size_t i = 1; i < masks.size(); ++i) {
        if (!masks[i].same_shape(out)) throw ArgumentError("union_masks: mask shapes differ");
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                if (masks[i].at(y, x)) out.set(y, x);
    }
    return out;
}

int scaled_dilation_radius(int radius_at_64, int image_size) {
    return static_cast<int>(std::lround(static_cast<double>(radius_at_64) * image_size / 64.0));
}

void write_cam_png(const std::filesystem::path& path, const ActivationMap& map) {
    core::write_png(path, core::ImageTensor::from_data(map.height, map.width, 1, map.values));
}

void write_mask_png(const std::filesystem::path& path, const InpaintMask& mask) {
    core::write_mask_png(path, mask.height(), mask.width(), mask.bits());
}

}  // namespace tailaug::cam
