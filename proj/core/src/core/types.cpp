#include "tailaug/core/types.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/error.hpp"

namespace tailaug::core {

ClassRegistry::ClassRegistry(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
        throw ArgumentError("class registry needs at least 2 classes, got " + std::to_string(names_.size()));
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) {
            throw ArgumentError("class registry entry " + std::to_string(i) + " is empty");
        }
        auto [it, inserted] = index_.emplace(names_[i], static_cast<ClassIndex>(i));
        if (!inserted) {
            throw ArgumentError("duplicate class name in registry: " + names_[i]);
        }
    }
}

ClassRegistry ClassRegistry::cxr_profile() {
    return ClassRegistry({
        "Enlarged Cardiomediastinum", "Cardiomegaly", "Lung Opacity", "Lung Lesion", "Edema",
        "Consolidation", "Pneumonia", "Atelectasis", "Pneumothorax", "Pleural Effusion",
        "Pleural Other", "Fracture", "Support Devices",
    });
}

const std::vector<std::string>& ClassRegistry::cxr_abbreviations() {
    static const std::vector<std::string> abbreviations = {
        "EC", "CA", "LO", "LL", "ED", "CO", "PA", "AT", "PX", "PE", "PO", "FE", "SS",
    };
    return abbreviations;
}

const std::string& ClassRegistry::name(ClassIndex index) const {
    if (!contains(index)) {
        throw ArgumentError("class index out of range: " + std::to_string(index));
    }
    return names_[static_cast<std::size_t>(index)];
}

std::optional<ClassIndex> ClassRegistry::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

ClassIndex ClassRegistry::index_of(std::string_view name) const {
    if (auto index = find(name)) return *index;
    throw ArgumentError("unknown class name: " + std::string(name));
}

ImageTensor::ImageTensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw ArgumentError("image dimensions must be positive");
    }
    if (!(fill >= 0.0f && fill <= 1.0f)) {
        throw ArgumentError("image fill value outside [0,1]");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageTensor ImageTensor::from_data(int height, int width, int channels, std::vector<float> data) {
    ImageTensor image(height, width, channels);
    if (data.size() != image.data_.size()) {
        throw ArgumentError("image data length " + std::to_string(data.size()) + " does not match " +
                            std::to_string(height) + "x" + std::to_string(width) + "x" +
                            std::to_string(channels));
    }
    for (float v : data) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ArgumentError("image value outside [0,1]");
        }
    }
    image.data_ = std::move(data);
    return image;
}

void ImageTensor::clamp() {
    for (float& v : data_) {
        v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    }
}

ImageTensor ImageTensor::to_gray() const {
    if (channels_ == 1) return *this;
    ImageTensor gray(height_, width_, 1);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            float sum = 0.0f;
            for (int c = 0; c < channels_; ++c) sum += at(y, x, c);
            gray.at(y, x) = sum / static_cast<float>(channels_);
        }
    }
    return gray;
}

LabelVector LabelVector::from_set(std::size_t num_classes, const ClassSet& present) {
    LabelVector labels(num_classes);
    for (ClassIndex c : present) labels.set(c);
    return labels;
}

bool LabelVector::any() const {
    return std::any_of(flags_.begin(), flags_.end(), [](std::uint8_t f) { return f != 0; });
}

ClassSet LabelVector::positives() const {
    ClassSet out;
    for (std::size_t i = 0; i < flags_.size(); ++i) {
        if (flags_[i]) out.insert(static_cast<ClassIndex>(i));
    }
    return out;
}

std::string_view to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
        case SplitTag::augmented: return "augmented";
    }
    return "train";
}

SplitTag split_tag_from_string(std::string_view text) {
    if (text == "train") return SplitTag::train;
    if (text == "test") return SplitTag::test;
    if (text == "augmented") return SplitTag::augmented;
    throw ArgumentError("unknown split tag: " + std::string(text));
}

std::filesystem::path Manifest::resolve(const SampleRecord& record) const {
    std::filesystem::path p(record.image_path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

void ProvenanceRecord::validate() const {
    for (ClassIndex c : inpainted_classes) {
        if (retained_head_classes.count(c)) {
            throw ValidationError("provenance for " + source_id + ": class " + std::to_string(c) +
                                  " is both inpainted and retained");
        }
    }
    if (!(mask_area_fraction >= 0.0 && mask_area_fraction <= 1.0)) {
        throw ValidationError("provenance for " + source_id + ": mask area fraction outside [0,1]");
    }
}

}  // namespace tailaug::core
