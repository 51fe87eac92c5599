#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tailaug::core {

using ClassIndex = int;
using ClassSet = std::set<ClassIndex>;

/// Ordered, unique class names. Index <-> name is a bijection.
class ClassRegistry {
public:
    ClassRegistry() = default;
    explicit ClassRegistry(std::vector<std::string> names);

    /// The 13 chest X-ray lesion categories in the evaluation datasets' column order.
    static ClassRegistry cxr_profile();
    /// Abbreviations matching cxr_profile() order (EC, CA, LO, ...).
    static const std::vector<std::string>& cxr_abbreviations();

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(ClassIndex index) const;
    std::optional<ClassIndex> find(std::string_view name) const;
    /// Throws ArgumentError for unknown names.
    ClassIndex index_of(std::string_view name) const;
    bool contains(ClassIndex index) const { return index >= 0 && static_cast<std::size_t>(index) < names_.size(); }

    bool operator==(const ClassRegistry& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, ClassIndex> index_;
};

/// H x W x C floats in [0,1], interleaved channels (row-major, channel fastest).
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int height, int width, int channels, float fill = 0.0f);
    /// Validates shape and range; throws ArgumentError on violation.
    static ImageTensor from_data(int height, int width, int channels, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    bool empty() const { return data_.empty(); }

    float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
    float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    bool same_shape(const ImageTensor& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    /// Restores the [0,1] invariant after arithmetic on data().
    void clamp();
    /// Channel mean; returns a 1-channel image.
    ImageTensor to_gray() const;

    bool operator==(const ImageTensor& other) const = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

class LabelVector {
public:
    LabelVector() = default;
    explicit LabelVector(std::size_t num_classes) : flags_(num_classes, 0) {}
    static LabelVector from_set(std::size_t num_classes, const ClassSet& present);

    std::size_t size() const { return flags_.size(); }
    bool test(ClassIndex index) const { return flags_.at(static_cast<std::size_t>(index)) != 0; }
    void set(ClassIndex index, bool value = true) { flags_.at(static_cast<std::size_t>(index)) = value ? 1 : 0; }
    bool any() const;
    ClassSet positives() const;

    bool operator==(const LabelVector& other) const = default;

private:
    std::vector<std::uint8_t> flags_;
};

struct SampleRecord {
    std::string id;
    std::string image_path;
    LabelVector labels;

    bool operator==(const SampleRecord& other) const = default;
};

enum class SplitTag { train, test, augmented };

std::string_view to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view text);

/// A labeled set of records sharing one registry. Holds both the original
/// training set and inpainting-generated sets.
struct Manifest {
    ClassRegistry registry;
    std::vector<SampleRecord> records;
    SplitTag split = SplitTag::train;
    /// Directory relative image paths resolve against.
    std::filesystem::path base_dir;
    /// Ids whose image file could not be found at load time.
    std::vector<std::string> unresolved;

    std::filesystem::path resolve(const SampleRecord& record) const;

    /// Equality over content (registry, records, split); paths are not compared.
    bool operator==(const Manifest& other) const {
        return registry == other.registry && records == other.records && split == other.split;
    }
};

/// Lineage of one synthesized sample.
struct ProvenanceRecord {
    std::string source_id;
    ClassSet inpainted_classes;
    ClassSet retained_head_classes;
    double mask_area_fraction = 0.0;
    std::string generator_id;
    std::uint64_t noise_seed = 0;
    double cam_threshold = 0.0;

    /// Throws ValidationError if inpainted and retained intersect or the area fraction leaves [0,1].
    void validate() const;
};

}  // namespace tailaug::core
