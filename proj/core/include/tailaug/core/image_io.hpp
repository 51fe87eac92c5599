#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tailaug/core/types.hpp"

namespace tailaug::core {

/// Decodes an 8-bit grayscale or RGB(A) PNG; samples are divided by 255.
/// Alpha is dropped.
ImageTensor read_png(const std::filesystem::path& path);

/// Writes 1- or 3-channel images as 8-bit PNG, quantizing with round(v * 255).
void write_png(const std::filesystem::path& path, const ImageTensor& image);

/// Writes a boolean H x W grid as a 1-bit grayscale PNG.
void write_mask_png(const std::filesystem::path& path, int height, int width,
                    const std::vector<bool>& bits);

/// Reads a 1-bit (or any-depth) grayscale PNG as a boolean grid (nonzero -> true).
std::vector<bool> read_mask_png(const std::filesystem::path& path, int& height, int& width);

/// Bilinear resize (half-pixel centers), per channel.
ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

/// Loads images once and hands out single-channel tensors at a fixed working size.
class ImageCache {
public:
    explicit ImageCache(int working_size) : working_size_(working_size) {}

    const ImageTensor& get(const std::filesystem::path& path);
    /// Seeds the cache with an in-memory image (used for generated data).
    void put(const std::filesystem::path& path, ImageTensor image);
    int working_size() const { return working_size_; }

private:
    ImageTensor normalize(ImageTensor image) const;

    int working_size_;
    std::map<std::string, ImageTensor> images_;
};

}  // namespace tailaug::core
