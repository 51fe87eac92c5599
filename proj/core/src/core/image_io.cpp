#include "tailaug/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "tailaug/error.hpp"

namespace tailaug::core {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

RawPng decode(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw LoadError("cannot open image: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("libpng initialization failed");
    }
    RawPng raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    raw.pixels.resize(rowbytes * static_cast<std::size_t>(raw.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) rows[static_cast<std::size_t>(y)] = raw.pixels.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
            const std::vector<std::uint8_t>& packed, std::size_t rowbytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write image: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed encoding PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(packed.data() + rowbytes * static_cast<std::size_t>(y)));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
    RawPng raw = decode(path);
    std::vector<float> data(raw.pixels.size());
    std::transform(raw.pixels.begin(), raw.pixels.end(), data.begin(),
                   [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    return ImageTensor::from_data(raw.height, raw.width, raw.channels, std::move(data));
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw ArgumentError("write_png supports 1 or 3 channels");
    }
    std::vector<std::uint8_t> packed(image.data().size());
    std::transform(image.data().begin(), image.data().end(), packed.begin(), [](float v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    });
    const int color = image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    encode(path, image.width(), image.height(), color, 8, packed,
           static_cast<std::size_t>(image.width()) * image.channels());
}

void write_mask_png(const std::filesystem::path& path, int height, int width, const std::vector<bool>& bits) {
    if (bits.size() != static_cast<std::size_t>(height) * width) {
        throw ArgumentError("mask size does not match dimensions");
    }
    const std::size_t rowbytes = (static_cast<std::size_t>(width) + 7) / 8;
    std::vector<std::uint8_t> packed(rowbytes * static_cast<std::size_t>(height), 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (bits[static_cast<std::size_t>(y) * width + x]) {
                packed[rowbytes * y + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
            }
        }
    }
    encode(path, width, height, PNG_COLOR_TYPE_GRAY, 1, packed, rowbytes);
}

std::vector<bool> read_mask_png(const std::filesystem::path& path, int& height, int& width) {
    RawPng raw = decode(path);
    height = raw.height;
    width = raw.width;
    std::vector<bool> bits(static_cast<std::size_t>(height) * width);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bits[i] = raw.pixels[i * static_cast<std::size_t>(raw.channels)] != 0;
    }
    return bits;
}

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width) {
    if (image.height() == height && image.width() == width) return image;
    ImageTensor out(height, width, image.channels());
    const double sy = static_cast<double>(image.height()) / height;
    const double sx = static_cast<double>(image.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
                const double bottom = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
                out.at(y, x, c) = static_cast<float>(top * (1 - wy) + bottom * wy);
            }
        }
    }
    out.clamp();
    return out;
}

ImageTensor ImageCache::normalize(ImageTensor image) const {
    image = image.to_gray();
    return resize_bilinear(image, working_size_, working_size_);
}

const ImageTensor& ImageCache::get(const std::filesystem::path& path) {
    const std::string key = path.lexically_normal().string();
    auto it = images_.find(key);
    if (it == images_.end()) {
        it = images_.emplace(key, normalize(read_png(path))).first;
    }
    return it->second;
}

void ImageCache::put(const std::filesystem::path& path, ImageTensor image) {
    images_.insert_or_assign(path.lexically_normal().string(), normalize(std::move(image)));
}

}  // namespace tailaug::core
