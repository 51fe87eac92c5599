#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tailaug::nn {

/// Dense NCHW float tensor.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, float fill = 0.0f);

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h_) * w_; }
    bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    float& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
    float at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }
    float* ptr(int n, int c, int y = 0, int x = 0) { return data_.data() + offset(n, c, y, x); }
    const float* ptr(int n, int c, int y = 0, int x = 0) const { return data_.data() + offset(n, c, y, x); }

    /// Pointer to the start of sample n.
    float* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * c_ * plane(); }
    const float* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * c_ * plane(); }

    std::string shape_string() const;

private:
    std::size_t offset(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
    }

    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

/// Concatenates along channels; both inputs must agree on n, h, w.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Inverse of concat_channels for gradients: splits off the first `channels_a` channels.
void split_channels(const Tensor& joined, int channels_a, Tensor& a, Tensor& b);

}  // namespace tailaug::nn
