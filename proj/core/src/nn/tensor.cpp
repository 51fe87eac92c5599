#include "tailaug/nn/tensor.hpp"

#include <algorithm>

#include "tailaug/error.hpp"

namespace tailaug::nn {

Tensor::Tensor(int n, int c, int h, int w, float fill) : n_(n), c_(c), h_(h), w_(w) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0) {
        throw ArgumentError("tensor dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

std::string Tensor::shape_string() const {
    return std::to_string(n_) + "x" + std::to_string(c_) + "x" + std::to_string(h_) + "x" + std::to_string(w_);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw ArgumentError("concat_channels shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
    }
    Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t sa = a.c() * a.plane();
    const std::size_t sb = b.c() * b.plane();
    for (int n = 0; n < a.n(); ++n) {
        std::copy_n(a.sample(n), sa, out.sample(n));
        std::copy_n(b.sample(n), sb, out.sample(n) + sa);
    }
    return out;
}

void split_channels(const Tensor& joined, int channels_a, Tensor& a, Tensor& b) {
    a = Tensor(joined.n(), channels_a, joined.h(), joined.w());
    b = Tensor(joined.n(), joined.c() - channels_a, joined.h(), joined.w());
    const std::size_t sa = a.c() * a.plane();
    const std::size_t sb = b.c() * b.plane();
    for (int n = 0; n < joined.n(); ++n) {
        std::copy_n(joined.sample(n), sa, a.sample(n));
        std::copy_n(joined.sample(n) + sa, sb, b.sample(n));
    }
}

}  // namespace tailaug::nn
