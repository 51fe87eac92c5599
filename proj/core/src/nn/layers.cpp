#include "tailaug/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void he_uniform(std::vector<float>& values, int fan_in, std::uint64_t seed) {
    core::CounterRng rng(seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, std::uint64_t init_seed)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      weight_("weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_("bias", static_cast<std::size_t>(out_channels)) {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || kernel % 2 == 0) {
        throw ArgumentError("conv2d needs positive channels and an odd kernel");
    }
    he_uniform(weight_.value, in_channels * kernel * kernel, init_seed);
}

Tensor Conv2d::forward(const Tensor& input) {
    if (input.c() != in_) {
        throw ArgumentError("conv2d expected " + std::to_string(in_) + " channels, got " + input.shape_string());
    }
    n_ = input.n();
    h_ = input.h();
    w_ = input.w();
    const int pad = kernel_ / 2;
    const std::size_t hw = input.plane();
    const std::size_t cols = static_cast<std::size_t>(n_) * hw;
    const std::size_t rows = static_cast<std::size_t>(in_) * kernel_ * kernel_;
    columns_.assign(rows * cols, 0.0f);

    for (int s = 0; s < n_; ++s) {
        for (int c = 0; c < in_; ++c) {
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx) {
                    const std::size_t r = (static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx;
                    float* dst = columns_.data() + r * cols + s * hw;
                    for (int y = 0; y < h_; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= h_) continue;
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(w_, w_ + pad - kx);
                        const float* src = input.ptr(s, c, sy, 0);
                        for (int x = x_lo; x < x_hi; ++x) dst[y * w_ + x] = src[x + kx - pad];
                    }
                }
            }
        }
    }

    RowMatrix result(out_, static_cast<Eigen::Index>(cols));
    result.noalias() = ConstMatrixMap(weight_.value.data(), out_, static_cast<Eigen::Index>(rows)) *
                       ConstMatrixMap(columns_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));

    Tensor output(n_, out_, h_, w_);
    for (int s = 0; s < n_; ++s) {
        for (int o = 0; o < out_; ++o) {
            const float b = bias_.value[static_cast<std::size_t>(o)];
            const float* src = result.data() + static_cast<std::size_t>(o) * cols + s * hw;
            float* dst = output.ptr(s, o, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + b;
        }
    }
    return output;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
    if (grad_output.n() != n_ || grad_output.c() != out_ || grad_output.h() != h_ || grad_output.w() != w_) {
        throw ArgumentError("conv2d backward shape mismatch: " + grad_output.shape_string());
    }
    const int pad = kernel_ / 2;
    const std::size_t hw = grad_output.plane();
    const std::size_t cols = static_cast<std::size_t>(n_) * hw;
    const std::size_t rows = static_cast<std::size_t>(in_) * kernel_ * kernel_;

    RowMatrix dy(out_, static_cast<Eigen::Index>(cols));
    for (int s = 0; s < n_; ++s) {
        for (int o = 0; o < out_; ++o) {
            const float* src = grad_output.ptr(s, o, 0, 0);
            std::copy_n(src, hw, dy.data() + static_cast<std::size_t>(o) * cols + s * hw);
        }
    }
    ConstMatrixMap col_map(columns_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    MatrixMap(weight_.grad.data(), out_, static_cast<Eigen::Index>(rows)).noalias() += dy * col_map.transpose();
    for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += dy.row(o).sum();

    RowMatrix dcols(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    dcols.noalias() = ConstMatrixMap(weight_.value.data(), out_, static_cast<Eigen::Index>(rows)).transpose() * dy;

    Tensor grad_input(n_, in_, h_, w_);
    for (int s = 0; s < n_; ++s) {
        for (int c = 0; c < in_; ++c) {
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx) {
                    const std::size_t r = (static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx;
                    const float* src = dcols.data() + r * cols + s * hw;
                    for (int y = 0; y < h_; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= h_) continue;
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(w_, w_ + pad - kx);
                        float* dst = grad_input.ptr(s, c, sy, 0);
                        for (int x = x_lo; x < x_hi; ++x) dst[x + kx - pad] += src[y * w_ + x];
                    }
                }
            }
        }
    }
    return grad_input;
}

Tensor Affine::forward(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.values()) v = (v - shift_) * scale_;
    return out;
}

Tensor Affine::backward(const Tensor& grad_output) {
    Tensor grad = grad_output;
    for (float& v : grad.values()) v *= scale_;
    return grad;
}

Tensor ReLU::forward(const Tensor& input) {
    output_ = input;
    for (float& v : output_.values()) v = v > 0.0f ? v : 0.0f;
    return output_;
}

Tensor ReLU::backward(const Tensor& grad_output) {
    Tensor grad = grad_output;
    auto out = output_.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (out[i] <= 0.0f) g[i] = 0.0f;
    }
    return grad;
}

Tensor MaxPool2::forward(const Tensor& input) {
    if (input.h() % 2 || input.w() % 2) throw ArgumentError("maxpool2 needs even spatial dims");
    in_h_ = input.h();
    in_w_ = input.w();
    Tensor out(input.n(), input.c(), in_h_ / 2, in_w_ / 2);
    argmax_.assign(out.size(), 0);
    std::size_t idx = 0;
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < out.h(); ++y) {
                for (int x = 0; x < out.w(); ++x, ++idx) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::uint32_t best_i = 0;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const float v = input.at(n, c, 2 * y + dy, 2 * x + dx);
                            if (v > best) {
                                best = v;
                                best_i = static_cast<std::uint32_t>(dy * 2 + dx);
                            }
                        }
                    }
                    out.values()[idx] = best;
                    argmax_[idx] = best_i;
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2::backward(const Tensor& grad_output) {
    Tensor grad(grad_output.n(), grad_output.c(), in_h_, in_w_);
    std::size_t idx = 0;
    for (int n = 0; n < grad_output.n(); ++n) {
        for (int c = 0; c < grad_output.c(); ++c) {
            for (int y = 0; y < grad_output.h(); ++y) {
                for (int x = 0; x < grad_output.w(); ++x, ++idx) {
                    const auto a = argmax_[idx];
                    grad.at(n, c, 2 * y + static_cast<int>(a / 2), 2 * x + static_cast<int>(a % 2)) +=
                        grad_output.values()[idx];
                }
            }
        }
    }
    return grad;
}

Tensor AvgPool2::forward(const Tensor& input) {
    if (input.h() % 2 || input.w() % 2) throw ArgumentError("avgpool2 needs even spatial dims");
    in_h_ = input.h();
    in_w_ = input.w();
    Tensor out(input.n(), input.c(), in_h_ / 2, in_w_ / 2);
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c)
            for (int y = 0; y < out.h(); ++y)
                for (int x = 0; x < out.w(); ++x)
                    out.at(n, c, y, x) = 0.25f * (input.at(n, c, 2 * y, 2 * x) + input.at(n, c, 2 * y, 2 * x + 1) +
                                                  input.at(n, c, 2 * y + 1, 2 * x) +
                                                  input.at(n, c, 2 * y + 1, 2 * x + 1));
    return out;
}

Tensor AvgPool2::backward(const Tensor& grad_output) {
    Tensor grad(grad_output.n(), grad_output.c(), in_h_, in_w_);
    for (int n = 0; n < grad.n(); ++n)
        for (int c = 0; c < grad.c(); ++c)
            for (int y = 0; y < in_h_; ++y)
                for (int x = 0; x < in_w_; ++x) grad.at(n, c, y, x) = 0.25f * grad_output.at(n, c, y / 2, x / 2);
    return grad;
}

Tensor Upsample2::forward(const Tensor& input) {
    Tensor out(input.n(), input.c(), input.h() * 2, input.w() * 2);
    for (int n = 0; n < out.n(); ++n)
        for (int c = 0; c < out.c(); ++c)
            for (int y = 0; y < out.h(); ++y)
                for (int x = 0; x < out.w(); ++x) out.at(n, c, y, x) = input.at(n, c, y / 2, x / 2);
    return out;
}

Tensor Upsample2::backward(const Tensor& grad_output) {
    Tensor grad(grad_output.n(), grad_output.c(), grad_output.h() / 2, grad_output.w() / 2);
    for (int n = 0; n < grad_output.n(); ++n)
        for (int c = 0; c < grad_output.c(); ++c)
            for (int y = 0; y < grad_output.h(); ++y)
                for (int x = 0; x < grad_output.w(); ++x) grad.at(n, c, y / 2, x / 2) += grad_output.at(n, c, y, x);
    return grad;
}

Tensor GlobalAvgPool::forward(const Tensor& input) {
    h_ = input.h();
    w_ = input.w();
    Tensor out(input.n(), input.c(), 1, 1);
    const std::size_t hw = input.plane();
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            const float* p = input.ptr(n, c, 0, 0);
            double sum = 0.0;
            for (std::size_t i = 0; i < hw; ++i) sum += p[i];
            out.at(n, c, 0, 0) = static_cast<float>(sum / static_cast<double>(hw));
        }
    }
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_output) {
    Tensor grad(grad_output.n(), grad_output.c(), h_, w_);
    const float scale = 1.0f / static_cast<float>(h_ * w_);
    for (int n = 0; n < grad.n(); ++n) {
        for (int c = 0; c < grad.c(); ++c) {
            const float g = grad_output.at(n, c, 0, 0) * scale;
            float* p = grad.ptr(n, c, 0, 0);
            std::fill_n(p, grad.plane(), g);
        }
    }
    return grad;
}

Linear::Linear(int in_features, int out_features, std::uint64_t init_seed)
    : in_(in_features),
      out_(out_features),
      weight_("weight", static_cast<std::size_t>(in_features) * out_features),
      bias_("bias", static_cast<std::size_t>(out_features)) {
    if (in_features <= 0 || out_features <= 0) throw ArgumentError("linear needs positive sizes");
    core::CounterRng rng(init_seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    for (float& v : weight_.value) v = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Linear::forward(const Tensor& input) {
    if (static_cast<std::size_t>(input.c()) * input.plane() != static_cast<std::size_t>(in_)) {
        throw ArgumentError("linear expected " + std::to_string(in_) + " features, got " + input.shape_string());
    }
    input_ = input;
    Tensor out(input.n(), out_, 1, 1);
    ConstMatrixMap x(input.data(), input.n(), in_);
    ConstMatrixMap w(weight_.value.data(), out_, in_);
    MatrixMap y(out.data(), input.n(), out_);
    y.noalias() = x * w.transpose();
    for (int n = 0; n < input.n(); ++n)
        for (int o = 0; o < out_; ++o) y(n, o) += bias_.value[static_cast<std::size_t>(o)];
    return out;
}

Tensor Linear::backward(const Tensor& grad_output) {
    const int n = grad_output.n();
    ConstMatrixMap dy(grad_output.data(), n, out_);
    ConstMatrixMap x(input_.data(), n, in_);
    MatrixMap(weight_.grad.data(), out_, in_).noalias() += dy.transpose() * x;
    for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += dy.col(o).sum();
    Tensor grad(input_.n(), input_.c(), input_.h(), input_.w());
    MatrixMap(grad.data(), n, in_).noalias() = dy * ConstMatrixMap(weight_.value.data(), out_, in_);
    return grad;
}

Tensor Sequential::forward(const Tensor& input) {
    Tensor x = input;
    for (auto& layer : layers_) x = layer->forward(x);
    return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Parameter*> Sequential::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        auto p = layer->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void zero_grad(const std::vector<Parameter*>& params) {
    for (auto* p : params) p->zero_grad();
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
    std::size_t n = 0;
    for (auto* p : params) n += p->value.size();
    return n;
}

std::vector<float> flatten_values(const std::vector<Parameter*>& params) {
    std::vector<float> out;
    out.reserve(parameter_count(params));
    for (auto* p : params) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
}

void load_values(const std::vector<Parameter*>& params, const std::vector<float>& values) {
    if (values.size() != parameter_count(params)) {
        throw ArgumentError("parameter blob has " + std::to_string(values.size()) + " values, model expects " +
                            std::to_string(parameter_count(params)));
    }
    std::size_t offset = 0;
    for (auto* p : params) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), p->value.size(), p->value.begin());
        offset += p->value.size();
    }
}

}  // namespace tailaug::nn
