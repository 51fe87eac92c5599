#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tailaug/nn/tensor.hpp"

namespace tailaug::nn {

struct Parameter {
    std::string name;
    std::vector<float> value;
    std::vector<float> grad;

    explicit Parameter(std::string n = {}, std::size_t size = 0) : name(std::move(n)), value(size, 0.0f), grad(size, 0.0f) {}
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

/// A differentiable stage. forward() caches what backward() needs, so a
/// layer instance serves one forward/backward pair at a time.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& input) = 0;
    /// Accumulates parameter gradients and returns d(loss)/d(input).
    virtual Tensor backward(const Tensor& grad_output) = 0;
    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::string kind() const = 0;
};

/// Square-kernel convolution, stride 1, zero padding kernel/2 ("same").
class Conv2d final : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int kernel, std::uint64_t init_seed);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::string kind() const override { return "conv2d"; }

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int kernel() const { return kernel_; }
    /// Row-major [out][in * k * k].
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    int in_, out_, kernel_;
    Parameter weight_;
    Parameter bias_;
    int n_ = 0, h_ = 0, w_ = 0;
    std::vector<float> columns_;  // [in*k*k][n*h*w]
};

/// Fixed elementwise (x - shift) * scale; no parameters.
class Affine final : public Layer {
public:
    Affine(float shift, float scale) : shift_(shift), scale_(scale) {}
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "affine"; }

private:
    float shift_, scale_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "relu"; }

private:
    Tensor output_;
};

class MaxPool2 final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "maxpool2"; }

private:
    int in_h_ = 0, in_w_ = 0;
    std::vector<std::uint32_t> argmax_;
};

class AvgPool2 final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "avgpool2"; }

private:
    int in_h_ = 0, in_w_ = 0;
};

/// Nearest-neighbour 2x upsampling.
class Upsample2 final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "upsample2"; }
};

/// N x C x H x W -> N x C x 1 x 1.
class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::string kind() const override { return "gap"; }

private:
    int h_ = 0, w_ = 0;
};

/// Fully connected over N x in x 1 x 1 inputs.
class Linear final : public Layer {
public:
    Linear(int in_features, int out_features, std::uint64_t init_seed);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::string kind() const override { return "linear"; }

    int in_features() const { return in_; }
    int out_features() const { return out_; }
    /// Row-major [out][in].
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    int in_, out_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    template <typename L, typename... Args>
    L& add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);
    std::vector<Parameter*> parameters();
    std::size_t size() const { return layers_.size(); }
    Layer& at(std::size_t i) { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

void zero_grad(const std::vector<Parameter*>& params);
std::size_t parameter_count(const std::vector<Parameter*>& params);
/// Concatenated parameter values in list order.
std::vector<float> flatten_values(const std::vector<Parameter*>& params);
/// Throws ArgumentError if the length does not match.
void load_values(const std::vector<Parameter*>& params, const std::vector<float>& values);

}  // namespace tailaug::nn
