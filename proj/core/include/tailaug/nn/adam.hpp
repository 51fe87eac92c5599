#pragma once

#include <vector>

#include "tailaug/nn/layers.hpp"

namespace tailaug::nn {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions options);

    void step();
    void zero_grad();
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamOptions opt_;
    std::vector<std::vector<float>> m_, v_;
    long t_ = 0;
};

}  // namespace tailaug::nn
