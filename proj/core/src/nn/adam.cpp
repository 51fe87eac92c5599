#include "tailaug/nn/adam.hpp"

#include <cmath>

namespace tailaug::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0f);
        v_.emplace_back(p->value.size(), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(opt_.beta1);
    const auto b2 = static_cast<float>(opt_.beta2);
    const auto step = static_cast<float>(opt_.learning_rate * std::sqrt(bc2) / bc1);
    const auto eps = static_cast<float>(opt_.epsilon * std::sqrt(bc2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& value = params_[i]->value;
        const auto& grad = params_[i]->grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * grad[j];
            v[j] = b2 * v[j] + (1.0f - b2) * grad[j] * grad[j];
            value[j] -= step * m[j] / (std::sqrt(v[j]) + eps);
        }
    }
}

void Adam::zero_grad() { nn::zero_grad(params_); }

}  // namespace tailaug::nn
