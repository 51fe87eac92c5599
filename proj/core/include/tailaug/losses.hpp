#pragma once

#include <span>
#include <string>
#include <vector>

#include "tailaug/core/types.hpp"

namespace tailaug::trainer {

enum class LossKind { bce, focal };

struct LossSpec {
    LossKind kind = LossKind::bce;
    double gamma = 2.0;
    double alpha = 0.25;

    std::string name() const;
};

/// Mean over classes of -[y log s(z) + (1-y) log(1-s(z))].
double bce_multilabel_loss(std::span<const double> logits, const core::LabelVector& labels);
/// d loss / d logits.
std::vector<double> bce_multilabel_gradient(std::span<const double> logits, const core::LabelVector& labels);

/// Mean over classes of alpha * (1-p_t)^gamma * -log p_t, where p_t = s(z) for
/// positives and 1 - s(z) for negatives.
double focal_loss(std::span<const double> logits, const core::LabelVector& labels, double gamma, double alpha);
std::vector<double> focal_gradient(std::span<const double> logits, const core::LabelVector& labels, double gamma,
                                   double alpha);

double loss_value(const LossSpec& spec, std::span<const double> logits, const core::LabelVector& labels);
std::vector<double> loss_gradient(const LossSpec& spec, std::span<const double> logits, const core::LabelVector& labels);

}  // namespace tailaug::trainer
