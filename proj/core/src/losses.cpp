#include "tailaug/losses.hpp"

#include <cmath>

#include "tailaug/error.hpp"

namespace tailaug::trainer {

namespace {

void check_inputs(std::span<const double> logits, const core::LabelVector& labels) {
    if (logits.size() != labels.size()) throw ArgumentError("logit count does not match label count");
    if (logits.empty()) throw ArgumentError("loss over zero classes");
    for (double z : logits) {
        if (!std::isfinite(z)) throw NumericError("non-finite logit");
    }
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_focal_params(double gamma, double alpha) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw NumericError("focal gamma must be finite and >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw NumericError("focal alpha must lie in (0,1]");
}

}  // namespace

std::string LossSpec::name() const {
    return kind == LossKind::bce ? "bce" : "focal(gamma=" + std::to_string(gamma) + ",alpha=" + std::to_string(alpha) + ")";
}

double bce_multilabel_loss(std::span<const double> logits, const core::LabelVector& labels) {
    check_inputs(logits, labels);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double z = logits[k];
        // -log s(z) = softplus(-z), -log(1 - s(z)) = softplus(z)
        sum += labels.test(static_cast<core::ClassIndex>(k)) ? softplus(-z) : softplus(z);
    }
    return sum / static_cast<double>(logits.size());
}

std::vector<double> bce_multilabel_gradient(std::span<const double> logits, const core::LabelVector& labels) {
    check_inputs(logits, labels);
    std::vector<double> grad(logits.size());
    const double scale = 1.0 / static_cast<double>(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double y = labels.test(static_cast<core::ClassIndex>(k)) ? 1.0 : 0.0;
        grad[k] = (sigmoid(logits[k]) - y) * scale;
    }
    return grad;
}

double focal_loss(std::span<const double> logits, const core::LabelVector& labels, double gamma, double alpha) {
    check_inputs(logits, labels);
    check_focal_params(gamma, alpha);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        // With s = +1 for positives and -1 for negatives, p_t = sigmoid(s z).
        const double sz = labels.test(static_cast<core::ClassIndex>(k)) ? logits[k] : -logits[k];
        const double neg_log_pt = softplus(-sz);
        const double one_minus_pt = sigmoid(-sz);
        sum += alpha * std::pow(one_minus_pt, gamma) * neg_log_pt;
    }
    return sum / static_cast<double>(logits.size());
}

std::vector<double> focal_gradient(std::span<const double> logits, const core::LabelVector& labels, double gamma,
                                   double alpha) {
    check_inputs(logits, labels);
    check_focal_params(gamma, alpha);
    std::vector<double> grad(logits.size());
    const double scale = 1.0 / static_cast<double>(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double s = labels.test(static_cast<core::ClassIndex>(k)) ? 1.0 : -1.0;
        const double sz = s * logits[k];
        const double pt = sigmoid(sz);
        const double one_minus_pt = sigmoid(-sz);
        const double log_pt = -softplus(-sz);
        // d/dz = alpha * s * (1-p_t)^gamma * (gamma * p_t * log p_t - (1 - p_t))
        grad[k] = alpha * s * std::pow(one_minus_pt, gamma) * (gamma * pt * log_pt - one_minus_pt) * scale;
    }
    return grad;
}

double loss_value(const LossSpec& spec, std::span<const double> logits, const core::LabelVector& labels) {
    return spec.kind == LossKind::bce ? bce_multilabel_loss(logits, labels)
                                      : focal_loss(logits, labels, spec.gamma, spec.alpha);
}

std::vector<double> loss_gradient(const LossSpec& spec, std::span<const double> logits, const core::LabelVector& labels) {
    return spec.kind == LossKind::bce ? bce_multilabel_gradient(logits, labels)
                                      : focal_gradient(logits, labels, spec.gamma, spec.alpha);
}

}  // namespace tailaug::trainer
