#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tailaug/classifier.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/losses.hpp"
#include "tailaug/pil.hpp"
#include "tailaug/stats.hpp"

namespace tailaug::trainer {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    LossSpec loss;
    int image_size = 64;
    std::uint64_t seed = 0;
    std::vector<int> channels = {8, 16, 16, 32};
    int pooled_stages = 2;

    /// Settings reported for the full-size experiments (256 px, batch 128).
    static TrainConfig paper_scale();
    void validate() const;
    classifier::CnnConfig model_config(int num_classes) const;
};

struct EpochLog {
    int epoch = 0;
    std::size_t view_size = 0;
    double mean_loss = 0.0;
};

using EpochProvider = std::function<pil::EpochView(int epoch)>;

struct TrainResult {
    classifier::ConvClassifier model;
    std::vector<EpochLog> log;
};

/// Mini-batch training over the views the provider yields per epoch.
/// `init_weights` (if given) warm-starts the model for fine-tuning.
TrainResult train_classifier(const TrainConfig& config, int num_classes, const EpochProvider& provider,
                             core::ImageCache& images, const std::vector<float>* init_weights = nullptr,
                             const std::function<void(const EpochLog&)>& on_epoch = {});

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    std::int64_t predicted = 0;
    std::int64_t true_positive = 0;
    /// False when the class has neither support nor predictions; excluded from means.
    bool included = true;
};

struct EvalReport {
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> per_class;
    core::ClassSet head;
    core::ClassSet tail;
    double macro_f1 = 0.0;
    double head_macro_f1 = 0.0;
    double tail_macro_f1 = 0.0;
    double threshold = 0.5;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

/// Per-class precision/recall/F1 from binary predictions; macro means over included classes.
EvalReport compute_eval_report(const std::vector<core::LabelVector>& predictions,
                               const std::vector<core::LabelVector>& truth, const core::ClassRegistry& registry,
                               const stats::HeadTailPartition& partition, double threshold);

/// Predictions are sigmoid(logit) >= threshold.
EvalReport evaluate(classifier::ConvClassifier& model, const core::Manifest& test, core::ImageCache& images,
                    const stats::HeadTailPartition& partition, double threshold = 0.5);

struct DeltaReport {
    std::vector<std::string> class_names;
    std::vector<double> f1_delta;
    std::vector<double> precision_delta;
    std::vector<double> recall_delta;
    double macro_f1_delta = 0.0;
    double head_macro_f1_delta = 0.0;
    double tail_macro_f1_delta = 0.0;

    std::string to_json() const;
};

/// treated - baseline, per class and aggregate.
DeltaReport compare_reports(const EvalReport& baseline, const EvalReport& treated);

}  // namespace tailaug::trainer
