#include "tailaug/trainer.hpp"

#include <cmath>

#include "json.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/nn/adam.hpp"

namespace tailaug::trainer {

TrainConfig TrainConfig::paper_scale() {
    TrainConfig c;
    c.epochs = 10;
    c.batch_size = 128;
    c.learning_rate = 1e-3;
    c.image_size = 256;
    c.channels = {16, 32, 64, 64};
    c.pooled_stages = 3;
    return c;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw ArgumentError("epochs and batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
    if (optimizer != "adam") throw ArgumentError("unsupported optimizer: " + optimizer);
}

classifier::CnnConfig TrainConfig::model_config(int num_classes) const {
    classifier::CnnConfig c;
    c.image_size = image_size;
    c.num_classes = num_classes;
    c.channels = channels;
    c.pooled_stages = pooled_stages;
    c.init_seed = core::derive_seed(seed, "classifier-init");
    return c;
}

TrainResult train_classifier(const TrainConfig& config, int num_classes, const EpochProvider& provider,
                             core::ImageCache& images, const std::vector<float>* init_weights,
                             const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (images.working_size() != config.image_size) {
        throw ArgumentError("image cache working size differs from the classifier resolution");
    }
    TrainResult result{classifier::ConvClassifier(config.model_config(num_classes)), {}};
    auto& model = result.model;
    if (init_weights) nn::load_values(model.parameters(), *init_weights);
    nn::Adam adam(model.parameters(), {.learning_rate = config.learning_rate});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const pil::EpochView view = provider(epoch);
        if (view.records.empty()) throw ArgumentError("epoch " + std::to_string(epoch) + " view is empty");
        const auto order =
            core::shuffled_indices(view.size(), core::derive_seed(core::derive_seed(config.seed, "batches"),
                                                                  static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < view.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(view.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const core::ImageTensor*> batch_images;
            std::vector<const core::LabelVector*> batch_labels;
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = order[i];
                const auto& record = view.records[idx];
                batch_images.push_back(&images.get(view.sources[idx]->resolve(record)));
                batch_labels.push_back(&record.labels);
            }
            adam.zero_grad();
            const nn::Tensor logits = model.forward_batch(classifier::stack_images(batch_images));
            nn::Tensor grad(logits.n(), logits.c(), 1, 1);
            const double inv_batch = 1.0 / static_cast<double>(batch_images.size());
            std::vector<double> z(static_cast<std::size_t>(num_classes));
            for (int b = 0; b < logits.n(); ++b) {
                for (int k = 0; k < num_classes; ++k) z[static_cast<std::size_t>(k)] = logits.at(b, k, 0, 0);
                const auto& labels = *batch_labels[static_cast<std::size_t>(b)];
                loss_sum += loss_value(config.loss, z, labels);
                const auto g = loss_gradient(config.loss, z, labels);
                for (int k = 0; k < num_classes; ++k) {
                    grad.at(b, k, 0, 0) = static_cast<float>(g[static_cast<std::size_t>(k)] * inv_batch);
                }
            }
            model.backward_batch(grad);
            adam.step();
        }
        EpochLog entry{epoch, view.size(), loss_sum / static_cast<double>(view.size())};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return result;
}

namespace {

double mean_f1(const std::vector<ClassMetrics>& per_class, const core::ClassSet* subset) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        if (subset && !subset->count(static_cast<core::ClassIndex>(k))) continue;
        if (!per_class[k].included) continue;
        sum += per_class[k].f1;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

EvalReport compute_eval_report(const std::vector<core::LabelVector>& predictions,
                               const std::vector<core::LabelVector>& truth, const core::ClassRegistry& registry,
                               const stats::HeadTailPartition& partition, double threshold) {
    if (truth.empty()) throw ArgumentError("evaluation needs a nonempty test set");
    if (predictions.size() != truth.size()) throw ArgumentError("prediction and label counts differ");
    const std::size_t k = registry.size();
    EvalReport report;
    report.class_names = registry.names();
    report.head = partition.head;
    report.tail = partition.tail;
    report.threshold = threshold;
    report.per_class.resize(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const bool y = truth[i].test(static_cast<core::ClassIndex>(c));
            const bool p = predictions[i].test(static_cast<core::ClassIndex>(c));
            auto& m = report.per_class[c];
            m.support += y;
            m.predicted += p;
            m.true_positive += y && p;
        }
    }
    for (auto& m : report.per_class) {
        m.included = m.support > 0 || m.predicted > 0;
        m.precision = m.predicted ? static_cast<double>(m.true_positive) / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support ? static_cast<double>(m.true_positive) / static_cast<double>(m.support) : 0.0;
        const auto denom = m.support + m.predicted;  // 2TP + FP + FN
        m.f1 = denom ? 2.0 * static_cast<double>(m.true_positive) / static_cast<double>(denom) : 0.0;
    }
    report.macro_f1 = mean_f1(report.per_class, nullptr);
    report.head_macro_f1 = mean_f1(report.per_class, &report.head);
    report.tail_macro_f1 = mean_f1(report.per_class, &report.tail);
    return report;
}

EvalReport evaluate(classifier::ConvClassifier& model, const core::Manifest& test, core::ImageCache& images,
                    const stats::HeadTailPartition& partition, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("decision threshold must lie in (0,1)");
    if (test.records.empty()) throw ArgumentError("evaluation needs a nonempty test set");
    const std::size_t k = test.registry.size();
    // sigmoid(z) >= t  <=>  z >= logit(t)
    const double logit_threshold = std::log(threshold / (1.0 - threshold));
    std::vector<core::LabelVector> predictions, truth;
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < test.records.size(); start += kBatch) {
        const std::size_t end = std::min(test.records.size(), start + kBatch);
        std::vector<const core::ImageTensor*> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(&images.get(test.resolve(test.records[i])));
        const nn::Tensor logits = model.forward_batch(classifier::stack_images(batch));
        for (std::size_t i = start; i < end; ++i) {
            core::LabelVector p(k);
            for (std::size_t c = 0; c < k; ++c) {
                p.set(static_cast<core::ClassIndex>(c),
                      logits.at(static_cast<int>(i - start), static_cast<int>(c), 0, 0) >= logit_threshold);
            }
            predictions.push_back(std::move(p));
            truth.push_back(test.records[i].labels);
        }
    }
    return compute_eval_report(predictions, truth, test.registry, partition, threshold);
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["threshold"] = threshold;
    j["macro_f1"] = macro_f1;
    j["head_macro_f1"] = head_macro_f1;
    j["tail_macro_f1"] = tail_macro_f1;
    j["head"] = std::vector<int>(head.begin(), head.end());
    j["tail"] = std::vector<int>(tail.begin(), tail.end());
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        const auto& m = per_class[k];
        nlohmann::ordered_json row;
        row["class"] = class_names[k];
        row["precision"] = m.precision;
        row["recall"] = m.recall;
        row["f1"] = m.f1;
        row["support"] = m.support;
        row["predicted"] = m.predicted;
        row["true_positive"] = m.true_positive;
        row["included"] = m.included;
        rows.push_back(std::move(row));
    }
    j["per_class"] = std::move(rows);
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.threshold = j.at("threshold").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.head_macro_f1 = j.at("head_macro_f1").get<double>();
    r.tail_macro_f1 = j.at("tail_macro_f1").get<double>();
    for (int c : j.at("head").get<std::vector<int>>()) r.head.insert(c);
    for (int c : j.at("tail").get<std::vector<int>>()) r.tail.insert(c);
    for (const auto& row : j.at("per_class")) {
        r.class_names.push_back(row.at("class").get<std::string>());
        ClassMetrics m;
        m.precision = row.at("precision").get<double>();
        m.recall = row.at("recall").get<double>();
        m.f1 = row.at("f1").get<double>();
        m.support = row.at("support").get<std::int64_t>();
        m.predicted = row.at("predicted").get<std::int64_t>();
        m.true_positive = row.at("true_positive").get<std::int64_t>();
        m.included = row.at("included").get<bool>();
        r.per_class.push_back(m);
    }
    return r;
}

DeltaReport compare_reports(const EvalReport& baseline, const EvalReport& treated) {
    if (baseline.class_names != treated.class_names) {
        throw ArgumentError("cannot compare reports over different registries");
    }
    if (baseline.head != treated.head || baseline.tail != treated.tail) {
        throw ArgumentError("cannot compare reports over different head/tail partitions");
    }
    DeltaReport d;
    d.class_names = baseline.class_names;
    for (std::size_t k = 0; k < baseline.per_class.size(); ++k) {
        d.f1_delta.push_back(treated.per_class[k].f1 - baseline.per_class[k].f1);
        d.precision_delta.push_back(treated.per_class[k].precision - baseline.per_class[k].precision);
        d.recall_delta.push_back(treated.per_class[k].recall - baseline.per_class[k].recall);
    }
    d.macro_f1_delta = treated.macro_f1 - baseline.macro_f1;
    d.head_macro_f1_delta = treated.head_macro_f1 - baseline.head_macro_f1;
    d.tail_macro_f1_delta = treated.tail_macro_f1 - baseline.tail_macro_f1;
    return d;
}

std::string DeltaReport::to_json() const {
    nlohmann::ordered_json j;
    j["macro_f1_delta"] = macro_f1_delta;
    j["head_macro_f1_delta"] = head_macro_f1_delta;
    j["tail_macro_f1_delta"] = tail_macro_f1_delta;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        rows.push_back({{"class", class_names[k]},
                        {"f1_delta", f1_delta[k]},
                        {"precision_delta", precision_delta[k]},
                        {"recall_delta", recall_delta[k]}});
    }
    j["per_class"] = std::move(rows);
    return j.dump(2);
}

}  // namespace tailaug::trainer
