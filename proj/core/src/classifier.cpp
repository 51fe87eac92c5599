#include "tailaug/classifier.hpp"

#include <algorithm>

#include "json.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/nn/checkpoint.hpp"

namespace tailaug::classifier {

namespace {

nn::Sequential build_features(const CnnConfig& config) {
    if (config.channels.empty()) throw ArgumentError("cnn config needs at least one stage");
    if (config.num_classes < 2) throw ArgumentError("cnn config needs at least 2 classes");
    const int shrink = 1 << config.pooled_stages;
    if (config.image_size <= 0 || config.image_size % shrink != 0) {
        throw ArgumentError("image size must be divisible by 2^pooled_stages");
    }
    nn::Sequential features;
    // Center the [0,1] input around zero and widen its range.
    features.add<nn::Affine>(0.5f, 4.0f);
    int in = 1;
    for (std::size_t i = 0; i < config.channels.size(); ++i) {
        features.add<nn::Conv2d>(in, config.channels[i], 3, core::derive_seed(config.init_seed, i));
        features.add<nn::ReLU>();
        if (static_cast<int>(i) < config.pooled_stages) features.add<nn::MaxPool2>();
        in = config.channels[i];
    }
    return features;
}

}  // namespace

std::string CnnConfig::to_json() const {
    nlohmann::ordered_json j;
    j["image_size"] = image_size;
    j["num_classes"] = num_classes;
    j["channels"] = channels;
    j["pooled_stages"] = pooled_stages;
    j["init_seed"] = init_seed;
    return j.dump();
}

CnnConfig CnnConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    CnnConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.channels = j.at("channels").get<std::vector<int>>();
    c.pooled_stages = j.at("pooled_stages").get<int>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    return c;
}

ConvClassifier::ConvClassifier(const CnnConfig& config)
    : ConvClassifier(build_features(config), config.channels.back(), config.num_classes,
                     core::derive_seed(config.init_seed, "head")) {
    config_ = config;
}

ConvClassifier::ConvClassifier(nn::Sequential features, int feature_channels, int num_classes,
                               std::uint64_t init_seed)
    : features_(std::move(features)), head_(feature_channels, num_classes, init_seed), num_classes_(num_classes) {}

nn::Tensor ConvClassifier::forward_batch(const nn::Tensor& images) {
    last_features_ = features_.forward(images);
    return head_.forward(gap_.forward(last_features_));
}

void ConvClassifier::backward_batch(const nn::Tensor& grad_logits) {
    features_.backward(gap_.backward(head_.backward(grad_logits)));
}

std::vector<nn::Parameter*> ConvClassifier::parameters() {
    auto params = features_.parameters();
    auto head = head_.parameters();
    params.insert(params.end(), head.begin(), head.end());
    return params;
}

std::vector<float> ConvClassifier::forward(const core::ImageTensor& image) {
    const core::ImageTensor gray = image.to_gray();
    const nn::Tensor logits = forward_batch(stack_images({&gray}));
    return {logits.values().begin(), logits.values().end()};
}

nn::Tensor ConvClassifier::activations_at(const std::string& layer) const {
    if (layer != kTargetLayer) throw CapabilityError("unknown layer: " + layer);
    if (last_features_.size() == 0) throw CapabilityError("activations requested before forward()");
    return last_features_;
}

nn::Tensor ConvClassifier::gradients_at(const std::string& layer, core::ClassIndex class_id) {
    if (layer != kTargetLayer) throw CapabilityError("unknown layer: " + layer);
    if (last_features_.n() != 1) throw CapabilityError("gradients need a single-image forward()");
    if (class_id < 0 || class_id >= num_classes_) throw ArgumentError("class index out of range");
    nn::Tensor onehot(1, num_classes_, 1, 1);
    onehot.at(0, class_id, 0, 0) = 1.0f;
    nn::Tensor grad = gap_.backward(head_.backward(onehot));
    // The head accumulated parameter gradients; those belong to training only.
    for (auto* p : head_.parameters()) p->zero_grad();
    return grad;
}

void ConvClassifier::save(const std::filesystem::path& path) {
    if (!config_) throw CapabilityError("only config-built classifiers can be saved");
    nlohmann::ordered_json header;
    header["kind"] = "classifier";
    header["config"] = nlohmann::json::parse(config_->to_json());
    nn::write_checkpoint_file(path, {header.dump(), nn::flatten_values(parameters())});
}

ConvClassifier ConvClassifier::load(const std::filesystem::path& path) {
    auto file = nn::read_checkpoint_file(path);
    const auto header = nlohmann::json::parse(file.header_json);
    if (header.value("kind", "") != "classifier") {
        throw SchemaError("checkpoint is not a classifier: " + path.string());
    }
    ConvClassifier model(CnnConfig::from_json(header.at("config").dump()));
    nn::load_values(model.parameters(), file.weights);
    return model;
}

std::string ConvClassifier::checkpoint_id() {
    return nn::content_hash(config_ ? config_->to_json() : std::string("custom"), nn::flatten_values(parameters()));
}

nn::Tensor stack_images(const std::vector<const core::ImageTensor*>& images) {
    if (images.empty()) throw ArgumentError("stack_images: empty batch");
    const int h = images.front()->height();
    const int w = images.front()->width();
    nn::Tensor batch(static_cast<int>(images.size()), 1, h, w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = *images[i];
        if (img.height() != h || img.width() != w || img.channels() != 1) {
            throw ArgumentError("stack_images: batch images must share a single-channel shape");
        }
        std::copy(img.data().begin(), img.data().end(), batch.sample(static_cast<int>(i)));
    }
    return batch;
}

}  // namespace tailaug::classifier
