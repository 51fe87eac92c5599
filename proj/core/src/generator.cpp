#include "tailaug/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "json.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"
#include "tailaug/nn/adam.hpp"
#include "tailaug/nn/checkpoint.hpp"

namespace tailaug::generator {

void DiffusionConfig::validate() const {
    if (timesteps < 1) throw ArgumentError("diffusion timesteps must be >= 1");
    if (image_size <= 0 || image_size % 8 != 0) throw ArgumentError("diffusion image size must be a multiple of 8");
    if (!(beta_start > 0.0 && beta_end >= beta_start)) throw ArgumentError("invalid beta bounds");
    if (train_epochs < 1 || batch_size < 1) throw ArgumentError("epochs and batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
    if (base_channels < 1) throw ArgumentError("base channels must be >= 1");
}

std::string DiffusionConfig::to_json() const {
    nlohmann::ordered_json j;
    j["image_size"] = image_size;
    j["timesteps"] = timesteps;
    j["noise_schedule"] = "linear-scaled";
    j["beta_start"] = beta_start;
    j["beta_end"] = beta_end;
    j["train_epochs"] = train_epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["base_channels"] = base_channels;
    return j.dump();
}

DiffusionConfig DiffusionConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    DiffusionConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.timesteps = j.at("timesteps").get<int>();
    c.beta_start = j.at("beta_start").get<double>();
    c.beta_end = j.at("beta_end").get<double>();
    c.train_epochs = j.at("train_epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.base_channels = j.at("base_channels").get<int>();
    c.validate();
    return c;
}

NoiseSchedule::NoiseSchedule(const DiffusionConfig& config) {
    const int T = config.timesteps;
    const double scale = 1000.0 / T;
    const double lo = std::min(config.beta_start * scale, 0.999);
    const double hi = std::min(config.beta_end * scale, 0.999);
    double running = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b = T == 1 ? hi : lo + (hi - lo) * t / (T - 1);
        beta.push_back(b);
        alpha.push_back(1.0 - b);
        running *= 1.0 - b;
        alpha_bar.push_back(running);
    }
}

Denoiser::Denoiser(int base_channels, std::uint64_t init_seed)
    : enc_(1 + kTimeChannels, base_channels, 3, core::derive_seed(init_seed, "enc")),
      mid1_(base_channels, 2 * base_channels, 3, core::derive_seed(init_seed, "mid1")),
      mid2_(2 * base_channels, 2 * base_channels, 3, core::derive_seed(init_seed, "mid2")),
      dec_(3 * base_channels, base_channels, 3, core::derive_seed(init_seed, "dec")),
      out_(base_channels, 1, 3, core::derive_seed(init_seed, "out")),
      base_(base_channels) {
    // A near-zero output layer starts the model at "predict zero noise".
    for (float& w : out_.weight().value) w *= 0.1f;
}

nn::Tensor Denoiser::forward(const nn::Tensor& x, const std::vector<int>& t, int timesteps) {
    if (x.c() != 1 || static_cast<std::size_t>(x.n()) != t.size()) {
        throw ArgumentError("denoiser input must be N x 1 x H x W with one timestep per sample");
    }
    nn::Tensor time(x.n(), kTimeChannels, x.h(), x.w());
    for (int n = 0; n < x.n(); ++n) {
        const double tau = timesteps > 1 ? static_cast<double>(t[static_cast<std::size_t>(n)]) / (timesteps - 1) : 0.0;
        const float feats[kTimeChannels] = {
            static_cast<float>(std::sin(std::numbers::pi * tau)), static_cast<float>(std::cos(std::numbers::pi * tau)),
            static_cast<float>(std::sin(4.0 * std::numbers::pi * tau)),
            static_cast<float>(std::cos(4.0 * std::numbers::pi * tau))};
        for (int c = 0; c < kTimeChannels; ++c) std::fill_n(time.ptr(n, c, 0, 0), time.plane(), feats[c]);
    }
    const nn::Tensor e = enc_act_.forward(enc_.forward(nn::concat_channels(x, time)));
    const nn::Tensor m = mid2_act_.forward(mid2_.forward(mid1_act_.forward(mid1_.forward(down_.forward(e)))));
    const nn::Tensor d = dec_act_.forward(dec_.forward(nn::concat_channels(up_.forward(m), e)));
    return out_.forward(d);
}

void Denoiser::backward(const nn::Tensor& grad_output) {
    const nn::Tensor g_joined = dec_.backward(dec_act_.backward(out_.backward(grad_output)));
    nn::Tensor g_up, g_skip;
    nn::split_channels(g_joined, 2 * base_, g_up, g_skip);
    const nn::Tensor g_mid = mid1_.backward(mid1_act_.backward(mid2_.backward(mid2_act_.backward(up_.backward(g_up)))));
    nn::Tensor g_enc = down_.backward(g_mid);
    auto ge = g_enc.values();
    auto gs = g_skip.values();
    for (std::size_t i = 0; i < ge.size(); ++i) ge[i] += gs[i];
    enc_.backward(enc_act_.backward(g_enc));
}

std::vector<nn::Parameter*> Denoiser::parameters() {
    std::vector<nn::Parameter*> out;
    for (nn::Conv2d* conv : {&enc_, &mid1_, &mid2_, &dec_, &out_}) {
        auto p = conv->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

GeneratorCheckpoint::GeneratorCheckpoint(DiffusionConfig config, Denoiser net)
    : config_(std::move(config)), net_(std::move(net)) {
    config_.validate();
    id_ = nn::content_hash(config_.to_json(), nn::flatten_values(net_.parameters()));
}

void GeneratorCheckpoint::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json header;
    header["kind"] = "generator";
    header["config"] = nlohmann::json::parse(config_.to_json());
    header["generator_id"] = id_;
    Denoiser copy = net_;
    nn::write_checkpoint_file(path, {header.dump(), nn::flatten_values(copy.parameters())});
}

GeneratorCheckpoint GeneratorCheckpoint::load(const std::filesystem::path& path) {
    auto file = nn::read_checkpoint_file(path);
    const auto header = nlohmann::json::parse(file.header_json);
    if (header.value("kind", "") != "generator") {
        throw SchemaError("checkpoint is not a generator: " + path.string());
    }
    const auto config = DiffusionConfig::from_json(header.at("config").dump());
    Denoiser net(config.base_channels, 0);
    nn::load_values(net.parameters(), file.weights);
    GeneratorCheckpoint ckpt(config, std::move(net));
    if (header.contains("generator_id") && header["generator_id"].get<std::string>() != ckpt.generator_id()) {
        throw SchemaError("generator checkpoint hash mismatch: " + path.string());
    }
    return ckpt;
}

GeneratorCheckpoint train_normal_generator(const core::Manifest& normals, core::ImageCache& images,
                                           const DiffusionConfig& config, std::uint64_t seed, GeneratorTrainLog* log,
                                           const std::function<void(int, double)>& on_epoch) {
    config.validate();
    if (normals.records.empty()) throw ArgumentError("generator training needs at least one normal image");
    for (const auto& record : normals.records) {
        if (record.labels.any()) {
            throw ContaminationError("generator training set contains abnormal record " + record.id);
        }
    }
    if (images.working_size() != config.image_size) {
        throw ArgumentError("image cache working size differs from the generator resolution");
    }

    const NoiseSchedule schedule(config);
    Denoiser net(config.base_channels, core::derive_seed(seed, "init"));
    nn::Adam adam(net.parameters(), {.learning_rate = config.learning_rate});
    const int size = config.image_size;
    const std::size_t n = normals.records.size();

    for (int epoch = 0; epoch < config.train_epochs; ++epoch) {
        const auto order = core::shuffled_indices(n, core::derive_seed(seed, static_cast<std::uint64_t>(epoch)));
        core::CounterRng rng(core::derive_seed(core::derive_seed(seed, "noise"), static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const int bs = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n - start));
            nn::Tensor noisy(bs, 1, size, size);
            nn::Tensor noise(bs, 1, size, size);
            std::vector<int> t(static_cast<std::size_t>(bs));
            for (int b = 0; b < bs; ++b) {
                const auto& record = normals.records[order[start + static_cast<std::size_t>(b)]];
                const auto& img = images.get(normals.resolve(record));
                const int tb = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.timesteps)));
                t[static_cast<std::size_t>(b)] = tb;
                const double sa = std::sqrt(schedule.alpha_bar[static_cast<std::size_t>(tb)]);
                const double sb = std::sqrt(1.0 - schedule.alpha_bar[static_cast<std::size_t>(tb)]);
                float* xn = noisy.sample(b);
                float* en = noise.sample(b);
                for (std::size_t i = 0; i < img.data().size(); ++i) {
                    const auto eps = static_cast<float>(rng.normal());
                    en[i] = eps;
                    xn[i] = static_cast<float>(sa * (2.0 * img.data()[i] - 1.0) + sb * eps);
                }
            }
            adam.zero_grad();
            nn::Tensor pred = net.forward(noisy, t, config.timesteps);
            nn::Tensor grad(bs, 1, size, size);
            double loss = 0.0;
            const double scale = 1.0 / static_cast<double>(pred.size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double d = static_cast<double>(pred.values()[i]) - noise.values()[i];
                loss += d * d;
                grad.values()[i] = static_cast<float>(2.0 * d * scale);
            }
            net.backward(grad);
            adam.step();
            loss_sum += loss * scale;
            ++batches;
        }
        const double mean_loss = loss_sum / static_cast<double>(batches);
        if (log) log->epoch_mean_loss.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss);
    }
    return GeneratorCheckpoint(config, std::move(net));
}

namespace {

struct KnownRegion {
    const core::ImageTensor* image;
    const cam::InpaintMask* mask;
};

// Shared reverse trajectory. The noise streams for x_T and the per-step draws
// depend only on the seed, so a full mask reproduces the unconditional sample.
core::ImageTensor reverse_diffusion(const GeneratorCheckpoint& ckpt, NoiseSeed seed,
                                    const std::optional<KnownRegion>& known) {
    const auto& config = ckpt.config();
    const NoiseSchedule schedule(config);
    Denoiser net = ckpt.network();
    const int size = config.image_size;
    const int T = config.timesteps;
    const std::size_t pixels = static_cast<std::size_t>(size) * size;

    std::vector<float> x0_known;
    if (known) {
        x0_known.resize(pixels);
        for (std::size_t i = 0; i < pixels; ++i) x0_known[i] = 2.0f * known->image->data()[i] - 1.0f;
    }
    auto composite_known = [&](nn::Tensor& x, int level) {
        if (!known) return;
        core::CounterRng rng(core::derive_seed(core::derive_seed(seed.seed, "known"), static_cast<std::uint64_t>(level)));
        const double sa = std::sqrt(schedule.alpha_bar[static_cast<std::size_t>(level)]);
        const double sb = std::sqrt(1.0 - schedule.alpha_bar[static_cast<std::size_t>(level)]);
        const auto& bits = known->mask->bits();
        for (std::size_t i = 0; i < pixels; ++i) {
            const double eps = rng.normal();
            if (!bits[i]) x.values()[i] = static_cast<float>(sa * x0_known[i] + sb * eps);
        }
    };

    nn::Tensor x(1, 1, size, size);
    {
        core::CounterRng rng(core::derive_seed(seed.seed, "x_T"));
        for (float& v : x.values()) v = static_cast<float>(rng.normal());
    }
    composite_known(x, T - 1);

    std::vector<int> step(1);
    for (int t = T - 1; t >= 0; --t) {
        step[0] = t;
        const nn::Tensor eps = net.forward(x, step, T);
        const auto ts = static_cast<std::size_t>(t);
        const double ab = schedule.alpha_bar[ts];
        const double ab_prev = t > 0 ? schedule.alpha_bar[ts - 1] : 1.0;
        const double beta = schedule.beta[ts];
        const double coef_x0 = beta * std::sqrt(ab_prev) / (1.0 - ab);
        const double coef_xt = (1.0 - ab_prev) * std::sqrt(schedule.alpha[ts]) / (1.0 - ab);
        const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
        core::CounterRng rng(core::derive_seed(core::derive_seed(seed.seed, "step"), static_cast<std::uint64_t>(t)));
        for (std::size_t i = 0; i < pixels; ++i) {
            const double xt = x.values()[i];
            double x0 = (xt - std::sqrt(1.0 - ab) * eps.values()[i]) / std::sqrt(ab);
            x0 = std::clamp(x0, -1.0, 1.0);
            double next = coef_x0 * x0 + coef_xt * xt;
            if (t > 0) next += sigma * rng.normal();
            x.values()[i] = static_cast<float>(next);
        }
        if (t > 0) composite_known(x, t - 1);
    }

    core::ImageTensor out(size, size, 1);
    for (std::size_t i = 0; i < pixels; ++i) {
        out.data()[i] = std::clamp(0.5f * (x.values()[i] + 1.0f), 0.0f, 1.0f);
    }
    if (known) {
        const auto& bits = known->mask->bits();
        for (std::size_t i = 0; i < pixels; ++i) {
            if (!bits[i]) out.data()[i] = known->image->data()[i];
        }
    }
    return out;
}

}  // namespace

core::ImageTensor sample_unconditional(const GeneratorCheckpoint& ckpt, NoiseSeed seed) {
    return reverse_diffusion(ckpt, seed, std::nullopt);
}

core::ImageTensor inpaint(const GeneratorCheckpoint& ckpt, const core::ImageTensor& image, const cam::InpaintMask& mask,
                          NoiseSeed seed) {
    const int size = ckpt.config().image_size;
    if (!mask.matches(image)) throw ArgumentError("inpaint: mask shape does not match image");
    if (image.height() != size || image.width() != size || image.channels() != 1) {
        throw ArgumentError("inpaint: image must be single-channel " + std::to_string(size) + "x" + std::to_string(size));
    }
    if (mask.popcount() == 0) return image;
    return reverse_diffusion(ckpt, seed, KnownRegion{&image, &mask});
}

}  // namespace tailaug::generator
