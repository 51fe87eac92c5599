#include "tailaug/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "json.hpp"
#include "tailaug/core/manifest.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::synth {

namespace {

float quantize(double v) {
    const long k = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<float>(k) / 255.0f;
}

struct Placement {
    double cx = 0, cy = 0, rx = 0, ry = 0;
    bool horizontal = true;
};

cam::InpaintMask draw(const LesionSpec& spec, const Placement& p, int size) {
    cam::InpaintMask mask(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - p.cx;
            const double dy = y - p.cy;
            const double r2 = (dx * dx) / (p.rx * p.rx) + (dy * dy) / (p.ry * p.ry);
            const double half_wid = std::max(1.0, p.rx / 3.0);
            bool inside = false;
            switch (spec.shape) {
                case LesionShape::ellipse:
                    inside = r2 <= 1.0;
                    break;
                case LesionShape::ring:
                    inside = r2 <= 1.0 && r2 >= 0.3;
                    break;
                case LesionShape::bar:
                    inside = p.horizontal ? (std::abs(dx) <= p.rx && std::abs(dy) <= half_wid)
                                          : (std::abs(dy) <= p.rx && std::abs(dx) <= half_wid);
                    break;
                case LesionShape::cross: {
                    const double arm = std::max(1.0, p.rx / 4.0);
                    inside = (std::abs(dx) <= p.rx && std::abs(dy) <= arm) || (std::abs(dy) <= p.rx && std::abs(dx) <= arm);
                    break;
                }
            }
            if (inside) mask.set(y, x);
        }
    }
    return mask;
}

bool overlaps(const cam::InpaintMask& a, const cam::InpaintMask& b) {
    const auto& ab = a.bits();
    const auto& bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] && bb[i]) return true;
    }
    return false;
}

core::ImageTensor make_background(const BackgroundSpec& spec, int size, core::CounterRng& rng) {
    std::vector<double> noise(static_cast<std::size_t>(size) * size);
    for (double& v : noise) v = rng.uniform(-1.0, 1.0);
    std::vector<double> tmp(noise.size());
    for (int pass = 0; pass < spec.smoothing_passes; ++pass) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double sum = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= size || xx < 0 || xx >= size) continue;
                        sum += noise[static_cast<std::size_t>(yy) * size + xx];
                        ++n;
                    }
                }
                tmp[static_cast<std::size_t>(y) * size + x] = sum / n;
            }
        }
        noise.swap(tmp);
    }
    double peak = 0.0;
    for (double v : noise) peak = std::max(peak, std::abs(v));
    core::ImageTensor bg(size, size, 1);
    for (std::size_t i = 0; i < noise.size(); ++i) {
        const double n = peak > 0.0 ? noise[i] / peak : 0.0;
        bg.data()[i] = quantize(spec.base + spec.noise_amplitude * n);
    }
    return bg;
}

}  // namespace

SynthWorldConfig SynthWorldConfig::with_classes(std::vector<std::string> names, std::vector<double> frequencies) {
    SynthWorldConfig c;
    c.class_names = std::move(names);
    c.class_frequencies = std::move(frequencies);
    const std::size_t k = c.class_names.size();
    c.entangle_prob.assign(k * k, 0.0);
    constexpr LesionShape shapes[] = {LesionShape::ellipse, LesionShape::bar, LesionShape::ring, LesionShape::cross};
    for (std::size_t i = 0; i < k; ++i) {
        LesionSpec spec;
        spec.shape = shapes[i % 4];
        spec.min_radius = 4.0;
        spec.max_radius = 7.0;
        // Bright then dark variants of each shape; later cycles get stronger contrast.
        const double magnitude = 0.25 + 0.05 * static_cast<double>(i / 8);
        spec.intensity = (i / 4) % 2 == 0 ? magnitude : -magnitude;
        c.lesions.push_back(spec);
    }
    return c;
}

SynthWorldConfig SynthWorldConfig::default_world() {
    auto c = with_classes({"L0", "L1", "L2", "L3", "L4", "L5", "T6", "T7"},
                          {0.40, 0.32, 0.26, 0.22, 0.18, 0.15, 0.02, 0.02});
    c.set_entangle(0, 6, 0.3);
    c.set_entangle(1, 7, 0.3);
    return c;
}

void SynthWorldConfig::set_entangle(core::ClassIndex a, core::ClassIndex b, double p) {
    const std::size_t k = num_classes();
    entangle_prob.at(static_cast<std::size_t>(a) * k + static_cast<std::size_t>(b)) = p;
    entangle_prob.at(static_cast<std::size_t>(b) * k + static_cast<std::size_t>(a)) = p;
}

void SynthWorldConfig::validate() const {
    const std::size_t k = num_classes();
    if (k < 2) throw ArgumentError("synthetic world needs at least 2 classes");
    if (num_samples < 1) throw ArgumentError("synthetic world needs at least one sample");
    if (class_frequencies.size() != k || lesions.size() != k || entangle_prob.size() != k * k) {
        throw ArgumentError("synthetic world config arrays disagree with the class count");
    }
    for (double f : class_frequencies) {
        if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("class frequency outside [0,1]");
    }
    for (double p : entangle_prob) {
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("entanglement probability outside [0,1]");
    }
    for (const auto& spec : lesions) {
        if (!(spec.min_radius >= 1.0 && spec.max_radius >= spec.min_radius)) {
            throw ArgumentError("lesion radii must satisfy 1 <= min <= max");
        }
        if (2.0 * spec.max_radius + 4.0 > image_size) throw ArgumentError("lesions do not fit the image");
    }
    if (image_size < 8 || num_samples < 0) throw ArgumentError("invalid synthetic world size");
}

const SampleTruth& GroundTruthStore::get(const std::string& id) const {
    const auto it = truth_.find(id);
    if (it == truth_.end()) throw ArgumentError("no ground truth for sample " + id);
    return it->second;
}

SynthDataset generate_synthetic_dataset(const SynthWorldConfig& config) {
    config.validate();
    const core::ClassRegistry registry(config.class_names);
    const std::size_t k = registry.size();
    const int size = config.image_size;

    SynthDataset out;
    out.manifest.registry = registry;
    out.manifest.split = core::SplitTag::train;
    out.images.reserve(static_cast<std::size_t>(config.num_samples));

    const int id_width = std::max<int>(5, static_cast<int>(std::to_string(config.num_samples).size()));
    for (int i = 0; i < config.num_samples; ++i) {
        core::CounterRng rng(core::derive_seed(config.seed, static_cast<std::uint64_t>(i)));
        std::string id = std::to_string(i);
        id = "s" + std::string(static_cast<std::size_t>(id_width) - id.size(), '0') + id;

        SampleTruth truth;
        for (std::size_t c = 0; c < k; ++c) {
            if (rng.bernoulli(config.class_frequencies[c])) truth.present.insert(static_cast<core::ClassIndex>(c));
        }
        truth.background = make_background(config.background, size, rng);

        const std::vector<core::ClassIndex> present(truth.present.begin(), truth.present.end());
        std::map<std::pair<core::ClassIndex, core::ClassIndex>, bool> wants_overlap;
        for (std::size_t a = 0; a < present.size(); ++a) {
            for (std::size_t b = a + 1; b < present.size(); ++b) {
                wants_overlap[{present[a], present[b]}] = rng.bernoulli(config.entangle(present[a], present[b]));
            }
        }

        std::map<core::ClassIndex, Placement> placed;
        for (core::ClassIndex c : present) {
            const auto& spec = config.lesions[static_cast<std::size_t>(c)];
            std::optional<core::ClassIndex> anchor;
            for (const auto& [p, _] : placed) {
                if (wants_overlap[{p, c}]) {
                    anchor = p;
                    break;
                }
            }
            const double margin = std::ceil(spec.max_radius) + 1.0;
            Placement best;
            cam::InpaintMask best_mask;
            std::vector<std::string> violations;
            for (int attempt = 0; attempt <= config.placement_retries; ++attempt) {
                Placement p;
                p.rx = rng.uniform(spec.min_radius, spec.max_radius);
                p.ry = p.rx * rng.uniform(0.7, 1.0);
                p.horizontal = rng.bernoulli(0.5);
                if (anchor) {
                    const auto& a = placed[*anchor];
                    const double reach = 0.6 * std::min(a.rx, p.rx);
                    p.cx = std::clamp(a.cx + rng.uniform(-reach, reach), margin, size - 1 - margin);
                    p.cy = std::clamp(a.cy + rng.uniform(-reach, reach), margin, size - 1 - margin);
                } else {
                    p.cx = rng.uniform(margin, size - 1 - margin);
                    p.cy = rng.uniform(margin, size - 1 - margin);
                }
                auto mask = draw(spec, p, size);
                violations.clear();
                for (const auto& [q, _] : placed) {
                    const bool want = wants_overlap[{q, c}];
                    if (overlaps(mask, truth.lesion_masks[q]) != want) {
                        violations.push_back(registry.name(q) + "/" + registry.name(c) +
                                             (want ? " overlap not realized" : " unintended overlap"));
                    }
                }
                best = p;
                best_mask = std::move(mask);
                if (violations.empty()) break;
            }
            for (const auto& v : violations) {
                truth.degradations.push_back(v);
                out.degradation_log.push_back(id + ": " + v);
            }
            placed[c] = best;
            truth.lesion_masks[c] = std::move(best_mask);
        }
        for (std::size_t a = 0; a < present.size(); ++a) {
            for (std::size_t b = a + 1; b < present.size(); ++b) {
                if (overlaps(truth.lesion_masks[present[a]], truth.lesion_masks[present[b]])) {
                    truth.overlapping.insert({present[a], present[b]});
                }
            }
        }

        core::ImageTensor image(size, size, 1);
        for (std::size_t px = 0; px < image.data().size(); ++px) {
            double v = truth.background.data()[px];
            for (const auto& [c, mask] : truth.lesion_masks) {
                if (mask.bits()[px]) v += config.lesions[static_cast<std::size_t>(c)].intensity;
            }
            image.data()[px] = quantize(v);
        }

        core::SampleRecord record;
        record.id = id;
        record.image_path = "images/" + id + ".png";
        record.labels = core::LabelVector::from_set(k, truth.present);
        out.manifest.records.push_back(std::move(record));
        out.images.push_back(std::move(image));
        out.truth.put(id, std::move(truth));
    }
    return out;
}

void GroundTruthStore::save(const std::filesystem::path& dir, const core::ClassRegistry& registry) const {
    std::filesystem::create_directories(dir / "masks");
    std::filesystem::create_directories(dir / "backgrounds");
    for (const auto& [id, truth] : truth_) {
        nlohmann::ordered_json j;
        std::vector<std::string> present;
        nlohmann::ordered_json masks = nlohmann::ordered_json::object();
        for (core::ClassIndex c : truth.present) {
            present.push_back(registry.name(c));
            const std::string rel = "masks/" + id + "__" + std::to_string(c) + ".png";
            cam::write_mask_png(dir / rel, truth.lesion_masks.at(c));
            masks[registry.name(c)] = rel;
        }
        const std::string bg_rel = "backgrounds/" + id + ".png";
        core::write_png(dir / bg_rel, truth.background);
        j["present"] = present;
        j["masks"] = masks;
        j["background"] = bg_rel;
        auto pairs = nlohmann::ordered_json::array();
        for (const auto& [a, b] : truth.overlapping) pairs.push_back({registry.name(a), registry.name(b)});
        j["overlapping"] = pairs;
        j["degradations"] = truth.degradations;
        std::ofstream out(dir / (id + ".json"));
        if (!out) throw IoError("cannot write ground truth for " + id);
        out << j.dump() << '\n';
    }
}

GroundTruthStore GroundTruthStore::load(const std::filesystem::path& dir, const core::ClassRegistry& registry) {
    if (!std::filesystem::is_directory(dir)) throw LoadError("ground truth directory not found: " + dir.string());
    GroundTruthStore store;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        const auto j = nlohmann::json::parse(in);
        SampleTruth truth;
        for (const auto& name : j.at("present")) truth.present.insert(registry.index_of(name.get<std::string>()));
        for (const auto& [name, rel] : j.at("masks").items()) {
            int h = 0, w = 0;
            const auto bits = core::read_mask_png(dir / rel.get<std::string>(), h, w);
            cam::InpaintMask mask(h, w);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) mask.set(y, x, bits[static_cast<std::size_t>(y) * w + x]);
            truth.lesion_masks[registry.index_of(name)] = std::move(mask);
        }
        truth.background = core::read_png(dir / j.at("background").get<std::string>()).to_gray();
        for (const auto& pair : j.at("overlapping")) {
            truth.overlapping.insert({registry.index_of(pair.at(0).get<std::string>()),
                                      registry.index_of(pair.at(1).get<std::string>())});
        }
        truth.degradations = j.at("degradations").get<std::vector<std::string>>();
        store.put(file.stem().string(), std::move(truth));
    }
    return store;
}

void write_synthetic_dataset(SynthDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        core::write_png(dir / dataset.manifest.records[i].image_path, dataset.images[i]);
    }
    dataset.manifest.base_dir = dir;
    core::write_manifest(dir / "manifest.csv", dataset.manifest);
    core::write_registry(dir / "registry.json", dataset.manifest.registry);
    dataset.truth.save(dir / "groundtruth", dataset.manifest.registry);
    std::ofstream log(dir / "degradations.txt");
    for (const auto& line : dataset.degradation_log) log << line << '\n';
}

void preload(core::ImageCache& cache, const SynthDataset& dataset) {
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        cache.put(dataset.manifest.resolve(dataset.manifest.records[i]), dataset.images[i]);
    }
}

core::ImageTensor oracle_inpaint(const core::ImageTensor& image, const cam::InpaintMask& mask, const SampleTruth& truth) {
    if (!mask.matches(image) || !truth.background.same_shape(image)) {
        throw ArgumentError("oracle_inpaint: image, mask and background shapes differ");
    }
    core::ImageTensor out = image;
    const auto& bits = mask.bits();
    const std::size_t channels = static_cast<std::size_t>(image.channels());
    for (std::size_t px = 0; px < bits.size(); ++px) {
        if (!bits[px]) continue;
        for (std::size_t c = 0; c < channels; ++c) {
            out.data()[px * channels + c] = truth.background.data()[px * channels + c];
        }
    }
    return out;
}

lkg::EntanglementMatrix ground_truth_entanglement(const GroundTruthStore& truth, const core::ClassRegistry& registry) {
    const std::size_t k = registry.size();
    std::vector<double> co(k * k, 0.0), over(k * k, 0.0);
    for (const auto& [id, sample] : truth.all()) {
        const std::vector<core::ClassIndex> present(sample.present.begin(), sample.present.end());
        for (std::size_t a = 0; a < present.size(); ++a) {
            for (std::size_t b = a + 1; b < present.size(); ++b) {
                const auto i = static_cast<std::size_t>(present[a]);
                const auto j = static_cast<std::size_t>(present[b]);
                co[i * k + j] += 1.0;
                if (sample.overlapping.count({present[a], present[b]})) over[i * k + j] += 1.0;
            }
        }
    }
    auto m = lkg::EntanglementMatrix::zeros(registry, lkg::MatrixProvenance::synthetic_ground_truth);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double score = co[i * k + j] > 0.0 ? over[i * k + j] / co[i * k + j] : 0.0;
            m.set(static_cast<core::ClassIndex>(i), static_cast<core::ClassIndex>(j), score);
        }
    }
    return m;
}

}  // namespace tailaug::synth
