#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tailaug/cam.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/types.hpp"
#include "tailaug/lkg.hpp"

namespace tailaug::synth {

enum class LesionShape { ellipse, bar, ring, cross };

struct LesionSpec {
    LesionShape shape = LesionShape::ellipse;
    double min_radius = 4.0;
    double max_radius = 8.0;
    /// Added to the background inside the lesion (may be negative).
    double intensity = 0.3;
};

struct BackgroundSpec {
    double base = 0.45;
    double noise_amplitude = 0.1;
    int smoothing_passes = 3;
};

/// Long-tailed multi-label world of parametric lesions on smoothed noise.
struct SynthWorldConfig {
    std::vector<std::string> class_names;
    /// Per-class inclusion probabilities, nonincreasing by convention.
    std::vector<double> class_frequencies;
    /// Row-major K x K probability that a co-present pair is placed overlapping.
    std::vector<double> entangle_prob;
    int image_size = 64;
    BackgroundSpec background;
    std::vector<LesionSpec> lesions;
    int num_samples = 2500;
    std::uint64_t seed = 0;
    int placement_retries = 60;

    /// K = 8: six head classes and two tail classes at 2% inclusion, 64 px, 2500 samples.
    static SynthWorldConfig default_world();
    /// Distinct shape/polarity lesion specs and zero entanglement for the given names/frequencies.
    static SynthWorldConfig with_classes(std::vector<std::string> names, std::vector<double> frequencies);

    std::size_t num_classes() const { return class_names.size(); }
    double entangle(core::ClassIndex a, core::ClassIndex b) const {
        return entangle_prob[static_cast<std::size_t>(a) * num_classes() + static_cast<std::size_t>(b)];
    }
    void set_entangle(core::ClassIndex a, core::ClassIndex b, double p);
    void validate() const;
};

struct SampleTruth {
    core::ClassSet present;
    std::map<core::ClassIndex, cam::InpaintMask> lesion_masks;
    core::ImageTensor background;
    /// Pairs (a < b) whose lesion masks overlap.
    std::set<std::pair<core::ClassIndex, core::ClassIndex>> overlapping;
    std::vector<std::string> degradations;
};

class GroundTruthStore {
public:
    void put(const std::string& id, SampleTruth truth) { truth_.insert_or_assign(id, std::move(truth)); }
    /// Throws ArgumentError for unknown ids.
    const SampleTruth& get(const std::string& id) const;
    bool contains(const std::string& id) const { return truth_.count(id) != 0; }
    std::size_t size() const { return truth_.size(); }
    const std::map<std::string, SampleTruth>& all() const { return truth_; }

    /// Per-sample JSON plus mask and background PNGs under `dir`.
    void save(const std::filesystem::path& dir, const core::ClassRegistry& registry) const;
    static GroundTruthStore load(const std::filesystem::path& dir, const core::ClassRegistry& registry);

private:
    std::map<std::string, SampleTruth> truth_;
};

struct SynthDataset {
    core::Manifest manifest;
    std::vector<core::ImageTensor> images;  // parallel to manifest.records
    GroundTruthStore truth;
    std::vector<std::string> degradation_log;
};

/// Deterministic for a fixed seed. Pixel values are quantized to k/255 so the
/// dataset survives a PNG round trip bit-exactly.
SynthDataset generate_synthetic_dataset(const SynthWorldConfig& config);

/// Writes images/, manifest.csv, registry.json, groundtruth/ and degradations.txt
/// under `dir`, and points the dataset's manifest base_dir at it.
void write_synthetic_dataset(SynthDataset& dataset, const std::filesystem::path& dir);

/// Makes the dataset's images available to `cache` without touching disk.
void preload(core::ImageCache& cache, const SynthDataset& dataset);

/// Masked pixels take the pristine background; the rest is unchanged.
core::ImageTensor oracle_inpaint(const core::ImageTensor& image, const cam::InpaintMask& mask, const SampleTruth& truth);

/// Per-pair overlap frequency among samples where both classes are present.
lkg::EntanglementMatrix ground_truth_entanglement(const GroundTruthStore& truth, const core::ClassRegistry& registry);

}  // namespace tailaug::synth
