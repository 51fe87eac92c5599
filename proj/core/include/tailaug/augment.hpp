#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tailaug/cam.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/types.hpp"
#include "tailaug/generator.hpp"
#include "tailaug/lkg.hpp"
#include "tailaug/stats.hpp"
#include "tailaug/synth.hpp"

namespace tailaug::augment {

struct GenerationConfig {
    double cam_threshold = 0.5;
    /// Radius at 64 px; scaled with the working resolution.
    int dilation_radius = 2;
    double entangle_threshold = 0.5;
    double max_mask_fraction = 0.5;
    std::uint64_t seed = 0;
    /// Augmented copies per eligible source, each with its own noise seed.
    int multiplicity = 1;
    lkg::RetentionMode retention = lkg::RetentionMode::all_above_threshold;

    void validate() const;
};

/// Fills masked pixels of an image. Implementations must copy unmasked pixels exactly.
class Inpainter {
public:
    virtual ~Inpainter() = default;
    virtual core::ImageTensor fill(const core::SampleRecord& record, const core::ImageTensor& image,
                                   const cam::InpaintMask& mask, generator::NoiseSeed seed) = 0;
    /// Recorded as provenance.generator_id.
    virtual std::string id() const = 0;
};

class DiffusionInpainter final : public Inpainter {
public:
    explicit DiffusionInpainter(const generator::GeneratorCheckpoint& ckpt) : ckpt_(ckpt) {}
    core::ImageTensor fill(const core::SampleRecord& record, const core::ImageTensor& image,
                           const cam::InpaintMask& mask, generator::NoiseSeed seed) override;
    std::string id() const override { return ckpt_.generator_id(); }

private:
    const generator::GeneratorCheckpoint& ckpt_;
};

/// Restores the synthetic world's pristine background; stands in for a perfect generator.
class OracleInpainter final : public Inpainter {
public:
    explicit OracleInpainter(const synth::GroundTruthStore& truth) : truth_(truth) {}
    core::ImageTensor fill(const core::SampleRecord& record, const core::ImageTensor& image,
                           const cam::InpaintMask& mask, generator::NoiseSeed seed) override;
    std::string id() const override { return "oracle-background"; }

private:
    const synth::GroundTruthStore& truth_;
};

struct AugmentedSample {
    core::ImageTensor image;
    core::LabelVector labels;
    core::ProvenanceRecord provenance;
    cam::InpaintMask mask;
};

struct Skip {
    std::string reason;
};

using SynthesisResult = std::variant<AugmentedSample, Skip>;

/// LKG decision, per-target Grad-CAM masks, union, inpaint, label rewrite.
/// A null `backend` disables entanglement filtering: every present head is a target.
SynthesisResult synthesize_sample(const core::SampleRecord& record, const core::ImageTensor& image,
                                  cam::ClassifierHandle& classifier, Inpainter& inpainter,
                                  lkg::KnowledgeBackend* backend, const stats::HeadTailPartition& partition,
                                  const core::ClassRegistry& registry, const GenerationConfig& cfg,
                                  generator::NoiseSeed noise);

struct GenerationResult {
    core::Manifest augmented;
    std::size_t inputs = 0;
    std::size_t emitted = 0;
    std::map<std::string, std::size_t> skip_counts;
    /// Ids of augmented records, parallel to augmented.records, mapped to their source id.
    std::vector<std::string> source_ids;
};

/// Writes images/<id>_aug<k>.png, augmented.csv and provenance.jsonl under `out_dir`.
/// Every input record yields one provenance line per copy when emitted and one
/// line when skipped. Per-record failures are logged as "skipped:error".
/// Generated images are also placed in `cache`.
GenerationResult run_generation(const core::Manifest& manifest, core::ImageCache& cache,
                                cam::ClassifierHandle& classifier, Inpainter& inpainter,
                                lkg::KnowledgeBackend* backend, const stats::HeadTailPartition& partition,
                                const GenerationConfig& cfg, const std::filesystem::path& out_dir);

/// Noise seed for copy `copy` of record `id`.
std::uint64_t noise_seed_for(std::uint64_t seed, const std::string& id, int copy);

}  // namespace tailaug::augment
