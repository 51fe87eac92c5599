#include "tailaug/augment.hpp"

#include <fstream>

#include "tailaug/core/json_io.hpp"
#include "tailaug/core/manifest.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::augment {

void GenerationConfig::validate() const {
    if (!(cam_threshold >= 0.0 && cam_threshold <= 1.0)) throw ArgumentError("cam_threshold must lie in [0,1]");
    if (dilation_radius < 0) throw ArgumentError("dilation_radius must be >= 0");
    if (!(entangle_threshold >= 0.0 && entangle_threshold <= 1.0)) {
        throw ArgumentError("entangle_threshold must lie in [0,1]");
    }
    if (!(max_mask_fraction > 0.0 && max_mask_fraction <= 1.0)) {
        throw ArgumentError("max_mask_fraction must lie in (0,1]");
    }
    if (multiplicity < 1) throw ArgumentError("multiplicity must be >= 1");
}

core::ImageTensor DiffusionInpainter::fill(const core::SampleRecord&, const core::ImageTensor& image,
                                           const cam::InpaintMask& mask, generator::NoiseSeed seed) {
    if (image.height() != ckpt_.config().image_size || image.width() != ckpt_.config().image_size) {
        throw ArgumentError("generator resolution differs from the working resolution");
    }
    return generator::inpaint(ckpt_, image, mask, seed);
}

core::ImageTensor OracleInpainter::fill(const core::SampleRecord& record, const core::ImageTensor& image,
                                        const cam::InpaintMask& mask, generator::NoiseSeed) {
    return synth::oracle_inpaint(image, mask, truth_.get(record.id));
}

std::uint64_t noise_seed_for(std::uint64_t seed, const std::string& id, int copy) {
    return core::derive_seed(core::derive_seed(seed, id), static_cast<std::uint64_t>(copy));
}

SynthesisResult synthesize_sample(const core::SampleRecord& record, const core::ImageTensor& image,
                                  cam::ClassifierHandle& classifier, Inpainter& inpainter,
                                  lkg::KnowledgeBackend* backend, const stats::HeadTailPartition& partition,
                                  const core::ClassRegistry& registry, const GenerationConfig& cfg,
                                  generator::NoiseSeed noise) {
    cfg.validate();
    core::ClassSet heads, tails;
    for (core::ClassIndex c : record.labels.positives()) {
        if (partition.is_tail(c)) tails.insert(c);
        else if (partition.is_head(c)) heads.insert(c);
    }
    if (heads.empty()) return Skip{"no-head"};
    if (tails.empty()) return Skip{"no-tail"};

    lkg::EntanglementDecision decision;
    if (backend) {
        const auto scores = lkg::query_entanglement(*backend, heads, tails, registry);
        decision = lkg::select_inpaint_targets(record.labels, partition, scores, cfg.entangle_threshold,
                                               cfg.retention);
    } else {
        decision.inpaint_targets = heads;
    }
    if (decision.inpaint_targets.empty()) return Skip{"all-heads-retained"};

    const int radius = cam::scaled_dilation_radius(cfg.dilation_radius, image.height());
    std::vector<cam::InpaintMask> masks;
    for (core::ClassIndex target : decision.inpaint_targets) {
        const auto map = cam::grad_cam(classifier, image, target);
        if (map.all_zero()) return Skip{"empty-cam"};
        masks.push_back(cam::cam_to_mask(map, cfg.cam_threshold, radius));
    }
    auto mask = cam::union_masks(masks);
    if (mask.popcount() == 0) return Skip{"empty-cam"};
    if (mask.area_fraction() > cfg.max_mask_fraction) return Skip{"mask-too-large"};

    AugmentedSample out;
    out.image = inpainter.fill(record, image, mask, noise);
    out.labels = record.labels;
    for (core::ClassIndex target : decision.inpaint_targets) out.labels.set(target, false);
    out.provenance.source_id = record.id;
    out.provenance.inpainted_classes = decision.inpaint_targets;
    out.provenance.retained_head_classes = decision.retained_heads;
    out.provenance.mask_area_fraction = mask.area_fraction();
    out.provenance.generator_id = inpainter.id();
    out.provenance.noise_seed = noise.seed;
    out.provenance.cam_threshold = cfg.cam_threshold;
    out.provenance.validate();
    out.mask = std::move(mask);
    return out;
}

GenerationResult run_generation(const core::Manifest& manifest, core::ImageCache& cache,
                                cam::ClassifierHandle& classifier, Inpainter& inpainter,
                                lkg::KnowledgeBackend* backend, const stats::HeadTailPartition& partition,
                                const GenerationConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::ofstream provenance(out_dir / "provenance.jsonl", std::ios::binary | std::ios::trunc);
    if (ec || !provenance) throw IoError("output directory is not writable: " + out_dir.string());

    GenerationResult result;
    result.inputs = manifest.records.size();
    result.augmented.registry = manifest.registry;
    result.augmented.split = core::SplitTag::augmented;
    result.augmented.base_dir = out_dir;

    for (const auto& record : manifest.records) {
        core::ProvenanceRecord skipped;
        skipped.source_id = record.id;
        skipped.generator_id = inpainter.id();
        skipped.cam_threshold = cfg.cam_threshold;
        auto log_skip = [&](const std::string& reason, const std::string& detail = {}) {
            provenance << core::provenance_json_line(skipped, "skipped:" + reason, detail, &manifest.registry) << '\n';
            ++result.skip_counts[reason];
        };
        try {
            const auto& image = cache.get(manifest.resolve(record));
            for (int copy = 0; copy < cfg.multiplicity; ++copy) {
                const generator::NoiseSeed noise{noise_seed_for(cfg.seed, record.id, copy)};
                auto outcome = synthesize_sample(record, image, classifier, inpainter, backend, partition,
                                                 manifest.registry, cfg, noise);
                if (auto* skip = std::get_if<Skip>(&outcome)) {
                    log_skip(skip->reason);
                    break;
                }
                auto& sample = std::get<AugmentedSample>(outcome);
                core::SampleRecord out;
                out.id = record.id + "_aug" + std::to_string(copy);
                out.image_path = "images/" + out.id + ".png";
                out.labels = sample.labels;
                core::write_png(out_dir / out.image_path, sample.image);
                cache.put(result.augmented.resolve(out), std::move(sample.image));
                provenance << core::provenance_json_line(sample.provenance, "emitted", {}, &manifest.registry) << '\n';
                result.augmented.records.push_back(std::move(out));
                result.source_ids.push_back(record.id);
                ++result.emitted;
            }
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            log_skip("error", e.what());
        }
    }
    provenance.flush();
    if (!provenance) throw IoError("failed writing provenance log under " + out_dir.string());
    core::write_manifest(out_dir / "augmented.csv", result.augmented);
    return result;
}

}  // namespace tailaug::augment
