#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli/report.hpp"
#include "cli/run_config.hpp"
#include "json.hpp"
#include "tailaug/augment.hpp"
#include "tailaug/classifier.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/manifest.hpp"
#include "tailaug/error.hpp"
#include "tailaug/generator.hpp"
#include "tailaug/lkg.hpp"
#include "tailaug/llm_backend.hpp"
#include "tailaug/pil.hpp"
#include "tailaug/stats.hpp"
#include "tailaug/synth.hpp"
#include "tailaug/trainer.hpp"

namespace tailaug::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::pair<std::string, std::string>>& subcommands() {
    static const std::vector<std::pair<std::string, std::string>> list = {
        {"stats", "class counts and head/tail partition of train_manifest"},
        {"train-gen", "train the normal-image diffusion generator"},
        {"train-classifier", "train the baseline multi-label classifier"},
        {"generate", "synthesize the augmented set D_i with provenance"},
        {"finetune", "fine-tune a classifier on D_o plus D_i"},
        {"evaluate", "per-class F1 of classifier.checkpoint on test_manifest"},
        {"report", "delta JSON, Markdown F1 table and SVG plots"},
        {"synth", "write a synthetic ground-truth world"},
        {"pipeline", "synth (if needed), train, generate, fine-tune, evaluate, report"},
    };
    return list;
}

class StageFailure : public std::runtime_error {
public:
    StageFailure(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct Context {
    RunConfig cfg;
    fs::path out;
    std::string command;
    std::ostream& log;
    json stages = json::array();
    json timings = json::object();
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file << text;
    if (!file) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw LoadError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

std::string relative_to_out(const Context& ctx, const fs::path& path) {
    return path.lexically_relative(ctx.out).generic_string();
}

void run_stage(Context& ctx, const std::string& name, const std::function<json()>& body) {
    ctx.log << "[" << name << "] start" << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    json record;
    try {
        record = body();
    } catch (const std::exception& e) {
        throw StageFailure(name, e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.timings[name] = seconds;
    json entry = {{"name", name}};
    for (auto& [k, v] : record.items()) entry[k] = v;
    ctx.stages.push_back(entry);
    ctx.log << "[" << name << "] done in " << seconds << " s" << std::endl;
}

fs::path require_path(const Context& ctx, const std::string& key) {
    const auto p = ctx.cfg.path(key);
    if (p.empty()) throw ArgumentError("config key " + key + " must be set");
    return p;
}

core::Manifest load_any_manifest(const fs::path& path, core::SplitTag split) {
    return core::load_manifest(path, core::registry_from_header(path), split);
}

core::Manifest load_train(const Context& ctx) {
    auto m = load_any_manifest(require_path(ctx, "train_manifest"), core::SplitTag::train);
    if (!m.unresolved.empty()) {
        throw LoadError(std::to_string(m.unresolved.size()) + " training images are missing, first: " +
                        m.unresolved.front());
    }
    return m;
}

core::Manifest load_test(const Context& ctx) {
    auto m = load_any_manifest(require_path(ctx, "test_manifest"), core::SplitTag::test);
    if (!m.unresolved.empty()) {
        throw LoadError(std::to_string(m.unresolved.size()) + " test images are missing, first: " +
                        m.unresolved.front());
    }
    return m;
}

stats::HeadTailPartition partition_for(const Context& ctx, const core::Manifest& manifest) {
    const auto st = stats::compute_class_stats(manifest);
    const auto tails = ctx.cfg.list("tail_classes");
    if (!tails.empty()) return stats::partition_head_tail(st, manifest.registry, stats::ExplicitTail{tails});
    return stats::partition_head_tail(st, manifest.registry, stats::FrequencyThreshold{ctx.cfg.number("tail_tau")});
}

/// Partition from the training manifest when one is configured, else from `fallback`.
stats::HeadTailPartition reference_partition(const Context& ctx, const core::Manifest& fallback) {
    if (!ctx.cfg.get("train_manifest").empty()) {
        const auto train = load_any_manifest(ctx.cfg.path("train_manifest"), core::SplitTag::train);
        if (!(train.registry == fallback.registry)) {
            throw ArgumentError("train and test manifests name different classes");
        }
        return partition_for(ctx, train);
    }
    return partition_for(ctx, fallback);
}

trainer::TrainConfig train_config(const Context& ctx, int epochs, std::uint64_t seed) {
    trainer::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = ctx.cfg.integer("train.batch_size");
    tc.learning_rate = ctx.cfg.number("train.lr");
    tc.image_size = ctx.cfg.integer("train.image_size");
    tc.seed = seed;
    const auto& loss = ctx.cfg.get("train.loss");
    if (loss == "bce") {
        tc.loss.kind = trainer::LossKind::bce;
    } else if (loss == "focal") {
        tc.loss.kind = trainer::LossKind::focal;
    } else {
        throw ArgumentError("train.loss must be bce or focal, got " + loss);
    }
    tc.loss.gamma = ctx.cfg.number("train.focal_gamma");
    tc.loss.alpha = ctx.cfg.number("train.focal_alpha");
    tc.validate();
    return tc;
}

generator::DiffusionConfig diffusion_config(const Context& ctx) {
    generator::DiffusionConfig dc;
    dc.image_size = ctx.cfg.integer("train.image_size");
    dc.timesteps = ctx.cfg.integer("gen.timesteps");
    dc.train_epochs = ctx.cfg.integer("gen.epochs");
    dc.batch_size = ctx.cfg.integer("gen.batch_size");
    dc.learning_rate = ctx.cfg.number("gen.lr");
    dc.base_channels = ctx.cfg.integer("gen.base_channels");
    dc.validate();
    return dc;
}

augment::GenerationConfig generation_config(const Context& ctx) {
    augment::GenerationConfig gc;
    gc.cam_threshold = ctx.cfg.number("aug.cam_threshold");
    gc.dilation_radius = ctx.cfg.integer("aug.dilation_radius");
    gc.entangle_threshold = ctx.cfg.number("aug.entangle_threshold");
    gc.max_mask_fraction = ctx.cfg.number("aug.max_mask_fraction");
    gc.multiplicity = ctx.cfg.integer("aug.multiplicity");
    const auto& retention = ctx.cfg.get("aug.retention");
    if (retention == "all") {
        gc.retention = lkg::RetentionMode::all_above_threshold;
    } else if (retention == "strongest") {
        gc.retention = lkg::RetentionMode::strongest_only;
    } else {
        throw ArgumentError("aug.retention must be all or strongest, got " + retention);
    }
    gc.seed = ctx.cfg.stage_seed("generate");
    gc.validate();
    return gc;
}

/// Owns whichever knowledge backends the config asks for.
struct BackendSet {
    std::unique_ptr<lkg::MatrixBackend> matrix;
    std::unique_ptr<lkg::LlmBackend> llm;
    std::unique_ptr<lkg::FallbackBackend> fallback;
    lkg::KnowledgeBackend* active = nullptr;
};

BackendSet make_backends(const Context& ctx, const core::ClassRegistry& registry) {
    BackendSet set;
    const auto& kind = ctx.cfg.get("lkg.backend");
    if (!ctx.cfg.get("lkg.matrix").empty()) {
        set.matrix = std::make_unique<lkg::MatrixBackend>(lkg::EntanglementMatrix::load(ctx.cfg.path("lkg.matrix"), registry));
    }
    if (kind == "none") return set;
    if (kind == "matrix") {
        if (!set.matrix) throw ArgumentError("lkg.backend=matrix needs lkg.matrix");
        set.active = set.matrix.get();
        return set;
    }
    if (kind == "llm") {
        lkg::LlmConfig lc;
        lc.endpoint = ctx.cfg.get("lkg.llm_endpoint");
        lc.model = ctx.cfg.get("lkg.llm_model");
        lc.api_key_env = ctx.cfg.get("lkg.llm_api_key_env");
        lc.cache_path = ctx.cfg.path("lkg.llm_cache");
        lc.max_retries = ctx.cfg.integer("lkg.llm_retries");
        lc.backoff_ms = ctx.cfg.integer("lkg.llm_backoff_ms");
        lc.min_interval_ms = ctx.cfg.integer("lkg.llm_min_interval_ms");
        set.llm = std::make_unique<lkg::LlmBackend>(lc, registry);
        if (set.matrix) {
            set.fallback = std::make_unique<lkg::FallbackBackend>(*set.llm, *set.matrix);
            set.active = set.fallback.get();
        } else {
            set.active = set.llm.get();
        }
        return set;
    }
    throw ArgumentError("lkg.backend must be matrix, llm or none, got " + kind);
}

std::string epoch_log_jsonl(const std::vector<trainer::EpochLog>& log) {
    std::string text;
    for (const auto& e : log) {
        json j = {{"epoch", e.epoch}, {"view_size", e.view_size}, {"mean_loss", e.mean_loss}};
        text += j.dump() + "\n";
    }
    return text;
}

// ---------------------------------------------------------------- stages

json stage_synth(Context& ctx) {
    auto world = synth::SynthWorldConfig::default_world();
    const auto names = ctx.cfg.list("synth.names");
    const auto freqs = ctx.cfg.list("synth.frequencies");
    if (!names.empty() || !freqs.empty()) {
        if (names.size() != freqs.size()) throw ArgumentError("synth.names and synth.frequencies differ in length");
        std::vector<double> f;
        for (const auto& s : freqs) f.push_back(std::stod(s));
        world = synth::SynthWorldConfig::with_classes(names, f);
    }
    const auto pairs = ctx.cfg.list("synth.entangle");
    if (!pairs.empty()) {
        std::fill(world.entangle_prob.begin(), world.entangle_prob.end(), 0.0);
        const core::ClassRegistry reg(world.class_names);
        for (const auto& item : pairs) {
            const auto bar = item.find('|');
            const auto eq = item.find('=');
            if (bar == std::string::npos || eq == std::string::npos || eq < bar) {
                throw ArgumentError("synth.entangle entries look like A|B=0.3, got " + item);
            }
            world.set_entangle(reg.index_of(item.substr(0, bar)), reg.index_of(item.substr(bar + 1, eq - bar - 1)),
                               std::stod(item.substr(eq + 1)));
        }
    }
    world.num_samples = ctx.cfg.integer("synth.num_samples");
    world.image_size = ctx.cfg.integer("synth.image_size");
    world.seed = ctx.cfg.stage_seed("synth");

    auto dataset = synth::generate_synthetic_dataset(world);
    const fs::path dir = ctx.out / "synth";
    synth::write_synthetic_dataset(dataset, dir);
    auto [train, test] = core::split_manifest(dataset.manifest, ctx.cfg.number("synth.train_fraction"),
                                              ctx.cfg.stage_seed("split"));
    core::write_manifest(dir / "train.csv", train);
    core::write_manifest(dir / "test.csv", test);
    synth::ground_truth_entanglement(dataset.truth, dataset.manifest.registry).save(dir / "entanglement.json");

    if (ctx.cfg.get("train_manifest").empty()) ctx.cfg.set("train_manifest", (dir / "train.csv").string());
    if (ctx.cfg.get("test_manifest").empty()) ctx.cfg.set("test_manifest", (dir / "test.csv").string());
    if (ctx.cfg.get("synth.groundtruth").empty()) ctx.cfg.set("synth.groundtruth", (dir / "groundtruth").string());
    if (ctx.cfg.get("lkg.matrix").empty()) ctx.cfg.set("lkg.matrix", (dir / "entanglement.json").string());
    return {{"samples", dataset.manifest.records.size()},
            {"train", train.records.size()},
            {"test", test.records.size()},
            {"degradations", dataset.degradation_log.size()},
            {"manifest", relative_to_out(ctx, dir / "manifest.csv")}};
}

json stage_stats(Context& ctx) {
    const auto train = load_train(ctx);
    const auto st = stats::compute_class_stats(train);
    const auto partition = partition_for(ctx, train);
    write_text(ctx.out / "stats.json", stats::stats_report_json(st, train.registry, partition) + "\n");
    std::vector<std::string> tails;
    for (auto t : partition.tail) tails.push_back(train.registry.name(t));
    for (const auto& w : partition.warnings) ctx.log << "warning: " << w << std::endl;
    return {{"total_samples", st.total_samples}, {"counts", st.counts}, {"tail", tails},
            {"warnings", partition.warnings}};
}

json stage_train_gen(Context& ctx) {
    core::Manifest normals;
    if (!ctx.cfg.get("normal_manifest").empty()) {
        normals = load_any_manifest(ctx.cfg.path("normal_manifest"), core::SplitTag::train);
    } else {
        normals = core::filter_normals(load_train(ctx));
    }
    const auto dc = diffusion_config(ctx);
    core::ImageCache cache(dc.image_size);
    generator::GeneratorTrainLog log;
    const auto ckpt = generator::train_normal_generator(normals, cache, dc, ctx.cfg.stage_seed("train-gen"), &log,
                                                        [&](int epoch, double loss) {
                                                            ctx.log << "  generator epoch " << epoch << " loss "
                                                                    << loss << std::endl;
                                                        });
    const fs::path path = ctx.out / "generator.ckpt";
    ckpt.save(path);
    ctx.cfg.set("gen.checkpoint", path.string());
    return {{"normals", normals.records.size()},
            {"generator_id", ckpt.generator_id()},
            {"epoch_mean_loss", log.epoch_mean_loss},
            {"checkpoint", relative_to_out(ctx, path)}};
}

json stage_train_classifier(Context& ctx) {
    const auto train = load_train(ctx);
    const auto tc = train_config(ctx, ctx.cfg.integer("train.epochs"), ctx.cfg.stage_seed("train-classifier"));
    core::ImageCache cache(tc.image_size);
    auto result = trainer::train_classifier(
        tc, static_cast<int>(train.registry.size()), [&](int) { return pil::build_original_dataset(train); }, cache,
        nullptr, [&](const trainer::EpochLog& e) {
            ctx.log << "  epoch " << e.epoch << " n=" << e.view_size << " loss " << e.mean_loss << std::endl;
        });
    const fs::path path = ctx.out / "classifier.ckpt";
    result.model.save(path);
    write_text(ctx.out / "train_log.jsonl", epoch_log_jsonl(result.log));
    ctx.cfg.set("classifier.checkpoint", path.string());
    return {{"epochs", tc.epochs},
            {"final_loss", result.log.back().mean_loss},
            {"checkpoint_id", result.model.checkpoint_id()},
            {"checkpoint", relative_to_out(ctx, path)}};
}

json stage_generate(Context& ctx) {
    const auto train = load_train(ctx);
    const auto partition = partition_for(ctx, train);
    auto model = classifier::ConvClassifier::load(require_path(ctx, "classifier.checkpoint"));
    const int size = ctx.cfg.integer("train.image_size");
    core::ImageCache cache(size);

    std::optional<generator::GeneratorCheckpoint> ckpt;
    std::optional<synth::GroundTruthStore> truth;
    std::unique_ptr<augment::Inpainter> inpainter;
    const auto& kind = ctx.cfg.get("gen.kind");
    if (kind == "diffusion") {
        ckpt.emplace(generator::GeneratorCheckpoint::load(require_path(ctx, "gen.checkpoint")));
        inpainter = std::make_unique<augment::DiffusionInpainter>(*ckpt);
    } else if (kind == "oracle") {
        truth.emplace(synth::GroundTruthStore::load(require_path(ctx, "synth.groundtruth"), train.registry));
        inpainter = std::make_unique<augment::OracleInpainter>(*truth);
    } else {
        throw ArgumentError("gen.kind must be diffusion or oracle, got " + kind);
    }
    auto backends = make_backends(ctx, train.registry);
    const auto gc = generation_config(ctx);
    const fs::path dir = ctx.out / "augmented";
    const auto result =
        augment::run_generation(train, cache, model, *inpainter, backends.active, partition, gc, dir);
    if (backends.llm) backends.llm->cache().save();

    const std::string source = (dir / "augmented.csv").string();
    auto sources = ctx.cfg.list("aug.sources");
    if (std::find(sources.begin(), sources.end(), source) == sources.end()) sources.push_back(source);
    std::string joined;
    for (const auto& s : sources) joined += (joined.empty() ? "" : ",") + s;
    ctx.cfg.set("aug.sources", joined);

    json skips = json::object();
    for (const auto& [reason, count] : result.skip_counts) skips[reason] = count;
    return {{"inputs", result.inputs},
            {"emitted", result.emitted},
            {"skipped", skips},
            {"inpainter", inpainter->id()},
            {"knowledge_backend", backends.active ? backends.active->name() : "none"},
            {"manifest", relative_to_out(ctx, dir / "augmented.csv")},
            {"provenance", relative_to_out(ctx, dir / "provenance.jsonl")}};
}

json stage_finetune(Context& ctx) {
    const auto train = load_train(ctx);
    std::vector<core::Manifest> parts;
    for (const auto& source : ctx.cfg.list("aug.sources")) {
        auto part = core::load_manifest(source, train.registry, core::SplitTag::augmented);
        if (!part.unresolved.empty()) throw LoadError("augmented images missing in " + source);
        parts.push_back(std::move(part));
    }
    core::Manifest d_i = core::concat_manifests(parts, core::SplitTag::augmented);
    d_i.registry = train.registry;

    const auto tc = train_config(ctx, ctx.cfg.integer("ft.epochs"), ctx.cfg.stage_seed("finetune"));
    pil::PILSchedule schedule;
    schedule.beta = ctx.cfg.number("pil.beta");
    schedule.total_augmented = static_cast<std::int64_t>(d_i.records.size());
    schedule.ordering_seed = ctx.cfg.stage_seed("pil-order");
    schedule.validate();
    const auto& mode = ctx.cfg.get("ft.schedule");
    trainer::EpochProvider provider;
    if (mode == "pil") {
        provider = [&](int epoch) { return pil::build_epoch_dataset(train, d_i, epoch, schedule); };
    } else if (mode == "mixed") {
        provider = [&](int) { return pil::build_mixed_dataset(train, d_i); };
    } else if (mode == "original") {
        provider = [&](int) { return pil::build_original_dataset(train); };
    } else {
        throw ArgumentError("ft.schedule must be pil, mixed or original, got " + mode);
    }

    auto base = classifier::ConvClassifier::load(require_path(ctx, "classifier.checkpoint"));
    if (static_cast<std::size_t>(base.num_classes()) != train.registry.size()) {
        throw ArgumentError("classifier checkpoint and manifest disagree on the class count");
    }
    const auto weights = nn::flatten_values(base.parameters());
    core::ImageCache cache(tc.image_size);
    auto result = trainer::train_classifier(tc, static_cast<int>(train.registry.size()), provider, cache, &weights,
                                            [&](const trainer::EpochLog& e) {
                                                ctx.log << "  epoch " << e.epoch << " n=" << e.view_size << " loss "
                                                        << e.mean_loss << std::endl;
                                            });
    const fs::path path = ctx.out / "finetuned.ckpt";
    result.model.save(path);
    write_text(ctx.out / "finetune_log.jsonl", epoch_log_jsonl(result.log));
    std::vector<std::size_t> view_sizes;
    for (const auto& e : result.log) view_sizes.push_back(e.view_size);
    return {{"schedule", mode},
            {"augmented_total", d_i.records.size()},
            {"view_sizes", view_sizes},
            {"final_loss", result.log.back().mean_loss},
            {"checkpoint_id", result.model.checkpoint_id()},
            {"checkpoint", relative_to_out(ctx, path)}};
}

json stage_evaluate(Context& ctx, const fs::path& checkpoint, const fs::path& report_path) {
    const auto test = load_test(ctx);
    const auto partition = reference_partition(ctx, test);
    auto model = classifier::ConvClassifier::load(checkpoint);
    core::ImageCache cache(model.config() ? model.config()->image_size : ctx.cfg.integer("train.image_size"));
    const auto report = trainer::evaluate(model, test, cache, partition, ctx.cfg.number("eval.threshold"));
    write_text(report_path, report.to_json() + "\n");
    return {{"macro_f1", report.macro_f1},
            {"head_macro_f1", report.head_macro_f1},
            {"tail_macro_f1", report.tail_macro_f1},
            {"report", relative_to_out(ctx, report_path)}};
}

void dump_cams(Context& ctx, int count) {
    const auto train = load_train(ctx);
    const auto partition = partition_for(ctx, train);
    auto model = classifier::ConvClassifier::load(require_path(ctx, "classifier.checkpoint"));
    core::ImageCache cache(ctx.cfg.integer("train.image_size"));
    const double threshold = ctx.cfg.number("aug.cam_threshold");
    const int radius = cam::scaled_dilation_radius(ctx.cfg.integer("aug.dilation_radius"), cache.working_size());
    int dumped = 0;
    for (const auto& record : train.records) {
        if (dumped >= count) break;
        core::ClassSet heads;
        for (auto c : record.labels.positives()) {
            if (partition.is_head(c)) heads.insert(c);
        }
        if (heads.empty()) continue;
        const auto& image = cache.get(train.resolve(record));
        core::write_png(ctx.out / "debug" / (record.id + "_image.png"), image);
        for (auto h : heads) {
            const auto map = cam::grad_cam(model, image, h);
            const std::string stem = record.id + "_" + train.registry.name(h);
            cam::write_cam_png(ctx.out / "debug" / (stem + "_cam.png"), map);
            cam::write_mask_png(ctx.out / "debug" / (stem + "_mask.png"), cam::cam_to_mask(map, threshold, radius));
        }
        ++dumped;
    }
}

json stage_report(Context& ctx) {
    const auto baseline = trainer::EvalReport::from_json(read_text(require_path(ctx, "report.baseline")));
    const auto treated = trainer::EvalReport::from_json(read_text(require_path(ctx, "report.treated")));
    const auto delta = trainer::compare_reports(baseline, treated);
    write_text(ctx.out / "delta.json", delta.to_json() + "\n");
    write_text(ctx.out / "report.md", "# F1 comparison\n\n" +
                                          markdown_f1_table(baseline, treated, "Baseline", "Augmented + PIL"));
    write_text(ctx.out / "f1_delta.svg", f1_delta_svg(delta, baseline.tail));
    json record = {{"macro_f1_delta", delta.macro_f1_delta},
                   {"head_macro_f1_delta", delta.head_macro_f1_delta},
                   {"tail_macro_f1_delta", delta.tail_macro_f1_delta},
                   {"delta", "delta.json"},
                   {"markdown", "report.md"}};
    if (!ctx.cfg.get("train_manifest").empty()) {
        const auto train = load_train(ctx);
        write_text(ctx.out / "class_distribution.svg",
                   class_distribution_svg(stats::compute_class_stats(train), train.registry, partition_for(ctx, train)));
    }
    if (const int n = ctx.cfg.integer("report.dump_cams"); n > 0) {
        dump_cams(ctx, n);
        record["debug_dir"] = "debug";
    }
    return record;
}

void run_pipeline(Context& ctx) {
    if (ctx.cfg.get("train_manifest").empty()) run_stage(ctx, "synth", [&] { return stage_synth(ctx); });
    run_stage(ctx, "stats", [&] { return stage_stats(ctx); });
    if (ctx.cfg.get("gen.kind") == "diffusion" && ctx.cfg.get("gen.checkpoint").empty()) {
        run_stage(ctx, "train-gen", [&] { return stage_train_gen(ctx); });
    }
    if (ctx.cfg.get("classifier.checkpoint").empty()) {
        run_stage(ctx, "train-classifier", [&] { return stage_train_classifier(ctx); });
    }
    run_stage(ctx, "generate", [&] { return stage_generate(ctx); });
    const auto baseline_ckpt = ctx.cfg.path("classifier.checkpoint");
    run_stage(ctx, "finetune", [&] { return stage_finetune(ctx); });
    run_stage(ctx, "evaluate-baseline",
              [&] { return stage_evaluate(ctx, baseline_ckpt, ctx.out / "eval_baseline.json"); });
    run_stage(ctx, "evaluate-finetuned",
              [&] { return stage_evaluate(ctx, ctx.out / "finetuned.ckpt", ctx.out / "eval_finetuned.json"); });
    ctx.cfg.set("report.baseline", (ctx.out / "eval_baseline.json").string());
    ctx.cfg.set("report.treated", (ctx.out / "eval_finetuned.json").string());
    run_stage(ctx, "report", [&] { return stage_report(ctx); });
}

void dispatch(Context& ctx) {
    const auto& c = ctx.command;
    if (c == "pipeline") return run_pipeline(ctx);
    if (c == "synth") return run_stage(ctx, c, [&] { return stage_synth(ctx); });
    if (c == "stats") return run_stage(ctx, c, [&] { return stage_stats(ctx); });
    if (c == "train-gen") return run_stage(ctx, c, [&] { return stage_train_gen(ctx); });
    if (c == "train-classifier") return run_stage(ctx, c, [&] { return stage_train_classifier(ctx); });
    if (c == "generate") return run_stage(ctx, c, [&] { return stage_generate(ctx); });
    if (c == "finetune") return run_stage(ctx, c, [&] { return stage_finetune(ctx); });
    if (c == "evaluate") {
        return run_stage(ctx, c, [&] {
            return stage_evaluate(ctx, require_path(ctx, "classifier.checkpoint"), ctx.out / "eval.json");
        });
    }
    if (c == "report") return run_stage(ctx, c, [&] { return stage_report(ctx); });
    throw std::logic_error("unhandled subcommand " + c);
}

void write_summary(Context& ctx, const std::string& status, const std::string& failed_stage,
                   const std::string& error) {
    json summary = {{"schema_version", kSummarySchemaVersion},
                    {"command", ctx.command},
                    {"status", status},
                    {"seed", ctx.cfg.u64("seed")},
                    {"stages", ctx.stages}};
    if (!failed_stage.empty()) {
        summary["failed_stage"] = failed_stage;
        summary["error"] = error;
    }
    write_text(ctx.out / "summary.json", summary.dump(2) + "\n");
    write_text(ctx.out / "timings.json", ctx.timings.dump(2) + "\n");
    write_text(ctx.out / "config.resolved.txt", ctx.cfg.dump());
}

}  // namespace

std::string usage() {
    std::ostringstream out;
    out << "usage: tailaug <subcommand> [--config FILE] [--seed N] [--out DIR] [--set key=value]...\n\n"
        << "subcommands:\n";
    for (const auto& [name, doc] : subcommands()) {
        out << "  " << name << std::string(18 - std::min<std::size_t>(name.size(), 17), ' ') << doc << '\n';
    }
    out << "\nRun `tailaug config-keys` to list every configuration key with its default.\n";
    return out.str();
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty() || args[0] == "-h" || args[0] == "--help" || args[0] == "help") {
        (args.empty() ? err : out) << usage();
        return args.empty() ? 2 : 0;
    }
    const std::string command = args[0];
    if (command == "config-keys") {
        out << RunConfig().dump();
        return 0;
    }
    const auto& known = subcommands();
    if (std::none_of(known.begin(), known.end(), [&](const auto& s) { return s.first == command; })) {
        err << "tailaug: unknown subcommand '" << command << "'\n\n" << usage();
        return 2;
    }

    CLI::App app{"tailaug " + command};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> assignments;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "run directory for artifacts");
    app.add_option("--set", assignments, "override one config key (key=value); repeatable")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help() << "\n" << usage();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "tailaug " << command << ": " << e.what() << "\n\n" << usage();
        return 2;
    }

    RunConfig config;
    try {
        if (!config_path.empty()) config = RunConfig::load(config_path);
        for (const auto& a : assignments) config.set_assignment(a);
        if (seed) config.set("seed", std::to_string(*seed));
    } catch (const Error& e) {
        err << "tailaug " << command << ": " << e.what() << '\n';
        return 2;
    }

    Context ctx{config, out_dir.empty() ? fs::path("runs") / command : fs::path(out_dir), command, out};
    try {
        fs::create_directories(ctx.out);
    } catch (const std::exception& e) {
        err << "tailaug " << command << ": cannot create output directory " << ctx.out << ": " << e.what() << '\n';
        return 1;
    }
    try {
        dispatch(ctx);
    } catch (const StageFailure& e) {
        err << "tailaug " << command << ": stage '" << e.stage() << "' failed: " << e.what() << '\n';
        try {
            write_summary(ctx, "failed", e.stage(), e.what());
        } catch (const std::exception&) {
        }
        return 1;
    }
    write_summary(ctx, "ok", "", "");
    out << "summary: " << (ctx.out / "summary.json").string() << std::endl;
    return 0;
}

}  // namespace tailaug::cli
