#include <benchmark/benchmark.h>

#include "tailaug/cam.hpp"
#include "tailaug/classifier.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/generator.hpp"
#include "tailaug/lkg.hpp"
#include "tailaug/pil.hpp"
#include "tailaug/synth.hpp"

using namespace tailaug;

namespace {

core::ImageTensor noise_image(int size, std::uint64_t seed) {
    core::CounterRng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(size) * size);
    for (float& x : v) x = static_cast<float>(rng.uniform());
    return core::ImageTensor::from_data(size, size, 1, std::move(v));
}

classifier::CnnConfig cnn(int size) {
    classifier::CnnConfig c;
    c.image_size = size;
    c.num_classes = 8;
    return c;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
    const int channels = static_cast<int>(state.range(0));
    nn::Conv2d conv(channels, channels, 3, 7);
    nn::Tensor x(8, channels, 32, 32, 0.5f);
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

static void BM_ClassifierForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    classifier::ConvClassifier model(cnn(size));
    const auto image = noise_image(size, 1);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(image));
}
BENCHMARK(BM_ClassifierForward)->Arg(64)->Arg(128);

static void BM_GradCam(benchmark::State& state) {
    classifier::ConvClassifier model(cnn(64));
    const auto image = noise_image(64, 2);
    for (auto _ : state) benchmark::DoNotOptimize(cam::grad_cam(model, image, 3));
}
BENCHMARK(BM_GradCam);

static void BM_CamToMask(benchmark::State& state) {
    cam::ActivationMap map;
    map.height = map.width = 64;
    const auto image = noise_image(64, 3);
    map.values.assign(image.data().begin(), image.data().end());
    for (auto _ : state) benchmark::DoNotOptimize(cam::cam_to_mask(map, 0.5, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CamToMask)->Arg(0)->Arg(2)->Arg(8);

static void BM_DenoiserStep(benchmark::State& state) {
    generator::Denoiser net(16, 5);
    const int size = static_cast<int>(state.range(0));
    nn::Tensor x(1, 1, size, size, 0.1f);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, {100}, 200));
}
BENCHMARK(BM_DenoiserStep)->Arg(32)->Arg(64);

static void BM_Inpaint(benchmark::State& state) {
    generator::DiffusionConfig cfg;
    cfg.image_size = 32;
    cfg.timesteps = static_cast<int>(state.range(0));
    cfg.base_channels = 8;
    const generator::GeneratorCheckpoint ckpt(cfg, generator::Denoiser(cfg.base_channels, 1));
    const auto image = noise_image(32, 4);
    cam::InpaintMask mask(32, 32);
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) mask.set(y, x);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generator::inpaint(ckpt, image, mask, {seed++}));
}
BENCHMARK(BM_Inpaint)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_SelectInpaintTargets(benchmark::State& state) {
    const std::size_t k = 13;
    stats::HeadTailPartition part;
    core::LabelVector labels(k);
    lkg::PairScores scores;
    core::CounterRng rng(6);
    for (std::size_t c = 0; c < k; ++c) {
        const auto ci = static_cast<core::ClassIndex>(c);
        (c < 7 ? part.head : part.tail).insert(ci);
        labels.set(ci, true);
    }
    for (auto h : part.head)
        for (auto t : part.tail) scores[{h, t}] = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(lkg::select_inpaint_targets(labels, part, scores, 0.5));
}
BENCHMARK(BM_SelectInpaintTargets);

static void BM_PilEpochView(benchmark::State& state) {
    core::Manifest d_o, d_i;
    d_o.registry = d_i.registry = core::ClassRegistry({"A", "T"});
    d_i.split = core::SplitTag::augmented;
    for (int i = 0; i < 2000; ++i) d_o.records.push_back({"o" + std::to_string(i), "o.png", core::LabelVector(2)});
    for (int i = 0; i < 500; ++i) d_i.records.push_back({"i" + std::to_string(i), "i.png", core::LabelVector(2)});
    pil::PILSchedule s;
    s.total_augmented = 500;
    for (auto _ : state) benchmark::DoNotOptimize(pil::build_epoch_dataset(d_o, d_i, 5, s));
}
BENCHMARK(BM_PilEpochView);

static void BM_SynthWorld(benchmark::State& state) {
    auto world = synth::SynthWorldConfig::default_world();
    world.num_samples = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(synth::generate_synthetic_dataset(world));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SynthWorld)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
