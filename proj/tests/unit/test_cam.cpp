#include "doctest.h"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "support/toy_nets.hpp"
#include "tailaug/cam.hpp"
#include "tailaug/classifier.hpp"
#include "tailaug/core/image_io.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

using namespace tailaug;
using testing_support::OneConvNet;

namespace {

cam::ActivationMap map_from(int h, int w, std::vector<float> values) {
    cam::ActivationMap m;
    m.height = h;
    m.width = w;
    m.values = std::move(values);
    return m;
}

cam::InpaintMask random_mask(int h, int w, double p, std::uint64_t seed) {
    core::CounterRng rng(seed);
    cam::InpaintMask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(y, x, rng.bernoulli(p));
    return m;
}

/// A handle whose target layer is missing, to exercise the capability check.
class FlatHandle final : public cam::ClassifierHandle {
public:
    int num_classes() const override { return 2; }
    std::vector<float> forward(const core::ImageTensor&) override { return {0.f, 0.f}; }
    std::optional<std::string> target_layer() const override { return std::nullopt; }
    nn::Tensor activations_at(const std::string&) const override { return {}; }
    nn::Tensor gradients_at(const std::string&, core::ClassIndex) override { return {}; }
};

}  // namespace

TEST_CASE("grad_cam equals the hand-computed map on the one-convolution network") {
    OneConvNet net;
    auto model = net.build();
    const std::array<float, 4> px{0.1f, 0.4f, 0.7f, 1.0f};
    for (int k = 0; k < 2; ++k) {
        const auto map = cam::grad_cam(model, testing_support::image_2x2(px), k);
        const auto expected = net.hand_cam(px, k);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(map.values[static_cast<std::size_t>(i)] - expected[static_cast<std::size_t>(i)]) <= 1e-6);
    }
    // Worked instance for class 0: raw = [0.1, 0.2125, 0.325, 0.4375] -> [0, 1/3, 2/3, 1].
    const auto map = cam::grad_cam(model, testing_support::image_2x2(px), 0);
    CHECK(map.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(map.values[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("zero gradient gives an all-zero map") {
    OneConvNet net;
    net.head_w = {0.f, 0.f, 1.f, 1.f};
    auto model = net.build();
    const auto map = cam::grad_cam(model, testing_support::image_2x2({0.2f, 0.3f, 0.9f, 0.5f}), 0);
    CHECK(map.all_zero());
}

TEST_CASE("scaling the class logit leaves the normalized map unchanged") {
    OneConvNet a;
    OneConvNet b = a;
    b.head_w[0] *= 3.5f;
    b.head_w[1] *= 3.5f;
    auto ma = a.build();
    auto mb = b.build();
    const auto img = testing_support::image_2x2({0.9f, 0.1f, 0.6f, 0.3f});
    const auto pa = cam::grad_cam(ma, img, 0);
    const auto pb = cam::grad_cam(mb, img, 0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(pa.values[i] == doctest::Approx(pb.values[i]).epsilon(1e-5));
}

TEST_CASE("grad_cam outputs stay in [0,1] on a real classifier") {
    classifier::CnnConfig cfg;
    cfg.image_size = 16;
    cfg.num_classes = 3;
    cfg.init_seed = 9;
    classifier::ConvClassifier model(cfg);
    core::CounterRng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        core::ImageTensor img(16, 16, 1);
        for (float& v : img.data()) v = static_cast<float>(rng.uniform());
        for (int k = 0; k < 3; ++k) {
            const auto map = cam::grad_cam(model, img, k);
            CHECK(map.height == 16);
            for (float v : map.values) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    }
}

TEST_CASE("grad_cam rejects bad classes and models without a spatial layer") {
    OneConvNet net;
    auto model = net.build();
    const auto img = testing_support::image_2x2({0.f, 0.f, 0.f, 0.f});
    CHECK_THROWS_AS(cam::grad_cam(model, img, 2), ArgumentError);
    CHECK_THROWS_AS(cam::grad_cam(model, img, -1), ArgumentError);
    FlatHandle flat;
    CHECK_THROWS_AS(cam::grad_cam(flat, img, 0), CapabilityError);
}

TEST_CASE("cam_to_mask thresholds inclusively") {
    const auto m = cam::cam_to_mask(map_from(2, 2, {0.2f, 0.9f, 0.5f, 0.4f}), 0.5, 0);
    CHECK(m == cam::InpaintMask::from_rows({{0, 1}, {1, 0}}));
    CHECK(cam::cam_to_mask(map_from(3, 3, std::vector<float>(9, 0.f)), 0.5, 2).popcount() == 0);
    CHECK_THROWS_AS(cam::cam_to_mask(map_from(1, 1, {0.f}), 1.5, 0), ArgumentError);
    CHECK_THROWS_AS(cam::cam_to_mask(map_from(1, 1, {0.f}), -0.1, 0), ArgumentError);
}

TEST_CASE("a single centre bit dilates to a 3x3 block") {
    std::vector<float> v(25, 0.f);
    v[12] = 1.f;
    const auto m = cam::cam_to_mask(map_from(5, 5, v), 0.5, 1);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) CHECK(m.at(y, x) == (y >= 1 && y <= 3 && x >= 1 && x <= 3));
}

TEST_CASE("dilation matches the brute-force neighbourhood scan") {
    core::CounterRng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int h = 3 + static_cast<int>(rng.below(10));
        const int w = 3 + static_cast<int>(rng.below(10));
        const int r = static_cast<int>(rng.below(4));
        std::vector<float> values(static_cast<std::size_t>(h * w));
        for (float& v : values) v = static_cast<float>(rng.uniform());
        const auto map = map_from(h, w, values);
        const double thr = rng.uniform();
        const auto undilated = cam::cam_to_mask(map, thr, 0);
        CHECK(cam::cam_to_mask(map, thr, r) == oracle::dilate(undilated, r));
        // Raising the threshold never adds bits.
        const auto stricter = cam::cam_to_mask(map, std::min(1.0, thr + 0.2), 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) CHECK((!stricter.at(y, x) || undilated.at(y, x)));
    }
}

TEST_CASE("union is a bitwise or") {
    const auto a = cam::InpaintMask::from_rows({{1, 0}, {0, 0}});
    const auto b = cam::InpaintMask::from_rows({{0, 0}, {0, 1}});
    CHECK(cam::union_masks({a, b}) == cam::InpaintMask::from_rows({{1, 0}, {0, 1}}));
    CHECK(cam::union_masks({a}) == a);
    std::vector<cam::InpaintMask> five;
    for (std::uint64_t s = 0; s < 5; ++s) five.push_back(random_mask(8, 8, 0.2, s));
    CHECK(cam::union_masks(five) == oracle::any_of(five));
    CHECK_THROWS_AS(cam::union_masks({}), ArgumentError);
    CHECK_THROWS_AS(cam::union_masks({a, cam::InpaintMask(3, 2)}), ArgumentError);
}

TEST_CASE("area fraction is popcount over pixel count") {
    const auto m = random_mask(7, 9, 0.3, 2);
    CHECK(m.area_fraction() == static_cast<double>(m.popcount()) / 63.0);
}

TEST_CASE("dilation radius scales with resolution") {
    CHECK(cam::scaled_dilation_radius(2, 64) == 2);
    CHECK(cam::scaled_dilation_radius(2, 256) == 8);
    CHECK(cam::scaled_dilation_radius(2, 32) == 1);
    CHECK(cam::scaled_dilation_radius(0, 256) == 0);
}

TEST_CASE("cam and mask PNG dumps are readable") {
    testing_support::TempDir dir("camdump");
    cam::write_cam_png(dir / "c.png", map_from(2, 2, {0.f, 0.5f, 1.f, 0.25f}));
    const auto img = core::read_png(dir / "c.png");
    CHECK(img.at(1, 0) == doctest::Approx(1.0));
    const auto mask = cam::InpaintMask::from_rows({{1, 0, 1}});
    cam::write_mask_png(dir / "m.png", mask);
    int h = 0, w = 0;
    CHECK(core::read_mask_png(dir / "m.png", h, w) == mask.bits());
}
