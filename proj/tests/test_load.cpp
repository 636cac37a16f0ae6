#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "gsstex/load_descriptor.hpp"

using gsstex::GrayImage;

namespace {

GrayImage ramp(std::size_t n, double angle) {
    GrayImage img(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) img(x, y) = 3.0 * (std::cos(angle) * x + std::sin(angle) * y);
    return img;
}

GrayImage texture(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    GrayImage img(n, n);
    for (double& v : img.pixels()) v = u(rng);
    return gsstex::convolve(img, gsstex::gaussian_kernel(1.3));
}

double angle_gap(double a, double b) {
    const double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
    return std::min(d, 2.0 * std::numbers::pi - d);
}

}  // namespace

TEST(LoadOrientation, RampDirections) {
    const double pi = std::numbers::pi;
    for (double a : {0.0, pi / 6, pi / 2, pi, 3 * pi / 2, 5.5})
        EXPECT_LT(angle_gap(gsstex::estimate_orientation(ramp(40, a), 20, 20, 13), a), 1e-9) << a;
}

TEST(LoadOrientation, FlatPatchGivesZero) {
    EXPECT_EQ(gsstex::estimate_orientation(GrayImage(30, 30, 9.0), 15, 15, 13), 0.0);
}

TEST(LoadDescriptor, ConstantPatchHistogram) {
    const auto d = gsstex::load_at(GrayImage(30, 30, 4.0), 15, 15, {});
    ASSERT_EQ(d.size(), 236u);
    const auto top = gsstex::u2_table()[255];
    for (int ring = 0; ring < 4; ++ring)
        for (std::size_t b = 0; b < gsstex::kU2Bins; ++b)
            EXPECT_EQ(d[ring * gsstex::kU2Bins + b], b == top ? 1.0 : 0.0);
}

TEST(LoadDescriptor, RingBlocksAreNormalized) {
    const auto d = gsstex::load_at(texture(40, 1), 20, 20, {});
    for (int ring = 0; ring < 4; ++ring) {
        double s = 0.0;
        for (std::size_t b = 0; b < gsstex::kU2Bins; ++b) s += d[ring * gsstex::kU2Bins + b];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(LoadDescriptor, QuarterTurnInvariance) {
    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto img = texture(41, seed);
        const auto rot = gsstex::rotate90(img);
        const gsstex::LoadExtractor ex(gsstex::SamplingGrid{});
        const auto a = ex.describe(img, 20, 20);
        const auto b = ex.describe(rot, 20, 40 - 20);
        double l1 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
        EXPECT_LT(l1, 0.15) << seed;
    }
}

TEST(LoadDescriptor, SmallRadiusAndBoundsAreErrors) {
    EXPECT_THROW(gsstex::load_at(GrayImage(20, 20, 1.0), 10, 10, {3, 1, 1}), gsstex::ConfigError);
    EXPECT_THROW(gsstex::load_at(GrayImage(30, 30, 1.0), 12, 15, {}), gsstex::DataError);
}

TEST(DenseSample, GridCounts) {
    EXPECT_EQ(gsstex::dense_sample(70, 70, {}).size(), 968u);
    const auto single = gsstex::dense_sample(27, 27, {});
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0], (gsstex::PatchCenter{13, 13}));
    EXPECT_TRUE(gsstex::dense_sample(26, 26, {}).empty());
    EXPECT_TRUE(gsstex::dense_sample(10, 10, {}).empty());
    const auto c = gsstex::dense_sample(70, 70, {});
    EXPECT_EQ(c.front(), (gsstex::PatchCenter{13, 13}));
    EXPECT_EQ(c[1], (gsstex::PatchCenter{14, 13}));
    EXPECT_EQ(c.back(), (gsstex::PatchCenter{56, 55}));
}

TEST(ExtractAll, StackCountAndProvenance) {
    const auto stack = gsstex::build_scale_stack(texture(70, 3), {1.5, 7});
    const auto set = gsstex::extract_all(stack, {});
    EXPECT_EQ(set.size(), 7744u);
    EXPECT_EQ(set.dim(), 236u);
    EXPECT_EQ(set.provenance()[968], (gsstex::Provenance{1, 13, 13}));
    const gsstex::LoadExtractor ex(gsstex::SamplingGrid{});
    const auto direct = ex.describe(stack.levels[2], 40, 21);
    const auto it = std::find(set.provenance().begin(), set.provenance().end(), gsstex::Provenance{2, 40, 21});
    ASSERT_NE(it, set.provenance().end());
    const auto row = set.row(static_cast<std::size_t>(it - set.provenance().begin()));
    for (std::size_t i = 0; i < 236; ++i) EXPECT_EQ(row[i], direct[i]);

    const auto low = set.levels_below(2);
    EXPECT_EQ(low.size(), 2 * 968u);
    const auto parallel = gsstex::extract_all(stack, {}, 3);
    EXPECT_EQ(parallel.values(), set.values());
}

TEST(FeatureFile, RoundTripWithAndWithoutProvenance) {
    const auto stack = gsstex::build_scale_stack(texture(30, 5), {1.5, 1});
    const auto set = gsstex::extract_all<float>(stack, {13, 1, 1});
    const auto dir = std::filesystem::temp_directory_path() / "gsstex_load_test";
    std::filesystem::create_directories(dir);
    gsstex::write_feature_file(dir / "a.bin", set);
    const auto back = gsstex::read_feature_file(dir / "a.bin");
    EXPECT_EQ(back.values(), set.values());
    EXPECT_EQ(back.provenance(), set.provenance());
    gsstex::write_feature_file(dir / "b.bin", set, false);
    EXPECT_EQ(gsstex::read_feature_file(dir / "b.bin").values(), set.values());
    std::filesystem::resize_file(dir / "b.bin", 20);
    EXPECT_THROW(gsstex::read_feature_file(dir / "b.bin"), gsstex::DataError);
}
