#include <gtest/gtest.h>

#include <random>

#include "promptweight/augment.hpp"
#include "promptweight/errors.hpp"
#include "unit/test_util.hpp"

using namespace promptweight;

namespace {

RgbImage random_image(int w, int h, std::mt19937_64& rng) {
    RgbImage img(w, h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.data()) v = u(rng);
    return img;
}

}  // namespace

TEST(RgbShift, ZeroShiftIsIdentity) {
    std::mt19937_64 rng(5);
    const auto img = random_image(7, 3, rng);
    EXPECT_EQ(rgb_shift(img, {0.0, 0.0, 0.0}), img);
}

TEST(RgbShift, ClampsAtOne) {
    RgbImage img(1, 1, 0.95);
    const auto out = rgb_shift(img, {0.1, 0.0, -0.1});
    EXPECT_EQ(out.at(0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1), 0.95);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 2), 0.85);
}

TEST(RgbShift, UniformGray) {
    const auto out = rgb_shift(RgbImage(4, 2, 0.5), {0.1, -0.1, 0.0});
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) {
            EXPECT_DOUBLE_EQ(out.at(x, y, 0), 0.6);
            EXPECT_DOUBLE_EQ(out.at(x, y, 1), 0.4);
            EXPECT_DOUBLE_EQ(out.at(x, y, 2), 0.5);
        }
}

TEST(MakeVariants, DefaultCountIsFive) {
    AugmentConfig cfg;
    EXPECT_EQ(cfg.n_rand, 5);
    EXPECT_DOUBLE_EQ(cfg.shift_range, 0.1);
    EXPECT_EQ(make_variants(RgbImage(2, 2, 0.3), cfg).size(), 5u);
}

TEST(MakeVariants, ZeroRangeGivesCopies) {
    std::mt19937_64 rng(9);
    const auto img = random_image(3, 3, rng);
    AugmentConfig cfg{5, 0.0, 77};
    for (const auto& v : make_variants(img, cfg)) EXPECT_EQ(v, img);
}

TEST(MakeVariants, DeterministicUnderSeed) {
    std::mt19937_64 rng(11);
    const auto img = random_image(8, 8, rng);
    AugmentConfig cfg{5, 0.1, 1234};
    EXPECT_EQ(make_variants(img, cfg), make_variants(img, cfg));
    AugmentConfig other = cfg;
    other.rng_seed = 1235;
    EXPECT_NE(make_variants(img, cfg), make_variants(img, other));
}

TEST(MakeVariants, RejectsBadConfig) {
    EXPECT_THROW(make_variants(RgbImage(1, 1), AugmentConfig{0, 0.1, 0}), InvariantError);
    EXPECT_THROW(make_variants(RgbImage(1, 1), AugmentConfig{5, 1.5, 0}), InvariantError);
}

// Every variant is explained by one offset per channel, bounded by the range.
TEST(MakeVariants, SingleOffsetPerChannel) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const auto img = random_image(6, 5, rng);
        AugmentConfig cfg{5, 0.1, rng()};
        const auto shifts = draw_shifts(cfg);
        const auto variants = make_variants(img, cfg);
        ASSERT_EQ(variants.size(), shifts.size());
        for (std::size_t k = 0; k < variants.size(); ++k) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_LE(std::abs(shifts[k][c]), 0.1);
                for (int y = 0; y < img.height(); ++y)
                    for (int x = 0; x < img.width(); ++x) {
                        const double out = variants[k].at(x, y, c);
                        EXPECT_GE(out, 0.0);
                        EXPECT_LE(out, 1.0);
                        EXPECT_DOUBLE_EQ(out, std::clamp(img.at(x, y, c) + shifts[k][c], 0.0, 1.0));
                    }
            }
        }
    }
}

TEST(Image, PngRoundTripAtEightBits) {
    const auto dir = promptweight::testing::scratch_dir("augment_test");
    RgbImage img(3, 2);
    for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = (i * 37 % 256) / 255.0;
    save_png(dir / "x.png", img);
    const auto back = load_image(dir / "x.png");
    ASSERT_EQ(back.width(), 3);
    ASSERT_EQ(back.height(), 2);
    for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_DOUBLE_EQ(back.data()[i], img.data()[i]);
}

TEST(Image, PpmDecoding) {
    const std::string p3 = "P3\n# comment\n2 1\n255\n255 0 0  0 0 255\n";
    const auto img = decode_ppm({reinterpret_cast<const std::uint8_t*>(p3.data()), p3.size()});
    EXPECT_EQ(img.width(), 2);
    EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(img.at(1, 0, 2), 1.0);
    EXPECT_DOUBLE_EQ(img.at(1, 0, 0), 0.0);

    std::string p6 = "P6 1 1 255\n";
    p6 += static_cast<char>(51);
    p6 += static_cast<char>(102);
    p6 += static_cast<char>(255);
    const auto one = decode_ppm({reinterpret_cast<const std::uint8_t*>(p6.data()), p6.size()});
    EXPECT_DOUBLE_EQ(one.at(0, 0, 0), 0.2);
    EXPECT_DOUBLE_EQ(one.at(0, 0, 1), 0.4);

    const std::string bad = "P6 2 2 255\n";
    EXPECT_THROW(decode_ppm({reinterpret_cast<const std::uint8_t*>(bad.data()), bad.size()}), ParseError);
}
