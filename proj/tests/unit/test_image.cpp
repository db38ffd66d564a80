#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "meshreg/errors.hpp"
#include "meshreg/image.hpp"
#include "test_util.hpp"

using namespace meshreg;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "meshreg_image_tests";
    fs::create_directories(dir);
    return dir / name;
}

// 3x1 8-bit grayscale PNG holding {10, 20, 30}, encoded by Pillow.
const std::vector<unsigned char> kGray3x1Png = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3e,
    0x8b, 0x4b, 0x68, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe4,
    0xe2, 0xe2, 0x02, 0x00, 0x00, 0x44, 0x00, 0x20, 0xb2, 0x02, 0x2c, 0xff, 0x00, 0x00, 0x00,
    0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

// 2x1 RGB PNG: (255, 0, 0), (10, 200, 30).
const std::vector<unsigned char> kRgb2x1Png = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x7b,
    0x40, 0xe8, 0xdd, 0x00, 0x00, 0x00, 0x0f, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8,
    0xcf, 0xc0, 0xc0, 0x75, 0x42, 0x0e, 0x00, 0x07, 0xcd, 0x01, 0xf0, 0x96, 0xb6, 0xfe, 0x26,
    0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

// 2x1 16-bit grayscale PNG: 65535, 0.
const std::vector<unsigned char> kGray16Png = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x10, 0x00, 0x00, 0x00, 0x00, 0x81,
    0xd9, 0xfc, 0x15, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8,
    0xff, 0x9f, 0x81, 0x01, 0x00, 0x06, 0xfe, 0x01, 0xff, 0xf5, 0x82, 0x55, 0xe5, 0x00, 0x00,
    0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

}  // namespace

TEST(ImageGrid, RejectsZeroDimensionAndBadData) {
    EXPECT_THROW(ImageGrid(0, 4), ConfigError);
    EXPECT_THROW(ImageGrid(3, 0), ConfigError);
    EXPECT_THROW(ImageGrid(2, 2, std::vector<double>{1, 2, 3}), ConfigError);
    EXPECT_THROW(ImageGrid(2, 1, std::vector<double>{1, NAN}), ConfigError);
    EXPECT_THROW(ImageGrid(2, 1, std::vector<double>{INFINITY, 0}), ConfigError);
}

TEST(Sample, ExactAtPixelCenters) {
    std::mt19937_64 rng(3);
    const ImageGrid img = testutil::random_image(9, 7, rng);
    EXPECT_EQ(sample(img, {3, 5}), img.data()[5 * 9 + 3]);
    for (std::size_t y = 0; y < 7; ++y)
        for (std::size_t x = 0; x < 9; ++x)
            EXPECT_EQ(sample(img, {double(x), double(y)}), img(x, y));
}

TEST(Sample, ConstantImage) {
    const ImageGrid img(6, 5, 42.5);
    std::mt19937_64 rng(1);
    for (const auto& p : testutil::random_points(100, rng, 5, 4)) EXPECT_NEAR(sample(img, p), 42.5, 1e-12);
}

TEST(Sample, RampIsReproduced) {
    const ImageGrid img = testutil::image_from(8, 8, [](double x, double y) { return 2 * x + y; });
    EXPECT_NEAR(sample(img, {1.5, 2.25}), 5.25, 1e-12);
    std::mt19937_64 rng(2);
    for (const auto& p : testutil::random_points(200, rng, 7, 7))
        if (p.x >= 1 && p.x <= 6 && p.y >= 1 && p.y <= 6) EXPECT_NEAR(sample(img, p), 2 * p.x + p.y, 1e-10);
}

TEST(Sample, QuadraticIsReproducedInInterior) {
    const ImageGrid img = testutil::image_from(10, 10, [](double x, double y) { return 0.5 * x * x - x * y + 3; });
    for (double x = 1.0; x <= 8.0; x += 0.37)
        for (double y = 1.0; y <= 8.0; y += 0.41) EXPECT_NEAR(sample(img, {x, y}), 0.5 * x * x - x * y + 3, 1e-9);
}

TEST(Sample, ClampsOutsideDomain) {
    std::mt19937_64 rng(4);
    const ImageGrid img = testutil::random_image(8, 6, rng);
    const std::vector<Point2> outside = {{-3, 2}, {9.5, 1.2}, {2.3, -0.7}, {4.4, 11}, {-1, -1}, {20, 20}};
    for (const auto& p : outside) EXPECT_EQ(sample(img, p), sample(img, img.clamp(p)));
    EXPECT_EQ(sample(img, {-5, -5}), img(0, 0));
}

TEST(SampleGradient, ConstantAndRamp) {
    const ImageGrid c(6, 6, 9.0);
    EXPECT_NEAR(sample_gradient(c, {2.3, 3.1}).x, 0.0, 1e-12);
    EXPECT_NEAR(sample_gradient(c, {2.3, 3.1}).y, 0.0, 1e-12);

    const ImageGrid img = testutil::image_from(8, 8, [](double x, double y) { return 2 * x + y; });
    const Vec2 p{3.3, 4.6};
    const Vec2 g = sample_gradient(img, p);
    EXPECT_NEAR(g.x, 2.0, 1e-6);
    EXPECT_NEAR(g.y, 1.0, 1e-6);
    const double h = 1e-4;
    EXPECT_NEAR((sample(img, {p.x + h, p.y}) - sample(img, {p.x - h, p.y})) / (2 * h), g.x, 1e-6);
    EXPECT_NEAR((sample(img, {p.x, p.y + h}) - sample(img, {p.x, p.y - h})) / (2 * h), g.y, 1e-6);
}

TEST(SampleGradient, MatchesFiniteDifferencesOnRandomImages) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    std::uniform_int_distribution<int> cell(0, 14);
    const double h = 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
        const ImageGrid img = testutil::random_image(16, 16, rng);
        for (int k = 0; k < 50; ++k) {
            const Vec2 p{cell(rng) + frac(rng), cell(rng) + frac(rng)};
            const Vec2 g = sample_gradient(img, p);
            const double fx = (sample(img, {p.x + h, p.y}) - sample(img, {p.x - h, p.y})) / (2 * h);
            const double fy = (sample(img, {p.x, p.y + h}) - sample(img, {p.x, p.y - h})) / (2 * h);
            EXPECT_LE(std::abs(g.x - fx), 1e-5 * std::max(1.0, std::abs(fx)));
            EXPECT_LE(std::abs(g.y - fy), 1e-5 * std::max(1.0, std::abs(fy)));
        }
    }
}

TEST(SampleGradient, ZeroAcrossClampedBorder) {
    std::mt19937_64 rng(5);
    const ImageGrid img = testutil::random_image(8, 8, rng);
    EXPECT_EQ(sample_gradient(img, {-0.5, 3.2}).x, 0.0);
    EXPECT_EQ(sample_gradient(img, {3.2, 7.5}).y, 0.0);
}

TEST(Msd, Examples) {
    const ImageGrid a(2, 1, std::vector<double>{0, 0});
    const ImageGrid b(2, 1, std::vector<double>{2, 4});
    EXPECT_DOUBLE_EQ(msd(a, b), 10.0);
    EXPECT_DOUBLE_EQ(msd(b, a), 10.0);
    EXPECT_EQ(msd(a, a), 0.0);
    EXPECT_THROW(msd(a, ImageGrid(1, 2)), ConfigError);
}

TEST(Msd, NonNegativeAndSymmetricOnRandomPairs) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        const ImageGrid a = testutil::random_image(7, 5, rng), b = testutil::random_image(7, 5, rng);
        EXPECT_GE(msd(a, b), 0.0);
        EXPECT_EQ(msd(a, b), msd(b, a));
        EXPECT_EQ(msd(a, a), 0.0);
    }
}

TEST(Pgm, DecodesBinaryAndAscii) {
    std::string p5 = "P5\n2 2\n255\n";
    p5 += std::string{char(0), char(255), char(128), char(64)};
    const ImageGrid img = decode_pgm(bytes_of(p5));
    ASSERT_EQ(img.width(), 2u);
    ASSERT_EQ(img.height(), 2u);
    EXPECT_EQ(std::vector<double>(img.data().begin(), img.data().end()), (std::vector<double>{0, 255, 128, 64}));

    const ImageGrid ascii = decode_pgm(bytes_of("P2\n# comment\n2 2\n255\n0 255\n128 64\n"));
    EXPECT_EQ(std::vector<double>(ascii.data().begin(), ascii.data().end()), (std::vector<double>{0, 255, 128, 64}));
}

TEST(Pgm, SixteenBitFullScale) {
    std::string p5 = "P5 2 1 65535\n";
    p5 += std::string{char(0xff), char(0xff), char(0x80), char(0x00)};
    const ImageGrid img = decode_pgm(bytes_of(p5));
    EXPECT_DOUBLE_EQ(img(0, 0), 255.0);
    EXPECT_NEAR(img(1, 0), 32768.0 * 255.0 / 65535.0, 1e-9);
    const ImageGrid ascii = decode_pgm(bytes_of("P2 1 1 65535 65535"));
    EXPECT_DOUBLE_EQ(ascii(0, 0), 255.0);
}

TEST(Pgm, MaxvalScalesToFullRange) {
    const ImageGrid img = decode_pgm(bytes_of("P2 2 1 15 15 5"));
    EXPECT_DOUBLE_EQ(img(0, 0), 255.0);
    EXPECT_DOUBLE_EQ(img(1, 0), 85.0);
}

TEST(Pgm, RejectsMalformed) {
    EXPECT_THROW(decode_pgm(bytes_of("P5 0 2 255\n")), IoError);
    EXPECT_THROW(decode_pgm(bytes_of("P5 2 2 255\nab")), IoError);
    EXPECT_THROW(decode_pgm(bytes_of("P6 1 1 255\nabc")), IoError);
    EXPECT_THROW(decode_pgm(bytes_of("P2 1 1 10 11")), IoError);
    EXPECT_THROW(decode_pgm(bytes_of("P2 1 1 70000 1")), IoError);
}

TEST(Png, DecodesGrayscale) {
    const ImageGrid img = decode_png(kGray3x1Png);
    ASSERT_EQ(img.width(), 3u);
    ASSERT_EQ(img.height(), 1u);
    EXPECT_EQ(std::vector<double>(img.data().begin(), img.data().end()), (std::vector<double>{10, 20, 30}));
}

TEST(Png, ColorConvertedByLuminance) {
    const ImageGrid img = decode_png(kRgb2x1Png);
    ASSERT_EQ(img.width(), 2u);
    // Rec. 709 luma weights: 0.2126 R + 0.7152 G + 0.0722 B.
    EXPECT_NEAR(img(0, 0), 0.2126 * 255, 1.0);
    EXPECT_NEAR(img(1, 0), 0.2126 * 10 + 0.7152 * 200 + 0.0722 * 30, 1.0);
}

TEST(Png, SixteenBitFullScale) {
    const ImageGrid img = decode_png(kGray16Png);
    EXPECT_DOUBLE_EQ(img(0, 0), 255.0);
    EXPECT_DOUBLE_EQ(img(1, 0), 0.0);
}

TEST(Png, RejectsGarbage) {
    EXPECT_THROW(decode_png(bytes_of("not a png at all")), IoError);
    auto truncated = kGray3x1Png;
    truncated.resize(40);
    EXPECT_THROW(decode_png(truncated), IoError);
}

TEST(ImageIo, RoundTripsThroughFiles) {
    std::mt19937_64 rng(6);
    std::vector<double> d(12 * 5);
    std::uniform_int_distribution<int> u(0, 255);
    for (auto& v : d) v = u(rng);
    const ImageGrid img(12, 5, d);
    for (const char* name : {"rt.pgm", "rt.png"}) {
        const fs::path p = temp_file(name);
        save_image(img, p);
        const ImageGrid back = load_image(p);
        ASSERT_TRUE(back.same_shape(img));
        EXPECT_EQ(msd(back, img), 0.0) << name;
    }
}

TEST(ImageIo, LoadSniffsContentNotExtension) {
    const fs::path p = temp_file("really_a_png.pgm");
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(kGray3x1Png.data()), kGray3x1Png.size());
    EXPECT_EQ(load_image(p)(2, 0), 30.0);
}

TEST(ImageIo, WriterRoundsAndClamps) {
    const ImageGrid img(4, 1, std::vector<double>{-20.0, 12.4, 12.6, 300.0});
    const fs::path p = temp_file("clamp.pgm");
    save_pgm(img, p);
    const ImageGrid back = load_image(p);
    EXPECT_EQ(std::vector<double>(back.data().begin(), back.data().end()), (std::vector<double>{0, 12, 13, 255}));
    EXPECT_EQ(to_byte(254.5), 255);
    EXPECT_EQ(to_byte(-0.4), 0);
}

TEST(ImageIo, ErrorsOnMissingOrUnsupported) {
    EXPECT_THROW(load_image(temp_file("does_not_exist.pgm")), IoError);
    const fs::path p = temp_file("text.pgm");
    std::ofstream(p) << "hello";
    EXPECT_THROW(load_image(p), IoError);
}

TEST(Filters, BlurPreservesConstantAndGradientOfRamp) {
    const ImageGrid c(9, 9, 17.0);
    const ImageGrid b = gaussian_blur(c, 1.5);
    for (double v : b.data()) EXPECT_NEAR(v, 17.0, 1e-12);
    const ImageGrid ramp = testutil::image_from(9, 9, [](double x, double y) { return 3 * x + 4 * y; });
    const ImageGrid g = gradient_magnitude(ramp);
    EXPECT_NEAR(g(4, 4), 5.0, 1e-12);
}
