#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lcmem/augment.hpp"
#include "lcmem/errors.hpp"
#include "lcmem/rng.hpp"

using namespace lcmem;

namespace {

ImageSample random_image(uint64_t seed, int side = 64) {
    Rng rng(seed);
    ImageSample x;
    x.height = x.width = side;
    x.pixels.resize(static_cast<size_t>(side) * side);
    // smooth-ish content plus noise so compression has structure to lose
    for (int y = 0; y < side; ++y)
        for (int xx = 0; xx < side; ++xx)
            x.at(y, xx) = static_cast<float>(
                0.5 + 0.3 * std::sin(y * 0.21) * std::cos(xx * 0.13) + 0.15 * rng.uniform());
    for (auto& p : x.pixels) p = std::min(1.0f, std::max(0.0f, p));
    return x;
}

ImageSample constant_image(float v, int side = 64) {
    ImageSample x;
    x.height = x.width = side;
    x.pixels.assign(static_cast<size_t>(side) * side, v);
    return x;
}

double mse(const ImageSample& a, const ImageSample& b) {
    double acc = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

} // namespace

TEST_CASE("strength 0 is the identity for non-flip, non-compression kinds") {
    const ImageSample x = random_image(1);
    for (AugKind kind : {AugKind::rotation, AugKind::gaussian_blur, AugKind::additive_noise,
                         AugKind::brightness, AugKind::contrast}) {
        Rng rng(2);
        const ImageSample out = apply_augmentation(x, {kind, 0.0}, rng);
        for (size_t i = 0; i < x.pixels.size(); ++i)
            CHECK(std::fabs(out.pixels[i] - x.pixels[i]) < 1e-6f);
    }
}

TEST_CASE("flip applied twice restores the image exactly") {
    const ImageSample x = random_image(2);
    Rng rng(0);
    const ImageSample once = apply_augmentation(x, {AugKind::flip_horizontal, 1.0}, rng);
    const ImageSample twice = apply_augmentation(once, {AugKind::flip_horizontal, 1.0}, rng);
    CHECK(twice.pixels == x.pixels);
    CHECK(once.pixels != x.pixels);
}

TEST_CASE("noise at s=0.4 on a constant image has std near 0.1") {
    const ImageSample x = constant_image(0.5f);
    Rng rng(7);
    const ImageSample out = apply_augmentation(x, {AugKind::additive_noise, 0.4}, rng);
    double mean = 0;
    for (size_t i = 0; i < out.pixels.size(); ++i)
        mean += out.pixels[i] - x.pixels[i];
    mean /= static_cast<double>(out.pixels.size());
    double var = 0;
    for (size_t i = 0; i < out.pixels.size(); ++i) {
        const double d = (out.pixels[i] - x.pixels[i]) - mean;
        var += d * d;
    }
    var /= static_cast<double>(out.pixels.size());
    const double sd = std::sqrt(var);
    CHECK(sd > 0.09);
    CHECK(sd < 0.11);
}

TEST_CASE("same rng state gives identical stochastic augmentations") {
    const ImageSample x = random_image(3);
    for (AugKind kind : {AugKind::additive_noise, AugKind::brightness, AugKind::contrast}) {
        Rng a(42), b(42);
        const ImageSample out1 = apply_augmentation(x, {kind, 0.7}, a);
        const ImageSample out2 = apply_augmentation(x, {kind, 0.7}, b);
        CHECK(out1.pixels == out2.pixels);
    }
}

TEST_CASE("outputs stay in [0,1] at every strength") {
    const ImageSample x = random_image(4);
    Rng rng(9);
    for (AugKind kind : {AugKind::rotation, AugKind::flip_horizontal, AugKind::gaussian_blur,
                         AugKind::additive_noise, AugKind::brightness, AugKind::contrast,
                         AugKind::lossy_compression}) {
        for (double s : {0.1, 0.5, 1.0}) {
            const ImageSample out = apply_augmentation(x, {kind, s}, rng);
            for (float p : out.pixels) {
                CHECK(p >= 0.0f);
                CHECK(p <= 1.0f);
            }
        }
    }
}

TEST_CASE("pixel-MSE degrades monotonically for blur, noise and compression") {
    const ImageSample x = random_image(5);
    const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (AugKind kind : {AugKind::gaussian_blur, AugKind::additive_noise,
                         AugKind::lossy_compression}) {
        double prev = -1.0;
        for (double s : grid) {
            Rng rng(77); // same stream per strength: the noise field scales linearly
            const ImageSample out = apply_augmentation(x, {kind, s}, rng);
            const double m = mse(x, out);
            CHECK(m >= prev - 1e-9);
            prev = m;
        }
    }
}

TEST_CASE("unknown augmentation names are configuration errors") {
    CHECK_THROWS_AS(aug_kind_from_name("sepia"), config_error);
    CHECK(aug_kind_from_name("gaussian_blur") == AugKind::gaussian_blur);
    Rng rng(0);
    const ImageSample x = random_image(6);
    CHECK_THROWS_AS(apply_augmentation(x, {AugKind::additive_noise, 1.5}, rng), config_error);
    // SWN operates on latents, not images
    CHECK_THROWS_AS(apply_augmentation(x, {AugKind::sample_wise_normalization, 0.0}, rng),
                    input_error);
}

TEST_CASE("sample-wise normalization hits mean 0 / std 0.5") {
    Rng rng(11);
    LatentSample z;
    z.channels = 4;
    z.height = z.width = 8;
    z.values.resize(256);
    for (auto& v : z.values) v = rng.normal() * 3.0 + 1.7;

    bool degenerate = true;
    const LatentSample out = sample_wise_normalize(z, &degenerate);
    CHECK(!degenerate);
    double mean = 0;
    for (double v : out.values) mean += v;
    mean /= static_cast<double>(out.values.size());
    double var = 0;
    for (double v : out.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.values.size());
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(std::sqrt(var) - 0.5) < 1e-9);

    // fixed point: already mean 0 / std 0.5
    const LatentSample again = sample_wise_normalize(out);
    for (size_t i = 0; i < out.values.size(); ++i)
        CHECK(again.values[i] == doctest::Approx(out.values[i]).epsilon(1e-9));
}

TEST_CASE("constant latent normalizes to zero with a degenerate warning") {
    LatentSample z;
    z.channels = 4;
    z.height = z.width = 8;
    z.values.assign(256, 3.0);
    bool degenerate = false;
    const LatentSample out = sample_wise_normalize(z, &degenerate);
    CHECK(degenerate);
    for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("compression: quality 100 is lossless up to DCT roundoff") {
    const ImageSample x = random_image(12);
    const ImageSample out = lossy_compress(x, 100);
    for (size_t i = 0; i < x.pixels.size(); ++i)
        CHECK(std::fabs(out.pixels[i] - x.pixels[i]) < 1e-3f);
}

TEST_CASE("compression: quality 10 hurts more than quality 90") {
    const ImageSample x = random_image(13);
    CHECK(mse(x, lossy_compress(x, 10)) > mse(x, lossy_compress(x, 90)));
}

TEST_CASE("compression: constant images survive any quality") {
    const ImageSample x = constant_image(0.37f);
    for (int q : {1, 10, 50, 95, 100}) {
        const ImageSample out = lossy_compress(x, q);
        for (float p : out.pixels) CHECK(std::fabs(p - 0.37f) < 1e-3f);
    }
    CHECK_THROWS_AS(lossy_compress(x, 0), config_error);
    CHECK_THROWS_AS(lossy_compress(x, 101), config_error);
}

TEST_CASE("random training augmentation at scale 0 is the identity") {
    const ImageSample x = random_image(14);
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        const ImageSample out = apply_random_augmentation(x, rng, 0.0);
        CHECK(out.pixels == x.pixels);
    }
}
