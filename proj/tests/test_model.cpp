#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lcmem/errors.hpp"
#include "lcmem/io.hpp"
#include "lcmem/model.hpp"
#include "lcmem/rng.hpp"

using namespace lcmem;

namespace {

const ModelDims kTiny{12, 10, 8, 6, 4};

std::vector<double> random_input(uint64_t seed, int n) {
    Rng rng(seed);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal();
    return z;
}

// Deliberately plain re-implementation of the forward pass used as a second
// route for the oracle checks below.
std::vector<double> naive_affine(const std::vector<double>& w, const std::vector<double>& b,
                                 const std::vector<double>& x) {
    std::vector<double> y(b.size());
    for (size_t o = 0; o < b.size(); ++o) {
        y[o] = b[o];
        for (size_t i = 0; i < x.size(); ++i) y[o] += w[o * x.size() + i] * x[i];
    }
    return y;
}

std::vector<double> naive_relu(std::vector<double> v) {
    for (auto& x : v) x = std::max(0.0, x);
    return v;
}

std::vector<double> naive_encoder(const ModelParams& p, const std::vector<double>& z) {
    auto a1 = naive_relu(naive_affine(p.values.w[0], p.values.b[0], z));
    auto a2 = naive_relu(naive_affine(p.values.w[1], p.values.b[1], a1));
    return naive_affine(p.values.w[2], p.values.b[2], a2);
}

double naive_head(const ModelParams& p, const std::vector<double>& u,
                  const std::vector<double>& u2) {
    std::vector<double> diff(u.size());
    for (size_t i = 0; i < u.size(); ++i) diff[i] = std::fabs(u[i] - u2[i]);
    auto h = naive_relu(naive_affine(p.values.w[3], p.values.b[3], diff));
    const double logit = naive_affine(p.values.w[4], p.values.b[4], h)[0];
    return 1.0 / (1.0 + std::exp(-logit));
}

} // namespace

TEST_CASE("all-zero parameters map every input to the zero feature vector") {
    ModelParams p;
    p.dims = kTiny;
    p.values.allocate(kTiny);
    p.grads.allocate(kTiny);
    const auto u = encoder_forward(p, random_input(1, kTiny.input));
    for (double v : u) CHECK(v == 0.0);
}

TEST_CASE("encoder is deterministic and shape-checked") {
    const ModelParams p = init_params(3, kTiny);
    const auto z = random_input(2, kTiny.input);
    CHECK(encoder_forward(p, z) == encoder_forward(p, z));
    CHECK_THROWS_AS(encoder_forward(p, random_input(2, kTiny.input + 1)), input_error);
}

TEST_CASE("forward passes match an independent re-implementation to 1e-12") {
    const ModelParams p = init_params(17, kTiny);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto z1 = random_input(seed * 2 + 1, kTiny.input);
        const auto z2 = random_input(seed * 2 + 2, kTiny.input);
        const auto u1 = encoder_forward(p, z1);
        const auto u2 = encoder_forward(p, z2);
        const auto n1 = naive_encoder(p, z1);
        for (size_t i = 0; i < u1.size(); ++i)
            CHECK(u1[i] == doctest::Approx(n1[i]).epsilon(1e-12));
        CHECK(head_forward(p, u1, u2) == doctest::Approx(naive_head(p, u1, u2)).epsilon(1e-12));
    }
}

TEST_CASE("head collapses equal features and is exactly symmetric") {
    const ModelParams p = init_params(5, kTiny);
    const auto u = encoder_forward(p, random_input(7, kTiny.input));
    const auto u2 = encoder_forward(p, random_input(8, kTiny.input));

    // |u-u| = 0: identical probability for any such pair
    const auto w = encoder_forward(p, random_input(9, kTiny.input));
    CHECK(head_forward(p, u, u) == head_forward(p, w, w));

    // bit-exact symmetry
    CHECK(head_forward(p, u, u2) == head_forward(p, u2, u));
    auto shorter = u2;
    shorter.pop_back();
    CHECK_THROWS_AS(head_forward(p, u, shorter), input_error);
}

TEST_CASE("backward is linear in the upstream gradient") {
    const ModelParams p = init_params(11, kTiny);
    EncoderCache cache;
    encoder_forward(p, random_input(13, kTiny.input), &cache);

    Tensors zero_sink;
    zero_sink.allocate(kTiny);
    encoder_backward(p, cache, std::vector<double>(kTiny.feature, 0.0), zero_sink);
    for (int l = 0; l < 3; ++l) {
        for (double g : zero_sink.w[l]) CHECK(g == 0.0);
        for (double g : zero_sink.b[l]) CHECK(g == 0.0);
    }

    auto up = random_input(14, kTiny.feature);
    Tensors once, twice;
    once.allocate(kTiny);
    twice.allocate(kTiny);
    encoder_backward(p, cache, up, once);
    for (auto& v : up) v *= 2.0;
    encoder_backward(p, cache, up, twice);
    for (int l = 0; l < 3; ++l)
        for (size_t i = 0; i < once.w[l].size(); ++i)
            CHECK(twice.w[l][i] == doctest::Approx(2.0 * once.w[l][i]).epsilon(1e-14));

    EncoderCache stale;
    CHECK_THROWS_AS(encoder_backward(p, stale, up, once), state_error);
}

// dJ/dtheta for J = c . encoder(z) checked against central differences
TEST_CASE("encoder gradients match finite differences") {
    ModelParams p = init_params(19, kTiny);
    const auto z = random_input(23, kTiny.input);
    const auto c = random_input(29, kTiny.feature);

    EncoderCache cache;
    encoder_forward(p, z, &cache);
    Tensors analytic;
    analytic.allocate(kTiny);
    encoder_backward(p, cache, c, analytic);

    auto j_of = [&]() {
        const auto u = encoder_forward(p, z);
        double j = 0;
        for (size_t i = 0; i < u.size(); ++i) j += c[i] * u[i];
        return j;
    };

    const double eps = 1e-5;
    const size_t count = p.param_count();
    for (size_t i = 0; i < count; ++i) {
        const double orig = p.get_param(i);
        p.set_param(i, orig + eps);
        const double jp = j_of();
        p.set_param(i, orig - eps);
        const double jm = j_of();
        p.set_param(i, orig);
        const double numeric = (jp - jm) / (2 * eps);

        // head layers receive no gradient through the encoder-only objective
        ModelParams probe = p;
        probe.grads = analytic;
        const double a = probe.get_grad(i);
        const double scale = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
        CHECK(std::fabs(a - numeric) / scale < 1e-4);
    }
}

TEST_CASE("seeded init: reproducible, right spread, zero biases") {
    const ModelParams a = init_params(42, kTiny);
    const ModelParams b = init_params(42, kTiny);
    CHECK(a.serialize() == b.serialize());
    CHECK(init_params(43, kTiny).serialize() != a.serialize());

    // He-style spread on a big layer: empirical std within 15% of sqrt(2/fan_in)
    const ModelParams big = init_params(7, ModelDims{});
    double mean = 0;
    for (double w : big.values.w[0]) mean += w;
    mean /= static_cast<double>(big.values.w[0].size());
    double var = 0;
    for (double w : big.values.w[0]) var += (w - mean) * (w - mean);
    var /= static_cast<double>(big.values.w[0].size());
    const double expected = std::sqrt(2.0 / 256.0);
    CHECK(std::fabs(std::sqrt(var) - expected) / expected < 0.15);

    for (int l = 0; l < kLayerCount; ++l)
        for (double bias : big.values.b[l]) CHECK(bias == 0.0);
}

TEST_CASE("parameter files roundtrip bit-exactly and reject corruption") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "lcmem_params_test.lcmp").string();
    const ModelParams p = init_params(31, kTiny);
    save_params(p, path);
    const ModelParams back = load_params(path);
    CHECK(back.serialize() == p.serialize());
    CHECK(back.dims == p.dims);

    auto bytes = read_file(path);
    bytes[bytes.size() / 2] ^= 0x10;
    write_file(path, bytes);
    try {
        load_params(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.byte_offset > 0);
    }
    fs::remove(path);
}

TEST_CASE("fingerprint changes with any parameter change") {
    const ModelParams a = init_params(1, kTiny);
    ModelParams b = a;
    CHECK(param_fingerprint(a) == param_fingerprint(b));
    b.set_param(0, b.get_param(0) + 1e-12);
    CHECK(param_fingerprint(a) != param_fingerprint(b));
}
