#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lcmem {

using FeatureVector = std::vector<double>;

// Dense Siamese encoder (input -> enc1 -> enc2 -> feature, ReLU between) and
// difference head (feature -> head_hidden -> 1, ReLU hidden). The head sees
// the element-wise absolute difference of the two branch features.
struct ModelDims {
    int input = 256;
    int enc1 = 256;
    int enc2 = 128;
    int feature = 64;
    int head_hidden = 32;

    bool operator==(const ModelDims&) const = default;
};

inline constexpr int kLayerCount = 5; // e1, e2, e3, h1, h2

// One weight/bias set per layer. Used both for values and gradients.
struct Tensors {
    std::vector<double> w[kLayerCount];
    std::vector<double> b[kLayerCount];

    void allocate(const ModelDims& dims);
    void fill(double v);
    void add_scaled(const Tensors& other, double scale);
};

struct ModelParams {
    ModelDims dims;
    Tensors values;
    Tensors grads; // zeroed between optimizer steps

    void zero_grads() { grads.fill(0.0); }
    size_t param_count() const;
    double get_param(size_t i) const;
    void set_param(size_t i, double v);
    double get_grad(size_t i) const;
    bool finite() const;

    std::vector<uint8_t> serialize() const;
    static ModelParams deserialize(const std::vector<uint8_t>& bytes);
};

ModelParams init_params(uint64_t seed, const ModelDims& dims = {});
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

// SHA-256 over the serialized parameter bytes; binds atlases to the exact
// encoder that produced them.
std::array<uint8_t, 32> param_fingerprint(const ModelParams& params);

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

struct EncoderCache {
    std::vector<double> input, a1, a2;
    bool valid = false;
};

struct HeadCache {
    std::vector<double> diff, sign, hidden;
    double logit = 0.0;
    bool valid = false;
};

// Deterministic forward pass; fills *cache (when given) with everything the
// backward pass needs. Throws input_error on a shape mismatch.
FeatureVector encoder_forward(const ModelParams& params, std::span<const double> z,
                              EncoderCache* cache = nullptr);

// p = sigmoid(head(|u - u2|)); symmetric in its arguments.
double head_forward(const ModelParams& params, const FeatureVector& u,
                    const FeatureVector& u2, HeadCache* cache = nullptr);

// Chain rule through the cached activations; contributions accumulate
// additively into `sink`. Throws state_error if the cache was never filled.
void encoder_backward(const ModelParams& params, const EncoderCache& cache,
                      std::span<const double> dfeature, Tensors& sink);

struct HeadBackwardResult {
    std::vector<double> du, du2;
};
HeadBackwardResult head_backward(const ModelParams& params, const HeadCache& cache,
                                 double dlogit, Tensors& sink);

double sigmoid(double x);

} // namespace lcmem
