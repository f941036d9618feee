#include "lcmem/autoencoder.hpp"

#include <cmath>

#include "lcmem/errors.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {

ToyAutoencoder::ToyAutoencoder(uint64_t mixing_seed) {
    if (mixing_seed == 0) {
        mix_ = {1.0, 0.0, 0.0, 0.0};
        return;
    }
    // First column of a random orthonormal 4x4: a random Gaussian vector
    // normalized to unit length. Only one column is needed because the
    // source image has a single channel.
    Rng rng(mixing_seed, /*stream=*/0xA0E);
    double norm2 = 0.0;
    for (auto& m : mix_) {
        m = rng.normal();
        norm2 += m * m;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& m : mix_) m *= inv;
}

LatentSample ToyAutoencoder::encode(const ImageSample& x) const {
    if (x.channels != 1 || x.height % kBlock != 0 || x.width % kBlock != 0 ||
        x.pixels.size() != static_cast<size_t>(x.height) * x.width)
        throw input_error("toy_encode: image shape must be (8k)x(8k)x1, got " +
                          std::to_string(x.height) + "x" + std::to_string(x.width) +
                          "x" + std::to_string(x.channels));

    const int lh = x.height / kBlock;
    const int lw = x.width / kBlock;
    LatentSample z;
    z.channels = kLatentChannels;
    z.height = lh;
    z.width = lw;
    z.values.assign(static_cast<size_t>(kLatentChannels) * lh * lw, 0.0);
    z.identity = x.identity;
    z.dataset_id = x.dataset_id;
    z.image_id = x.image_id;

    const double inv_block = 1.0 / (kBlock * kBlock);
    for (int by = 0; by < lh; ++by) {
        for (int bx = 0; bx < lw; ++bx) {
            double sum = 0.0;
            for (int dy = 0; dy < kBlock; ++dy) {
                const float* row = &x.pixels[static_cast<size_t>(by * kBlock + dy) * x.width + bx * kBlock];
                for (int dx = 0; dx < kBlock; ++dx) sum += row[dx];
            }
            const double pooled = sum * inv_block;
            for (int c = 0; c < kLatentChannels; ++c)
                z.values[(static_cast<size_t>(c) * lh + by) * lw + bx] = mix_[c] * pooled;
        }
    }
    return z;
}

ImageSample ToyAutoencoder::decode(const LatentSample& z) const {
    if (z.channels != kLatentChannels ||
        z.values.size() != static_cast<size_t>(z.channels) * z.height * z.width)
        throw input_error("toy_decode: latent shape mismatch");

    ImageSample x;
    x.height = z.height * kBlock;
    x.width = z.width * kBlock;
    x.channels = 1;
    x.pixels.assign(static_cast<size_t>(x.height) * x.width, 0.0f);
    x.identity = z.identity;
    x.dataset_id = z.dataset_id;
    x.image_id = z.image_id;

    for (int by = 0; by < z.height; ++by) {
        for (int bx = 0; bx < z.width; ++bx) {
            double pooled = 0.0;
            for (int c = 0; c < kLatentChannels; ++c)
                pooled += mix_[c] * z.values[(static_cast<size_t>(c) * z.height + by) * z.width + bx];
            const auto v = static_cast<float>(pooled);
            for (int dy = 0; dy < kBlock; ++dy) {
                float* row = &x.pixels[static_cast<size_t>(by * kBlock + dy) * x.width + bx * kBlock];
                for (int dx = 0; dx < kBlock; ++dx) row[dx] = v;
            }
        }
    }
    return x;
}

} // namespace lcmem
