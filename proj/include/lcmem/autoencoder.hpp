#pragma once

#include <array>
#include <cstdint>

#include "lcmem/types.hpp"

namespace lcmem {

// Toy stand-in for the pretrained VAE. Encode is 8x8 block average pooling
// followed by a fixed seeded 1->4 channel expansion using one column of a
// random orthonormal 4x4 matrix; decode applies the transposed column and
// nearest-neighbor upsampling, so decode(encode(x)) recovers the block
// average of x exactly. The whole map is linear.
class ToyAutoencoder {
public:
    static constexpr int kBlock = 8;
    static constexpr int kLatentChannels = 4;

    // mixing_seed = 0 selects the identity mixing (latent channel 0 holds the
    // pooled image, channels 1..3 are zero), handy for oracles.
    explicit ToyAutoencoder(uint64_t mixing_seed = kDefaultMixingSeed);

    LatentSample encode(const ImageSample& x) const;
    ImageSample decode(const LatentSample& z) const;

    int latent_dim(int image_h, int image_w) const {
        return kLatentChannels * (image_h / kBlock) * (image_w / kBlock);
    }

    const std::array<double, kLatentChannels>& mixing_column() const { return mix_; }

    static constexpr uint64_t kDefaultMixingSeed = 0x4C434D454D6D6978ULL;

private:
    std::array<double, kLatentChannels> mix_; // unit-norm column
};

} // namespace lcmem
