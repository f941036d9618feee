#pragma once

#include <string>

#include "lcmem/rng.hpp"
#include "lcmem/types.hpp"

namespace lcmem {

enum class AugKind {
    rotation,
    flip_horizontal,
    gaussian_blur,
    additive_noise,
    brightness,
    contrast,
    lossy_compression,
    sample_wise_normalization,
};

const char* aug_kind_name(AugKind kind);
AugKind aug_kind_from_name(const std::string& name); // throws config_error on unknown kind

struct AugmentationSpec {
    AugKind kind = AugKind::additive_noise;
    double strength = 0.0; // in [0,1]

    void validate() const;
};

// Image-space augmentation with the unified strength mapping:
//   rotation        angle = s * 20 deg (bilinear, edge padding)
//   gaussian_blur   sigma = s * 4 px
//   additive_noise  std = s * 0.25 (Gaussian, from rng)
//   brightness      offset = +/- s * 0.5 (sign from rng)
//   contrast        factor uniform in [1 - 0.8s, 1 + 0.8s] (from rng)
//   lossy_compression  quality = round(95 - s * 85)
//   flip_horizontal binary, strength ignored
// Output is clamped to [0,1]. sample_wise_normalization operates on latents
// and is rejected here (input_error); callers apply it after encoding.
ImageSample apply_augmentation(const ImageSample& x, const AugmentationSpec& spec, Rng& rng);

// One random training-style augmentation: kind uniform over the seven
// image-space kinds, strength uniform in [0, strength_scale]. Flip only
// applies when the drawn strength is >= 0.5 and compression only when it is
// > 0, so strength_scale = 0 is the identity and the schedule degrades
// smoothly. Unsupervised positives use strength_scale = 0.3.
ImageSample apply_random_augmentation(const ImageSample& x, Rng& rng, double strength_scale);

// Latent sample-wise normalization to mean 0, std 0.5 over all elements.
// A constant latent has no scale to recover: the result is all-zero and
// *degenerate (when provided) is set.
LatentSample sample_wise_normalize(const LatentSample& z, bool* degenerate = nullptr);

// In-repo block-DCT codec: 8x8 orthonormal DCT, uniform mid-tread
// quantization of AC coefficients with steps from the standard luminance
// table under IJG quality scaling, inverse DCT, clamp. DC is kept exact so
// flat regions survive any quality; quality 100 maps every step to zero
// (the all-ones table), making the roundtrip lossless up to float roundoff.
ImageSample lossy_compress(const ImageSample& x, int quality);

} // namespace lcmem
