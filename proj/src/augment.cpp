#include "lcmem/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lcmem/errors.hpp"

namespace lcmem {
namespace {

constexpr double kPi = 3.14159265358979323846;

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

ImageSample like(const ImageSample& x) {
    ImageSample out = x;
    return out;
}

ImageSample rotate(const ImageSample& x, double degrees) {
    ImageSample out = like(x);
    const double theta = degrees * kPi / 180.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double cx = (x.width - 1) / 2.0;
    const double cy = (x.height - 1) / 2.0;
    for (int c = 0; c < x.channels; ++c) {
        for (int y = 0; y < x.height; ++y) {
            for (int xx = 0; xx < x.width; ++xx) {
                // inverse map: output pixel samples the source at -theta
                const double dx = xx - cx;
                const double dy = y - cy;
                double sx = cx + ct * dx + st * dy;
                double sy = cy - st * dx + ct * dy;
                sx = std::clamp(sx, 0.0, static_cast<double>(x.width - 1));  // edge padding
                sy = std::clamp(sy, 0.0, static_cast<double>(x.height - 1));
                const int x0 = static_cast<int>(sx);
                const int y0 = static_cast<int>(sy);
                const int x1 = std::min(x0 + 1, x.width - 1);
                const int y1 = std::min(y0 + 1, x.height - 1);
                const double fx = sx - x0;
                const double fy = sy - y0;
                const double v = x.at(y0, x0, c) * (1 - fy) * (1 - fx) +
                                 x.at(y0, x1, c) * (1 - fy) * fx +
                                 x.at(y1, x0, c) * fy * (1 - fx) +
                                 x.at(y1, x1, c) * fy * fx;
                out.at(y, xx, c) = clamp01(v);
            }
        }
    }
    return out;
}

ImageSample blur(const ImageSample& x, double sigma) {
    if (sigma <= 1e-12) return x;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    ImageSample tmp = like(x);
    ImageSample out = like(x);
    for (int c = 0; c < x.channels; ++c) {
        // horizontal pass
        for (int y = 0; y < x.height; ++y) {
            for (int xx = 0; xx < x.width; ++xx) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int sxx = std::clamp(xx + i, 0, x.width - 1);
                    acc += kernel[i + radius] * x.at(y, sxx, c);
                }
                tmp.at(y, xx, c) = static_cast<float>(acc);
            }
        }
        // vertical pass
        for (int y = 0; y < x.height; ++y) {
            for (int xx = 0; xx < x.width; ++xx) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int sy = std::clamp(y + i, 0, x.height - 1);
                    acc += kernel[i + radius] * tmp.at(sy, xx, c);
                }
                out.at(y, xx, c) = clamp01(acc);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// block-DCT codec
// ---------------------------------------------------------------------------

// Standard luminance quantization table (JPEG Annex K).
constexpr int kLumaTable[8][8] = {
    {16, 11, 10, 16, 24, 40, 51, 61},    {12, 12, 14, 19, 26, 58, 60, 55},
    {14, 13, 16, 24, 40, 57, 69, 56},    {14, 17, 22, 29, 51, 87, 80, 62},
    {18, 22, 37, 56, 68, 109, 103, 77},  {24, 35, 55, 64, 81, 104, 113, 92},
    {49, 64, 78, 87, 103, 121, 120, 101}, {72, 92, 95, 98, 112, 100, 103, 99}};

// IJG quality scaling, clamped to [1, 255].
int scaled_entry(int base, int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    return std::clamp((base * scale + 50) / 100, 1, 255);
}

struct Dct8 {
    double c[8][8]; // orthonormal DCT-II basis, c[u][x]
    Dct8() {
        for (int u = 0; u < 8; ++u) {
            const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                c[u][x] = cu * std::cos((2 * x + 1) * u * kPi / 16.0);
        }
    }
};

const Dct8& dct8() {
    static const Dct8 d;
    return d;
}

} // namespace

ImageSample lossy_compress(const ImageSample& x, int quality) {
    if (quality < 1 || quality > 100)
        throw config_error("lossy_compress: quality must be in [1,100]");
    if (x.height % 8 != 0 || x.width % 8 != 0)
        throw input_error("lossy_compress: image sides must be multiples of 8");

    // Quantizer steps in [0,1]-pixel units. The scaled table entry T' plays
    // the role of a JPEG step on 255-scaled pixels; shifting by one makes
    // the all-ones table (quality 100) an exact pass-through, and the DC
    // step is pinned to zero so constant blocks are preserved at any quality.
    double step[8][8];
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v)
            step[u][v] = (u == 0 && v == 0)
                             ? 0.0
                             : (scaled_entry(kLumaTable[u][v], quality) - 1) / 255.0;

    const auto& D = dct8();
    ImageSample out = like(x);
    double block[8][8], coef[8][8], tmp[8][8];
    for (int c = 0; c < x.channels; ++c) {
        for (int by = 0; by < x.height; by += 8) {
            for (int bx = 0; bx < x.width; bx += 8) {
                for (int y = 0; y < 8; ++y)
                    for (int xx = 0; xx < 8; ++xx)
                        block[y][xx] = x.at(by + y, bx + xx, c);
                // coef = C * block * C^T
                for (int u = 0; u < 8; ++u)
                    for (int xx = 0; xx < 8; ++xx) {
                        double acc = 0.0;
                        for (int y = 0; y < 8; ++y) acc += D.c[u][y] * block[y][xx];
                        tmp[u][xx] = acc;
                    }
                for (int u = 0; u < 8; ++u)
                    for (int v = 0; v < 8; ++v) {
                        double acc = 0.0;
                        for (int xx = 0; xx < 8; ++xx) acc += tmp[u][xx] * D.c[v][xx];
                        const double q = step[u][v];
                        coef[u][v] = q > 0.0 ? std::round(acc / q) * q : acc;
                    }
                // block = C^T * coef * C
                for (int y = 0; y < 8; ++y)
                    for (int v = 0; v < 8; ++v) {
                        double acc = 0.0;
                        for (int u = 0; u < 8; ++u) acc += D.c[u][y] * coef[u][v];
                        tmp[y][v] = acc;
                    }
                for (int y = 0; y < 8; ++y)
                    for (int xx = 0; xx < 8; ++xx) {
                        double acc = 0.0;
                        for (int v = 0; v < 8; ++v) acc += tmp[y][v] * D.c[v][xx];
                        out.at(by + y, bx + xx, c) = clamp01(acc);
                    }
            }
        }
    }
    return out;
}

const char* aug_kind_name(AugKind kind) {
    switch (kind) {
        case AugKind::rotation: return "rotation";
        case AugKind::flip_horizontal: return "flip_horizontal";
        case AugKind::gaussian_blur: return "gaussian_blur";
        case AugKind::additive_noise: return "additive_noise";
        case AugKind::brightness: return "brightness";
        case AugKind::contrast: return "contrast";
        case AugKind::lossy_compression: return "lossy_compression";
        case AugKind::sample_wise_normalization: return "sample_wise_normalization";
    }
    return "?";
}

AugKind aug_kind_from_name(const std::string& name) {
    for (AugKind k : {AugKind::rotation, AugKind::flip_horizontal, AugKind::gaussian_blur,
                      AugKind::additive_noise, AugKind::brightness, AugKind::contrast,
                      AugKind::lossy_compression, AugKind::sample_wise_normalization})
        if (name == aug_kind_name(k)) return k;
    throw config_error("unknown augmentation kind: " + name);
}

void AugmentationSpec::validate() const {
    if (strength < 0.0 || strength > 1.0)
        throw config_error("augmentation strength must be in [0,1]");
}

ImageSample apply_augmentation(const ImageSample& x, const AugmentationSpec& spec, Rng& rng) {
    spec.validate();
    const double s = spec.strength;
    switch (spec.kind) {
        case AugKind::rotation:
            return rotate(x, s * 20.0);
        case AugKind::flip_horizontal: {
            ImageSample out = like(x);
            for (int c = 0; c < x.channels; ++c)
                for (int y = 0; y < x.height; ++y)
                    for (int xx = 0; xx < x.width; ++xx)
                        out.at(y, xx, c) = x.at(y, x.width - 1 - xx, c);
            return out;
        }
        case AugKind::gaussian_blur:
            return blur(x, s * 4.0);
        case AugKind::additive_noise: {
            ImageSample out = like(x);
            const double sigma = s * 0.25;
            for (auto& p : out.pixels) p = clamp01(p + sigma * rng.normal());
            return out;
        }
        case AugKind::brightness: {
            ImageSample out = like(x);
            const double offset = rng.sign() * s * 0.5;
            for (auto& p : out.pixels) p = clamp01(p + offset);
            return out;
        }
        case AugKind::contrast: {
            ImageSample out = like(x);
            const double factor = 1.0 + rng.uniform(-0.8, 0.8) * s;
            for (auto& p : out.pixels) p = clamp01(0.5 + factor * (p - 0.5));
            return out;
        }
        case AugKind::lossy_compression: {
            const int quality = std::clamp(static_cast<int>(std::lround(95.0 - s * 85.0)), 1, 100);
            return lossy_compress(x, quality);
        }
        case AugKind::sample_wise_normalization:
            throw input_error("sample_wise_normalization operates on latents; "
                              "apply sample_wise_normalize after encoding");
    }
    throw config_error("unknown augmentation kind");
}

ImageSample apply_random_augmentation(const ImageSample& x, Rng& rng, double strength_scale) {
    static constexpr AugKind kinds[] = {
        AugKind::rotation,   AugKind::flip_horizontal, AugKind::gaussian_blur,
        AugKind::additive_noise, AugKind::brightness,  AugKind::contrast,
        AugKind::lossy_compression};
    const AugKind kind = kinds[rng.uniform_int(std::size(kinds))];
    const double s = rng.uniform() * strength_scale;
    if (kind == AugKind::flip_horizontal && s < 0.5) return x;
    if (kind == AugKind::lossy_compression && s <= 0.0) return x;
    return apply_augmentation(x, {kind, s}, rng);
}

LatentSample sample_wise_normalize(const LatentSample& z, bool* degenerate) {
    if (degenerate) *degenerate = false;
    LatentSample out = z;
    const size_t n = z.values.size();
    if (n == 0) throw input_error("sample_wise_normalize: empty latent");
    double mean = 0.0;
    for (double v : z.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) {
        for (auto& v : out.values) v = 0.0;
        if (degenerate) *degenerate = true;
        return out;
    }
    const double scale = 0.5 / std::sqrt(var);
    for (auto& v : out.values) v = (v - mean) * scale;
    return out;
}

} // namespace lcmem
