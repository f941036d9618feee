#pragma once

#include <cstdint>
#include <vector>

namespace lcmem {

// Raster image, values in [0,1], row-major (y, x), single channel plane
// per channel appended. Default dataset shape is 64x64x1.
struct ImageSample {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<float> pixels; // height*width*channels
    int64_t identity = -1;     // -1 = unlabeled
    int dataset_id = 0;
    uint64_t image_id = 0;

    size_t size() const { return pixels.size(); }
    float& at(int y, int x, int c = 0) { return pixels[(static_cast<size_t>(c) * height + y) * width + x]; }
    float at(int y, int x, int c = 0) const { return pixels[(static_cast<size_t>(c) * height + y) * width + x]; }
};

// Encoded latent tensor, channels x height x width, row-major per channel.
// Default shape is 4x8x8.
struct LatentSample {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values; // channels*height*width
    int64_t identity = -1;
    int dataset_id = 0;
    uint64_t image_id = 0;

    size_t size() const { return values.size(); }
};

} // namespace lcmem
