#pragma once

#include <vector>

#include "lcmem/corpus.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {

// Generator with a known memorization rate, for end-to-end filter tests.
// With probability p_mem it emits a lightly augmented copy of the reference
// image (memorized = true, the ground-truth oracle flag); otherwise it emits
// a different-identity image drawn from the pool.
class MockGenerator {
public:
    MockGenerator(const Corpus& corpus, std::vector<size_t> pool, double p_mem, Rng rng);

    struct Result {
        ImageSample sample;
        bool memorized;
    };

    Result generate(const ImageSample& x_r);

private:
    const Corpus* corpus_;
    std::vector<size_t> pool_;
    double p_mem_;
    Rng rng_;
};

} // namespace lcmem
