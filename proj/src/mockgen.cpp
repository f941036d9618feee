#include "lcmem/mockgen.hpp"

#include "lcmem/augment.hpp"
#include "lcmem/errors.hpp"

namespace lcmem {

MockGenerator::MockGenerator(const Corpus& corpus, std::vector<size_t> pool, double p_mem,
                             Rng rng)
    : corpus_(&corpus), pool_(std::move(pool)), p_mem_(p_mem), rng_(rng) {
    if (p_mem < 0.0 || p_mem > 1.0)
        throw config_error("mock generator: p_mem must be in [0,1]");
    if (pool_.empty()) throw config_error("mock generator: empty image pool");
}

MockGenerator::Result MockGenerator::generate(const ImageSample& x_r) {
    if (rng_.bernoulli(p_mem_)) {
        // memorized: a lightly augmented copy of the training counterpart
        return {apply_random_augmentation(x_r, rng_, 0.3), true};
    }
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const size_t idx = pool_[rng_.uniform_int(pool_.size())];
        const ImageSample& candidate = corpus_->images[idx];
        if (candidate.identity != x_r.identity) return {candidate, false};
    }
    throw config_error("mock generator: pool has no image with a different identity");
}

} // namespace lcmem
