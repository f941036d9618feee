#pragma once

#include "lcmem/autoencoder.hpp"
#include "lcmem/corpus.hpp"
#include "lcmem/model.hpp"

namespace lcmem {

// Image pair -> same-identity probability through the full inference path:
// toy encoder, per-dataset latent normalization, Siamese encoder, head.
class ModelScorer {
public:
    ModelScorer(const ModelParams& params, const ToyAutoencoder& ae,
                const std::vector<DatasetStats>& stats)
        : params_(&params), ae_(&ae), stats_(&stats) {}

    FeatureVector features(const ImageSample& x) const {
        const LatentSample z = normalized_latent(*ae_, x, stats_->at(x.dataset_id));
        return encoder_forward(*params_, z.values);
    }

    double score(const ImageSample& a, const ImageSample& b) const {
        return head_forward(*params_, features(a), features(b));
    }

    double operator()(const ImageSample& a, const ImageSample& b) const { return score(a, b); }

    const ModelParams& params() const { return *params_; }

private:
    const ModelParams* params_;
    const ToyAutoencoder* ae_;
    const std::vector<DatasetStats>* stats_;
};

} // namespace lcmem
