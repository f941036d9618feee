#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcmem/autoencoder.hpp"
#include "lcmem/types.hpp"

namespace lcmem {

struct CorpusSpec {
    int n_datasets = 3;
    int identities_per_dataset = 200;
    int images_per_identity = 5;
    double intra_identity_noise_scale = 0.05;
    double inter_identity_separation = 0.25;
    uint64_t seed = 42;

    int image_height = 64;
    int image_width = 64;

    void validate() const;
};

struct DatasetStats {
    double latent_mean = 0.0;
    double latent_std = 1.0;
};

struct Corpus {
    CorpusSpec spec;
    std::vector<ImageSample> images;
    std::vector<size_t> train, val, test; // indices into images, identity-disjoint
    std::vector<DatasetStats> stats;      // per dataset, from train-split latents

    const std::vector<size_t>& split(const std::string& name) const;
};

// Deterministic identity-structured corpus. Each identity owns a prototype
// made of a low-frequency smooth field plus a pooling-invisible Walsh code
// whose amplitude guarantees the pairwise mean pixel distance between any
// two prototypes is >= inter_identity_separation. Images perturb the smooth
// component with small shifts and add clamped Gaussian pixel noise.
Corpus generate_corpus(const CorpusSpec& spec);

// Prototype image for one identity (no shift, no noise); used by oracles.
ImageSample identity_prototype(const CorpusSpec& spec, int dataset, int local_identity);

// Latent pipeline: encode then normalize with the dataset's train statistics
// to mean 0 / std 0.5 (the scale the model is trained at).
LatentSample normalized_latent(const ToyAutoencoder& ae, const ImageSample& x,
                               const DatasetStats& stats);

// One container file per split plus a JSON manifest with the spec, split
// sizes and per-dataset latent stats.
void export_corpus(const Corpus& corpus, const std::string& dir);
Corpus import_corpus(const std::string& dir);

} // namespace lcmem
