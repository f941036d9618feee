#pragma once

#include <cstdint>
#include <vector>

#include "lcmem/model.hpp"

namespace lcmem {

struct LossConfig {
    double alpha = 0.8;        // weight of the contrastive term
    double temperature = 0.07; // NT-Xent temperature
    bool normalize_features = true;

    void validate() const;
};

// A batch of latent pairs. In supervised mode the per-side ids are identity
// labels; in unsupervised mode they are source image ids (an augmented copy
// shares its source's id). Invariant: labels[i] == 1 iff ids match.
struct PairBatch {
    std::vector<std::vector<double>> z_a, z_b;
    std::vector<int> labels;
    std::vector<int64_t> id_a, id_b;
    std::vector<int> ds_a, ds_b;

    size_t size() const { return labels.size(); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// NT-Xent
// ---------------------------------------------------------------------------

struct NtXentResult {
    double loss = 0.0;
    std::vector<FeatureVector> dfeatures; // dL/du per input feature
    int anchors_with_positives = 0;
    bool degenerate = false; // no anchor had a positive; loss is 0
};

// Per anchor u the keys are all other batch features; each positive k+
// contributes -log(exp(u.k+/tau) / sum_i exp(u.k_i/tau)), positives are
// averaged per anchor and the batch averages over anchors that have at
// least one positive. Anchors without positives still serve as keys.
// With normalize_features the dots use unit vectors and the gradient is
// propagated through the normalization.
NtXentResult nt_xent_loss(const std::vector<FeatureVector>& features,
                          const std::vector<int64_t>& identities, const LossConfig& config,
                          int threads = 1);

// Loss only, from a precomputed similarity matrix (row-major K x K, diagonal
// ignored, temperature already applied). Exists so tests can exercise the
// softmax shift invariance directly.
double nt_xent_loss_from_sims(const std::vector<double>& sims,
                              const std::vector<int64_t>& identities, size_t k);

// ---------------------------------------------------------------------------
// binary cross-entropy, evaluated in logit space
// ---------------------------------------------------------------------------

struct BceResult {
    double loss = 0.0;
    double dlogit = 0.0; // p - y
    double p = 0.0;
};

BceResult bce_loss(double logit, int y);

// ---------------------------------------------------------------------------
// combined objective: alpha * L_contrastive + (1 - alpha) * L_classification
// ---------------------------------------------------------------------------

struct CombinedLossResult {
    double total = 0.0;
    double contrastive = 0.0;
    double classification = 0.0;
    bool contrastive_degenerate = false;
    Tensors grads; // dL_total/dparams
};

// Full forward + exact backward through both Siamese branches. Gradients are
// reduced in a fixed chunk order, so the result is bit-identical for any
// thread count.
CombinedLossResult combined_loss(const PairBatch& batch, const ModelParams& params,
                                 const LossConfig& config, int threads = 1);

} // namespace lcmem
