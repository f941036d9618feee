#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcmem/corpus.hpp"
#include "lcmem/losses.hpp"
#include "lcmem/model.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {

struct StageConfig {
    int max_epochs = 100;
    int patience = 10;
    int batch_size = 512;
    double learning_rate = 5e-4;
};

struct TrainConfig {
    StageConfig stage1{100, 10, 512, 5e-4};
    StageConfig stage2{20, 5, 64, 8e-5};
    LossConfig loss{};
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 42;
    ModelDims dims{};
    // Scales every sampled stage-2 strength; 0 turns stage 2 into continued
    // clean training.
    double stage2_strength_scale = 1.0;
    int threads = 1;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;        // 1-based
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct TrainReport {
    std::string stage;
    std::string optimizer = "adam";
    std::vector<EpochRecord> epochs;
    int stopping_epoch = 0; // last epoch actually run
    int best_epoch = 0;     // epoch whose parameters are returned
    double best_metric = 0.0;
    double wall_seconds = 0.0;
};

struct TrainOutput {
    ModelParams params;
    TrainReport report;
};

// ---------------------------------------------------------------------------
// pair sampling
// ---------------------------------------------------------------------------

enum class PairMode { supervised, unsupervised };

// 50/50 positive/negative mix (odd remainder goes to negatives). Sampling is
// per-dataset uniform first, so smaller datasets are oversampled. Supervised
// positives are two distinct images of one identity; negatives cross
// identities and may cross datasets. Unsupervised positives pair an image
// with a lightly augmented copy of itself (strength <= 0.3) and use source
// image ids as pseudo-identities.
PairBatch sample_pairs(const Corpus& corpus, const std::vector<size_t>& split,
                       size_t batch_size, Rng& rng, PairMode mode);

// ---------------------------------------------------------------------------
// two-stage schedule
// ---------------------------------------------------------------------------

// Stage 1: clean normalized latent pairs, early stopping on validation
// re-identification AUC, best-epoch checkpoint returned.
TrainOutput train_stage1(const Corpus& corpus, const TrainConfig& cfg);

// Stage 2: every pair side is augmented in image space (rotation <= 20 deg,
// flip, blur, noise, brightness, contrast, compression q10-95), re-encoded,
// then trained at the stage-2 rate; early stopping on validation
// copy-detection recall under the strongest noise.
TrainOutput train_stage2(const ModelParams& init, const Corpus& corpus, const TrainConfig& cfg);

// Stage-1-style training except pairs are augmented like stage 2 from the
// start; exists to measure the single-stage-with-augmentation baseline.
TrainOutput train_single_stage_augmented(const Corpus& corpus, const TrainConfig& cfg);

// Deterministic epoch-wise early stopping helper: stop after `patience`
// epochs without strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    // returns true if this epoch's metric is a new best
    bool observe(double metric) {
        if (best_unset_ || metric > best_) {
            best_ = metric;
            best_unset_ = false;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        return false;
    }
    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }

private:
    int patience_;
    int since_best_ = 0;
    double best_ = 0.0;
    bool best_unset_ = true;
};

} // namespace lcmem
