#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lcmem/augment.hpp"
#include "lcmem/corpus.hpp"
#include "lcmem/types.hpp"

namespace lcmem {

// Higher score = more likely the same identity.
struct ScoredPairs {
    std::vector<double> scores;
    std::vector<int> labels; // 1 positive, 0 negative

    size_t size() const { return scores.size(); }
    void validate() const;
};

// P(score_pos > score_neg) + 0.5 P(tie), via rank sums in O(n log n).
double roc_auc(const ScoredPairs& sp);

// Tie rule used everywhere: classify positive when score >= threshold;
// candidate thresholds are the observed scores plus +infinity.
struct OperatingPoint {
    double value = 0.0;     // the requested metric at the threshold
    double threshold = 0.0;
};

// Largest threshold with recall >= target, then precision there.
OperatingPoint precision_at_recall(const ScoredPairs& sp, double recall_target = 0.99);

// Same threshold selection on sensitivity, then specificity = TN/(TN+FP).
OperatingPoint specificity_at_sensitivity(const ScoredPairs& sp, double sensitivity_target = 0.99);

enum class CalibrationTarget { recall, specificity, sensitivity };

const char* calibration_target_name(CalibrationTarget t);

struct CalibrationResult {
    double threshold = 0.0;
    CalibrationTarget target = CalibrationTarget::recall;
    double target_value = 0.0;
    double achieved = 0.0;  // on the calibration split
    bool degenerate = false; // calibration set too small to be meaningful
};

// recall/sensitivity targets pick the largest feasible threshold (max
// specificity subject to the floor); specificity targets pick the smallest
// (max recall subject to the floor). The threshold is frozen for test time.
CalibrationResult calibrate(const ScoredPairs& validation, CalibrationTarget target,
                            double target_value);

// ---------------------------------------------------------------------------
// pixel-space baselines
// ---------------------------------------------------------------------------

enum class BaselineKind { mse, ncc, ssim };

// Similarity score, higher = more similar. MSE is negated; NCC is Pearson
// correlation over pixels (0 with *degenerate set for constant input);
// SSIM uses K1=0.01, K2=0.03, 8x8 sliding windows, dynamic range 1.
double baseline_score(const ImageSample& x, const ImageSample& x2, BaselineKind kind,
                      bool* degenerate = nullptr);

// ---------------------------------------------------------------------------
// re-identification pair protocol
// ---------------------------------------------------------------------------

struct ReidPair {
    size_t a, b;  // indices into corpus.images
    int label;
    int dataset;
};

// Exhaustive same-identity pairs per dataset; for every positive, one
// negative pairing the first member with a seeded uniformly drawn
// different-identity image from the same dataset.
std::vector<ReidPair> build_reid_pairs(const Corpus& corpus, const std::vector<size_t>& split,
                                       uint64_t seed);

using PairScoreFn = std::function<double(const ImageSample&, const ImageSample&)>;

ScoredPairs score_pairs(const Corpus& corpus, const std::vector<ReidPair>& pairs,
                        const PairScoreFn& scorer, int dataset_filter = -1);

// ---------------------------------------------------------------------------
// augmentation robustness benchmark
// ---------------------------------------------------------------------------

struct SweepEntry {
    AugKind kind;
    std::vector<double> strengths;
};

struct RobustnessCell {
    int dataset; // -1 = macro average over datasets
    AugKind kind;
    double strength;
    double recall;
    int pairs;
};

// For each (kind, strength): recall of positive pairs (a, augment(b)) at the
// calibrated threshold, per dataset plus an unweighted macro-average row.
// Pairs are same-identity pairs sampled per dataset (up to max_pairs), the
// copy-detection protocol when identity labels exist.
std::vector<RobustnessCell> robustness_curve(const Corpus& corpus,
                                             const std::vector<size_t>& split,
                                             const PairScoreFn& scorer,
                                             const std::vector<SweepEntry>& sweep,
                                             const CalibrationResult& calibration,
                                             uint64_t seed, int max_pairs = 1000);

} // namespace lcmem
