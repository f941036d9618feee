#include "lcmem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lcmem/errors.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {
namespace {

struct ClassCounts {
    size_t pos = 0, neg = 0;
};

ClassCounts count_classes(const ScoredPairs& sp) {
    ClassCounts c;
    for (int l : sp.labels)
        (l == 1 ? c.pos : c.neg)++;
    return c;
}

// Sweep state: walking thresholds from high to low, classify positive at
// score >= t. Scores are processed in groups of equal value.
struct SweepPoint {
    double threshold;
    size_t tp, fp; // counts at score >= threshold
};

std::vector<SweepPoint> threshold_sweep(const ScoredPairs& sp) {
    std::vector<size_t> order(sp.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t i, size_t j) { return sp.scores[i] > sp.scores[j]; });
    std::vector<SweepPoint> points;
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double t = sp.scores[order[i]];
        while (i < order.size() && sp.scores[order[i]] == t) {
            (sp.labels[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        points.push_back({t, tp, fp});
    }
    return points;
}

} // namespace

void ScoredPairs::validate() const {
    if (scores.size() != labels.size())
        throw input_error("scored pairs: scores/labels length mismatch");
    const auto c = count_classes(*this);
    if (c.pos == 0 || c.neg == 0)
        throw metric_error("scored pairs: need at least one positive and one negative");
}

double roc_auc(const ScoredPairs& sp) {
    sp.validate();
    const auto counts = count_classes(sp);
    const size_t n = sp.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t i, size_t j) { return sp.scores[i] < sp.scores[j]; });

    // Mann-Whitney U with average ranks over ties
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && sp.scores[order[j]] == sp.scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t t = i; t < j; ++t)
            if (sp.labels[order[t]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(counts.pos);
    const double q = static_cast<double>(counts.neg);
    return (pos_rank_sum - p * (p + 1) / 2.0) / (p * q);
}

namespace {

// Largest threshold t (observed scores + inf) with recall(t) >= target.
// Returns the sweep index, or throws when the target is unreachable.
size_t recall_threshold_index(const std::vector<SweepPoint>& points, size_t total_pos,
                              double target) {
    if (target <= 0.0) throw config_error("recall target must be > 0");
    if (target > 1.0) throw metric_error("recall target " + std::to_string(target) +
                                         " is unreachable (needs > 100% recall)");
    for (size_t i = 0; i < points.size(); ++i) {
        const double recall = static_cast<double>(points[i].tp) / static_cast<double>(total_pos);
        if (recall >= target) return i;
    }
    throw metric_error("no threshold reaches the recall target");
}

} // namespace

OperatingPoint precision_at_recall(const ScoredPairs& sp, double recall_target) {
    sp.validate();
    const auto counts = count_classes(sp);
    const auto points = threshold_sweep(sp);
    const size_t i = recall_threshold_index(points, counts.pos, recall_target);
    OperatingPoint op;
    op.threshold = points[i].threshold;
    op.value = static_cast<double>(points[i].tp) /
               static_cast<double>(points[i].tp + points[i].fp);
    return op;
}

OperatingPoint specificity_at_sensitivity(const ScoredPairs& sp, double sensitivity_target) {
    sp.validate();
    const auto counts = count_classes(sp);
    const auto points = threshold_sweep(sp);
    const size_t i = recall_threshold_index(points, counts.pos, sensitivity_target);
    OperatingPoint op;
    op.threshold = points[i].threshold;
    const size_t tn = counts.neg - points[i].fp;
    op.value = static_cast<double>(tn) / static_cast<double>(counts.neg);
    return op;
}

const char* calibration_target_name(CalibrationTarget t) {
    switch (t) {
        case CalibrationTarget::recall: return "recall";
        case CalibrationTarget::specificity: return "specificity";
        case CalibrationTarget::sensitivity: return "sensitivity";
    }
    return "?";
}

CalibrationResult calibrate(const ScoredPairs& validation, CalibrationTarget target,
                            double target_value) {
    if (validation.scores.size() != validation.labels.size())
        throw input_error("scored pairs: scores/labels length mismatch");
    const auto counts = count_classes(validation);

    CalibrationResult cal;
    cal.target = target;
    cal.target_value = target_value;
    cal.degenerate = validation.size() < 2 || counts.pos == 0 || counts.neg == 0;

    if (target == CalibrationTarget::recall || target == CalibrationTarget::sensitivity) {
        if (counts.pos == 0) throw metric_error("calibrate: no positives in validation set");
        const auto points = threshold_sweep(validation);
        const size_t i = recall_threshold_index(points, counts.pos, target_value);
        cal.threshold = points[i].threshold;
        cal.achieved = static_cast<double>(points[i].tp) / static_cast<double>(counts.pos);
        return cal;
    }

    // specificity target: smallest threshold with specificity >= target,
    // i.e. keep recall as high as the floor allows
    if (counts.neg == 0) throw metric_error("calibrate: no negatives in validation set");
    if (target_value < 0.0 || target_value > 1.0)
        throw config_error("specificity target must be in [0,1]");
    const auto points = threshold_sweep(validation);
    // specificity at threshold points[i] = negatives strictly below it
    for (size_t i = points.size(); i-- > 0;) {
        const size_t fp = points[i].fp;
        const double spec =
            static_cast<double>(counts.neg - fp) / static_cast<double>(counts.neg);
        if (spec >= target_value) {
            cal.threshold = points[i].threshold;
            cal.achieved = spec;
            return cal;
        }
    }
    // nothing observed reaches it: +inf classifies nothing positive
    cal.threshold = std::numeric_limits<double>::infinity();
    cal.achieved = 1.0;
    return cal;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

double baseline_score(const ImageSample& x, const ImageSample& x2, BaselineKind kind,
                      bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (x.pixels.size() != x2.pixels.size() || x.height != x2.height || x.width != x2.width)
        throw input_error("baseline_score: shape mismatch");
    const size_t n = x.pixels.size();
    switch (kind) {
        case BaselineKind::mse: {
            double acc = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double d = static_cast<double>(x.pixels[i]) - x2.pixels[i];
                acc += d * d;
            }
            return -acc / static_cast<double>(n);
        }
        case BaselineKind::ncc: {
            double ma = 0.0, mb = 0.0;
            for (size_t i = 0; i < n; ++i) {
                ma += x.pixels[i];
                mb += x2.pixels[i];
            }
            ma /= static_cast<double>(n);
            mb /= static_cast<double>(n);
            double sab = 0.0, saa = 0.0, sbb = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double da = x.pixels[i] - ma;
                const double db = x2.pixels[i] - mb;
                sab += da * db;
                saa += da * da;
                sbb += db * db;
            }
            if (saa <= 0.0 || sbb <= 0.0) {
                if (degenerate) *degenerate = true;
                return 0.0;
            }
            return sab / std::sqrt(saa * sbb);
        }
        case BaselineKind::ssim: {
            constexpr double kC1 = 0.01 * 0.01; // (K1*L)^2, L = 1
            constexpr double kC2 = 0.03 * 0.03;
            constexpr int kWin = 8;
            if (x.height < kWin || x.width < kWin)
                throw input_error("baseline_score: image smaller than SSIM window");
            double total = 0.0;
            size_t windows = 0;
            for (int c = 0; c < x.channels; ++c) {
                for (int y = 0; y + kWin <= x.height; ++y) {
                    for (int xx = 0; xx + kWin <= x.width; ++xx) {
                        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                        for (int dy = 0; dy < kWin; ++dy) {
                            for (int dx = 0; dx < kWin; ++dx) {
                                const double a = x.at(y + dy, xx + dx, c);
                                const double b = x2.at(y + dy, xx + dx, c);
                                sa += a;
                                sb += b;
                                saa += a * a;
                                sbb += b * b;
                                sab += a * b;
                            }
                        }
                        constexpr double inv = 1.0 / (kWin * kWin);
                        const double mua = sa * inv, mub = sb * inv;
                        const double va = saa * inv - mua * mua;
                        const double vb = sbb * inv - mub * mub;
                        const double cov = sab * inv - mua * mub;
                        total += ((2 * mua * mub + kC1) * (2 * cov + kC2)) /
                                 ((mua * mua + mub * mub + kC1) * (va + vb + kC2));
                        ++windows;
                    }
                }
            }
            return total / static_cast<double>(windows);
        }
    }
    throw config_error("unknown baseline kind");
}

// ---------------------------------------------------------------------------
// pair protocol + robustness
// ---------------------------------------------------------------------------

namespace {

// dataset -> identity -> image indices (corpus indices)
using IdentityMap = std::map<int, std::map<int64_t, std::vector<size_t>>>;

IdentityMap group_by_identity(const Corpus& corpus, const std::vector<size_t>& split) {
    IdentityMap m;
    for (size_t idx : split) {
        const auto& img = corpus.images[idx];
        if (img.identity < 0) continue;
        m[img.dataset_id][img.identity].push_back(idx);
    }
    return m;
}

} // namespace

std::vector<ReidPair> build_reid_pairs(const Corpus& corpus, const std::vector<size_t>& split,
                                       uint64_t seed) {
    Rng rng(seed, /*stream=*/0x9A17);
    const auto groups = group_by_identity(corpus, split);
    std::vector<ReidPair> pairs;
    for (const auto& [dataset, identities] : groups) {
        // a negative needs a second identity in the same dataset
        if (identities.size() < 2) continue;
        // flat list for negative draws
        std::vector<size_t> all;
        for (const auto& [ident, idxs] : identities)
            all.insert(all.end(), idxs.begin(), idxs.end());
        for (const auto& [ident, idxs] : identities) {
            for (size_t i = 0; i < idxs.size(); ++i) {
                for (size_t j = i + 1; j < idxs.size(); ++j) {
                    pairs.push_back({idxs[i], idxs[j], 1, dataset});
                    // one negative per positive: first member vs a uniformly
                    // drawn different-identity image from the same dataset
                    size_t other;
                    do {
                        other = all[rng.uniform_int(all.size())];
                    } while (corpus.images[other].identity == ident);
                    pairs.push_back({idxs[i], other, 0, dataset});
                }
            }
        }
    }
    if (pairs.empty())
        throw config_error("build_reid_pairs: no identity has two images in this split");
    return pairs;
}

ScoredPairs score_pairs(const Corpus& corpus, const std::vector<ReidPair>& pairs,
                        const PairScoreFn& scorer, int dataset_filter) {
    ScoredPairs sp;
    for (const auto& p : pairs) {
        if (dataset_filter >= 0 && p.dataset != dataset_filter) continue;
        sp.scores.push_back(scorer(corpus.images[p.a], corpus.images[p.b]));
        sp.labels.push_back(p.label);
    }
    return sp;
}

std::vector<RobustnessCell> robustness_curve(const Corpus& corpus,
                                             const std::vector<size_t>& split,
                                             const PairScoreFn& scorer,
                                             const std::vector<SweepEntry>& sweep,
                                             const CalibrationResult& calibration,
                                             uint64_t seed, int max_pairs) {
    if (sweep.empty()) throw config_error("robustness_curve: empty sweep");
    for (const auto& entry : sweep) {
        if (entry.strengths.empty()) throw config_error("robustness_curve: empty strength list");
        if (entry.kind == AugKind::sample_wise_normalization)
            throw config_error("robustness_curve: sample_wise_normalization is not an "
                               "image-space sweep kind");
    }

    Rng rng(seed, /*stream=*/0x20B);
    const auto groups = group_by_identity(corpus, split);
    if (groups.empty()) throw config_error("robustness_curve: split has no labeled images");

    // per dataset: sampled same-identity pairs (a, b); b gets augmented
    std::map<int, std::vector<std::pair<size_t, size_t>>> dataset_pairs;
    for (const auto& [dataset, identities] : groups) {
        std::vector<std::pair<size_t, size_t>> all;
        for (const auto& [ident, idxs] : identities)
            for (size_t i = 0; i < idxs.size(); ++i)
                for (size_t j = i + 1; j < idxs.size(); ++j)
                    all.emplace_back(idxs[i], idxs[j]);
        if (all.empty()) continue;
        rng.shuffle(all.data(), all.size());
        if (static_cast<int>(all.size()) > max_pairs) all.resize(max_pairs);
        dataset_pairs[dataset] = std::move(all);
    }
    if (dataset_pairs.empty())
        throw config_error("robustness_curve: no positive pairs available");

    std::vector<RobustnessCell> cells;
    for (const auto& entry : sweep) {
        for (double strength : entry.strengths) {
            AugmentationSpec spec{entry.kind, strength};
            spec.validate();
            double macro_sum = 0.0;
            int macro_count = 0;
            int macro_pairs = 0;
            for (const auto& [dataset, pairs] : dataset_pairs) {
                int hits = 0;
                for (const auto& [a, b] : pairs) {
                    Rng pair_rng = rng.child(static_cast<uint64_t>(a) * 2654435761ULL + b);
                    const ImageSample augmented =
                        apply_augmentation(corpus.images[b], spec, pair_rng);
                    const double s = scorer(corpus.images[a], augmented);
                    if (s >= calibration.threshold) ++hits;
                }
                const double recall = static_cast<double>(hits) / pairs.size();
                cells.push_back({dataset, entry.kind, strength, recall,
                                 static_cast<int>(pairs.size())});
                macro_sum += recall;
                ++macro_count;
                macro_pairs += static_cast<int>(pairs.size());
            }
            cells.push_back({-1, entry.kind, strength, macro_sum / macro_count, macro_pairs});
        }
    }
    return cells;
}

} // namespace lcmem
