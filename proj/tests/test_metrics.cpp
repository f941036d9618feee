#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lcmem/errors.hpp"
#include "lcmem/metrics.hpp"
#include "lcmem/model.hpp"
#include "lcmem/pipeline.hpp"
#include "lcmem/rng.hpp"

using namespace lcmem;

namespace {

// O(n^2) pair-counting oracle
double auc_brute_force(const ScoredPairs& sp) {
    double wins = 0;
    size_t pos = 0, neg = 0;
    for (size_t i = 0; i < sp.size(); ++i) {
        if (sp.labels[i] != 1) continue;
        ++pos;
        for (size_t j = 0; j < sp.size(); ++j) {
            if (sp.labels[j] == 1) continue;
            if (sp.scores[i] > sp.scores[j])
                wins += 1.0;
            else if (sp.scores[i] == sp.scores[j])
                wins += 0.5;
        }
    }
    for (int l : sp.labels)
        if (l == 0) ++neg;
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// exhaustive threshold-sweep oracle over observed scores + infinity
struct OracleResult {
    double value, threshold;
};

OracleResult oracle_at_recall(const ScoredPairs& sp, double target, bool precision) {
    std::vector<double> candidates = sp.scores;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    size_t total_pos = 0, total_neg = 0;
    for (int l : sp.labels)
        (l == 1 ? total_pos : total_neg)++;

    double best_t = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (double t : candidates) {
        size_t tp = 0;
        for (size_t i = 0; i < sp.size(); ++i)
            if (sp.labels[i] == 1 && sp.scores[i] >= t) ++tp;
        if (static_cast<double>(tp) / total_pos >= target && (!found || t > best_t)) {
            best_t = t;
            found = true;
        }
    }
    REQUIRE(found);
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < sp.size(); ++i) {
        if (sp.scores[i] >= best_t) (sp.labels[i] == 1 ? tp : fp)++;
    }
    if (precision) return {static_cast<double>(tp) / (tp + fp), best_t};
    return {static_cast<double>(total_neg - fp) / total_neg, best_t};
}

ScoredPairs random_scored(Rng& rng, size_t n, bool quantize) {
    ScoredPairs sp;
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
        double s = rng.uniform();
        if (quantize) s = std::round(s * 20.0) / 20.0; // force ties
        const int label = rng.bernoulli(0.4) ? 1 : 0;
        sp.scores.push_back(s);
        sp.labels.push_back(label);
        (label ? has_pos : has_neg) = true;
    }
    if (!has_pos) sp.labels[0] = 1;
    if (!has_neg) sp.labels[sp.labels.size() - 1] = 0;
    return sp;
}

} // namespace

TEST_CASE("auc basics") {
    CHECK(roc_auc({{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}}) == doctest::Approx(1.0));
    CHECK(roc_auc({{0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}}) == doctest::Approx(0.5));
    CHECK(roc_auc({{0.1, 0.9}, {1, 0}}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(roc_auc({{0.1, 0.9}, {1, 1}}), metric_error);
}

TEST_CASE("sorting-based auc equals brute force on 100 random instances") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 2 + rng.uniform_int(199);
        const ScoredPairs sp = random_scored(rng, n, trial % 2 == 0);
        CHECK(roc_auc(sp) == doctest::Approx(auc_brute_force(sp)).epsilon(1e-12));
    }
}

TEST_CASE("precision at recall: spec example and degenerate layouts") {
    const ScoredPairs sp{{0.9, 0.7, 0.3, 0.8, 0.2, 0.1}, {1, 1, 1, 0, 0, 0}};
    const auto op = precision_at_recall(sp, 0.99);
    CHECK(op.threshold == doctest::Approx(0.3));
    CHECK(op.value == doctest::Approx(0.75));

    // perfectly separated: precision 1 at any target
    const ScoredPairs perfect{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}};
    for (double t : {0.1, 0.5, 0.99, 1.0})
        CHECK(precision_at_recall(perfect, t).value == doctest::Approx(1.0));

    // all negatives above all positives: P/(P+N) at full recall
    const ScoredPairs worst{{0.1, 0.2, 0.8, 0.9, 0.95}, {1, 1, 0, 0, 0}};
    CHECK(precision_at_recall(worst, 0.99).value == doctest::Approx(2.0 / 5.0));

    CHECK_THROWS_AS(precision_at_recall(sp, 1.5), metric_error);
    CHECK_THROWS_AS(precision_at_recall(sp, 0.0), config_error);
}

TEST_CASE("specificity at sensitivity: spec example, ties, perfect split") {
    const ScoredPairs sp{{0.9, 0.7, 0.3, 0.8, 0.2, 0.1}, {1, 1, 1, 0, 0, 0}};
    const auto op = specificity_at_sensitivity(sp, 0.99);
    CHECK(op.threshold == doctest::Approx(0.3));
    CHECK(op.value == doctest::Approx(2.0 / 3.0));

    const ScoredPairs perfect{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}};
    CHECK(specificity_at_sensitivity(perfect, 0.99).value == doctest::Approx(1.0));

    const ScoredPairs ties{{0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}};
    CHECK(specificity_at_sensitivity(ties, 0.99).value == doctest::Approx(0.0));
}

TEST_CASE("operating points match the exhaustive threshold-sweep oracle exactly") {
    Rng rng(321);
    for (int trial = 0; trial < 60; ++trial) {
        const ScoredPairs sp = random_scored(rng, 3 + rng.uniform_int(80), trial % 2 == 0);
        for (double target : {0.5, 0.9, 0.95, 0.99, 1.0}) {
            const auto pr = precision_at_recall(sp, target);
            const auto pr_oracle = oracle_at_recall(sp, target, true);
            CHECK(pr.threshold == pr_oracle.threshold);
            CHECK(pr.value == pr_oracle.value);
            const auto ss = specificity_at_sensitivity(sp, target);
            const auto ss_oracle = oracle_at_recall(sp, target, false);
            CHECK(ss.threshold == ss_oracle.threshold);
            CHECK(ss.value == ss_oracle.value);
        }
    }
}

TEST_CASE("raising the recall target never raises the threshold") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const ScoredPairs sp = random_scored(rng, 50, true);
        double prev = std::numeric_limits<double>::infinity();
        for (double target : {0.2, 0.5, 0.8, 0.95, 1.0}) {
            const double t = precision_at_recall(sp, target).threshold;
            CHECK(t <= prev);
            prev = t;
        }
    }
}

TEST_CASE("calibration: recall target picks the minimum positive score when all are needed") {
    ScoredPairs sp;
    for (int i = 0; i < 10; ++i) {
        sp.scores.push_back(0.9 - i * 0.08); // 0.9 down to 0.18
        sp.labels.push_back(1);
    }
    sp.scores.push_back(0.05);
    sp.labels.push_back(0);
    const auto cal = calibrate(sp, CalibrationTarget::recall, 0.95);
    // 9/10 = 0.9 < 0.95, so all ten positives are needed
    CHECK(cal.threshold == doctest::Approx(0.9 - 9 * 0.08));
    CHECK(cal.achieved == doctest::Approx(1.0));
    CHECK(!cal.degenerate);
}

TEST_CASE("calibration: 50% specificity on symmetric negatives") {
    // negatives symmetric around 0.5; smallest threshold with spec >= 0.5 is
    // the first score above the lower half
    ScoredPairs sp;
    const std::vector<double> negs{0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
    for (double s : negs) {
        sp.scores.push_back(s);
        sp.labels.push_back(0);
    }
    sp.scores.push_back(0.9); // positive outside the candidate gap around the median
    sp.labels.push_back(1);
    const auto cal = calibrate(sp, CalibrationTarget::specificity, 0.50);
    CHECK(cal.threshold == doctest::Approx(0.55));
    CHECK(cal.achieved == doctest::Approx(0.5));

    // direct sweep oracle: no smaller observed threshold reaches 0.5
    for (double t : sp.scores) {
        if (t >= cal.threshold) continue;
        size_t below = 0;
        for (double s : negs)
            if (s < t) ++below;
        CHECK(static_cast<double>(below) / negs.size() < 0.5);
    }
}

TEST_CASE("calibration flags degenerate single-score validation sets") {
    ScoredPairs sp{{0.7}, {1}};
    const auto cal = calibrate(sp, CalibrationTarget::recall, 0.95);
    CHECK(cal.degenerate);
    CHECK(cal.threshold == doctest::Approx(0.7));
    CHECK(cal.achieved == doctest::Approx(1.0));
}

TEST_CASE("baseline scorers: identity, inversion, noise") {
    Rng rng(9);
    ImageSample x;
    x.height = x.width = 16;
    x.pixels.resize(256);
    for (auto& p : x.pixels) p = static_cast<float>(rng.uniform());

    CHECK(baseline_score(x, x, BaselineKind::mse) == doctest::Approx(0.0));
    CHECK(baseline_score(x, x, BaselineKind::ncc) == doctest::Approx(1.0));
    CHECK(baseline_score(x, x, BaselineKind::ssim) == doctest::Approx(1.0));

    ImageSample inv = x;
    for (auto& p : inv.pixels) p = 1.0f - p;
    CHECK(baseline_score(x, inv, BaselineKind::ncc) == doctest::Approx(-1.0).epsilon(1e-9));

    // negated MSE equals a direct recomputation
    ImageSample noisy = x;
    for (auto& p : noisy.pixels)
        p = std::min(1.0f, std::max(0.0f, p + static_cast<float>(0.1 * rng.normal())));
    double direct = 0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const double d = static_cast<double>(x.pixels[i]) - noisy.pixels[i];
        direct += d * d;
    }
    direct /= static_cast<double>(x.pixels.size());
    CHECK(baseline_score(x, noisy, BaselineKind::mse) == doctest::Approx(-direct).epsilon(1e-12));

    ImageSample flat;
    flat.height = flat.width = 16;
    flat.pixels.assign(256, 0.4f);
    bool degenerate = false;
    CHECK(baseline_score(flat, x, BaselineKind::ncc, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("reid pair protocol: exhaustive positives plus one negative each") {
    CorpusSpec spec;
    spec.n_datasets = 2;
    spec.identities_per_dataset = 10;
    spec.images_per_identity = 3;
    spec.seed = 4;
    const Corpus corpus = generate_corpus(spec);
    const auto pairs = build_reid_pairs(corpus, corpus.train, 99);

    size_t pos = 0, neg = 0;
    for (const auto& p : pairs) {
        const auto& a = corpus.images[p.a];
        const auto& b = corpus.images[p.b];
        CHECK(a.dataset_id == p.dataset);
        CHECK(b.dataset_id == p.dataset); // negatives stay in-dataset by design
        if (p.label == 1) {
            CHECK(a.identity == b.identity);
            ++pos;
        } else {
            CHECK(a.identity != b.identity);
            ++neg;
        }
    }
    CHECK(pos == neg);
    // 2 datasets x 7 train identities x C(3,2) pairs
    const size_t train_identities = corpus.train.size() / spec.images_per_identity;
    CHECK(pos == train_identities * 3);
    // deterministic for a fixed seed
    const auto again = build_reid_pairs(corpus, corpus.train, 99);
    CHECK(pairs.size() == again.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].a == again[i].a);
        CHECK(pairs[i].b == again[i].b);
    }
}

TEST_CASE("macro equals micro when datasets are the same size") {
    CorpusSpec spec;
    spec.n_datasets = 3;
    spec.identities_per_dataset = 8;
    spec.images_per_identity = 3;
    spec.seed = 12;
    const Corpus corpus = generate_corpus(spec);
    const auto pairs = build_reid_pairs(corpus, corpus.train, 5);

    const auto scorer = [](const ImageSample& a, const ImageSample& b) {
        return baseline_score(a, b, BaselineKind::mse);
    };
    // recall at a fixed threshold: with equal per-dataset pair counts the
    // unweighted macro average is exactly the pooled micro average
    const double threshold = -0.02;
    std::set<int> datasets;
    for (const auto& p : pairs) datasets.insert(p.dataset);
    auto recall_of = [&](int filter) {
        size_t pos = 0, hits = 0;
        for (const auto& p : pairs) {
            if (p.label != 1) continue;
            if (filter >= 0 && p.dataset != filter) continue;
            ++pos;
            if (scorer(corpus.images[p.a], corpus.images[p.b]) >= threshold) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(pos);
    };
    double macro = 0;
    for (int d : datasets) macro += recall_of(d);
    macro /= static_cast<double>(datasets.size());
    CHECK(macro == doctest::Approx(recall_of(-1)).epsilon(1e-12));
}

TEST_CASE("robustness curve: strength 0 equals clean recall, even untrained") {
    CorpusSpec spec;
    spec.n_datasets = 2;
    spec.identities_per_dataset = 14; // keeps two identities per dataset in val
    spec.images_per_identity = 3;
    spec.seed = 21;
    const Corpus corpus = generate_corpus(spec);

    const ModelParams params = init_params(77, ModelDims{});
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);
    const PairScoreFn fn = [&](const ImageSample& a, const ImageSample& b) {
        return scorer(a, b);
    };

    const auto val_pairs = build_reid_pairs(corpus, corpus.val, 1);
    const auto cal = calibrate(score_pairs(corpus, val_pairs, fn),
                               CalibrationTarget::specificity, 0.5);

    const std::vector<SweepEntry> sweep{{AugKind::additive_noise, {0.0, 1.0}}};
    const auto cells = robustness_curve(corpus, corpus.test, fn, sweep, cal, 3, 1000);

    // clean recall over the same positive pairs at the same threshold
    const auto test_pairs = build_reid_pairs(corpus, corpus.test, 3);
    size_t pos = 0, hits = 0;
    for (const auto& p : test_pairs) {
        if (p.label != 1) continue;
        ++pos;
        if (fn(corpus.images[p.a], corpus.images[p.b]) >= cal.threshold) ++hits;
    }
    const double clean_recall = static_cast<double>(hits) / pos;

    for (const auto& c : cells) {
        if (c.dataset == -1 && c.strength == 0.0)
            CHECK(c.recall == doctest::Approx(clean_recall).epsilon(1e-12));
    }

    CHECK_THROWS_AS(robustness_curve(corpus, corpus.test, fn, {}, cal, 3, 100), config_error);
}
