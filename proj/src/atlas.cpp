#include "lcmem/atlas.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "lcmem/errors.hpp"
#include "lcmem/parallel.hpp"

namespace lcmem {
namespace {

FeatureMatrix features_for_indices(const ModelScorer& scorer, const Corpus& corpus,
                                   const std::vector<size_t>& indices, int threads) {
    const int d = scorer.params().dims.feature;
    FeatureMatrix m;
    m.dim = static_cast<uint32_t>(d);
    m.ids.resize(indices.size());
    m.identities.resize(indices.size());
    m.values.resize(indices.size() * static_cast<size_t>(d));
    parallel_chunks(indices.size(), 64, threads, [&](size_t b, size_t e, size_t) {
        for (size_t i = b; i < e; ++i) {
            const auto& img = corpus.images[indices[i]];
            const FeatureVector u = scorer.features(img);
            m.ids[i] = img.image_id;
            m.identities[i] = img.identity;
            float* row = &m.values[i * d];
            for (int t = 0; t < d; ++t) row[t] = static_cast<float>(u[t]);
        }
    });
    return m;
}

// Head weights cast to f32 once; evaluation of a single pair is a fixed
// instruction sequence (full-d dot products, f64 accumulators) independent
// of how pairs are batched.
struct HeadKernel {
    int d, h;
    std::vector<float> w1, b1, w2;
    float b2;

    explicit HeadKernel(const ModelParams& p)
        : d(p.dims.feature), h(p.dims.head_hidden) {
        w1.resize(static_cast<size_t>(h) * d);
        b1.resize(h);
        w2.resize(h);
        for (size_t i = 0; i < w1.size(); ++i) w1[i] = static_cast<float>(p.values.w[3][i]);
        for (int i = 0; i < h; ++i) b1[i] = static_cast<float>(p.values.b[3][i]);
        for (int i = 0; i < h; ++i) w2[i] = static_cast<float>(p.values.w[4][i]);
        b2 = static_cast<float>(p.values.b[4][0]);
    }

    // Eight independent accumulator chains hide the f64 add latency; the
    // summation order is fixed, so results do not depend on blocking or
    // thread count.
    float score(const float* __restrict q, const float* __restrict a,
                float* __restrict diff) const {
        for (int k = 0; k < d; ++k) diff[k] = std::fabs(q[k] - a[k]);
        double logit = static_cast<double>(b2);
        for (int j = 0; j < h; ++j) {
            const float* __restrict row = &w1[static_cast<size_t>(j) * d];
            double acc8[8] = {0, 0, 0, 0, 0, 0, 0, 0};
            int k = 0;
            for (; k + 8 <= d; k += 8)
                for (int t = 0; t < 8; ++t)
                    acc8[t] += static_cast<double>(row[k + t]) *
                               static_cast<double>(diff[k + t]);
            for (; k < d; ++k)
                acc8[k & 7] += static_cast<double>(row[k]) * static_cast<double>(diff[k]);
            const double acc = static_cast<double>(b1[j]) +
                               (((acc8[0] + acc8[1]) + (acc8[2] + acc8[3])) +
                                ((acc8[4] + acc8[5]) + (acc8[6] + acc8[7])));
            if (acc > 0.0) logit += static_cast<double>(w2[j]) * acc;
        }
        return static_cast<float>(sigmoid(logit));
    }
};

} // namespace

void Atlas::save(const std::string& path) const {
    MatrixContainer c;
    c.rows = features.rows();
    c.dim = features.dim;
    c.fingerprint = fingerprint;
    c.ids = features.ids;
    c.identities = features.identities;
    c.data = features.values;
    c.save(path, kMagicAtlas);
}

Atlas Atlas::load(const std::string& path) {
    MatrixContainer c = MatrixContainer::load(path, kMagicAtlas);
    Atlas a;
    a.fingerprint = c.fingerprint;
    a.features.dim = c.dim;
    a.features.ids = std::move(c.ids);
    a.features.identities = std::move(c.identities);
    a.features.values = std::move(c.data);
    return a;
}

Atlas build_atlas(const ModelScorer& scorer, const Corpus& corpus,
                  const std::vector<size_t>& split, int threads) {
    if (split.empty()) throw config_error("build_atlas: empty split");
    Atlas atlas;
    atlas.features = features_for_indices(scorer, corpus, split, threads);
    atlas.fingerprint = param_fingerprint(scorer.params());
    return atlas;
}

FeatureMatrix compute_features(const ModelScorer& scorer, const Corpus& corpus,
                               const std::vector<size_t>& split, int threads) {
    return features_for_indices(scorer, corpus, split, threads);
}

AuditReport score_one_vs_all(const Atlas& atlas, const FeatureMatrix& queries,
                             const ModelParams& params, double threshold, int threads,
                             size_t block_size, int top_k, std::vector<uint8_t>* flag_out) {
    if (queries.dim != atlas.dim())
        throw input_error("score_one_vs_all: query dim " + std::to_string(queries.dim) +
                          " != atlas dim " + std::to_string(atlas.dim()));
    if (param_fingerprint(params) != atlas.fingerprint)
        throw input_error("score_one_vs_all: atlas fingerprint does not match the given "
                          "parameters; rebuild the atlas with this model");
    if (atlas.rows() == 0 || queries.rows() == 0)
        throw config_error("score_one_vs_all: empty atlas or query set");
    if (block_size == 0) block_size = 1024;

    const auto t0 = std::chrono::steady_clock::now();
    const HeadKernel kernel(params);
    const size_t m = queries.rows();
    const size_t n = atlas.rows();
    const int d = kernel.d;
    const float fthreshold = static_cast<float>(threshold);

    struct PerQuery {
        uint64_t flagged = 0;
        uint64_t pos_pairs = 0, pos_flagged = 0, neg_flagged = 0;
        std::array<uint64_t, 100> pos_hist{}, neg_hist{};
        std::vector<TopMatch> top;
    };
    std::vector<PerQuery> results(m);
    if (flag_out) flag_out->assign(m * n, 0);

    // parallel over whole queries; per-pair math identical for any layout
    parallel_chunks(m, 1, threads, [&](size_t qb, size_t qe, size_t) {
        std::vector<float> diff(static_cast<size_t>(d));
        for (size_t q = qb; q < qe; ++q) {
            PerQuery& r = results[q];
            const float* qrow = &queries.values[q * d];
            const int64_t qident = queries.identities[q];
            for (size_t b = 0; b < n; b += block_size) {
                const size_t e = std::min(b + block_size, n);
                for (size_t a = b; a < e; ++a) {
                    const float s = kernel.score(qrow, &atlas.features.values[a * d], diff.data());
                    const bool flagged = s >= fthreshold;
                    if (flagged) ++r.flagged;
                    if (flag_out) (*flag_out)[q * n + a] = flagged ? 1 : 0;
                    const bool positive = qident >= 0 && atlas.features.identities[a] == qident;
                    const int bin = std::min(99, std::max(0, static_cast<int>(s * 100.0f)));
                    if (positive) {
                        ++r.pos_pairs;
                        ++r.pos_hist[bin];
                        if (flagged) ++r.pos_flagged;
                    } else {
                        ++r.neg_hist[bin];
                        if (flagged) ++r.neg_flagged;
                    }
                    // keep top-k, ties broken toward the lower row index
                    if (top_k > 0) {
                        if (static_cast<int>(r.top.size()) < top_k ||
                            s > r.top.back().score) {
                            const TopMatch tm{atlas.features.ids[a], s};
                            auto pos_it = std::upper_bound(
                                r.top.begin(), r.top.end(), tm,
                                [](const TopMatch& x, const TopMatch& y) {
                                    return x.score > y.score;
                                });
                            r.top.insert(pos_it, tm);
                            if (static_cast<int>(r.top.size()) > top_k) r.top.pop_back();
                        }
                    }
                }
            }
        }
    });

    AuditReport report;
    report.n_queries = m;
    report.n_atlas = n;
    report.n_pairs = static_cast<uint64_t>(m) * n;
    report.threshold = threshold;
    report.threads = resolve_threads(threads);
    report.block_size = block_size;
    report.positive_hist.assign(100, 0);
    report.negative_hist.assign(100, 0);
    for (size_t q = 0; q < m; ++q) {
        const PerQuery& r = results[q];
        report.flagged += r.flagged;
        report.positive_pairs += r.pos_pairs;
        report.positives_flagged += r.pos_flagged;
        report.negatives_flagged += r.neg_flagged;
        for (int i = 0; i < 100; ++i) {
            report.positive_hist[i] += r.pos_hist[i];
            report.negative_hist[i] += r.neg_hist[i];
        }
        report.top_matches.push_back({queries.ids[q], r.top});
    }
    report.negative_pairs = report.n_pairs - report.positive_pairs;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.pairs_per_second =
        report.wall_seconds > 0 ? static_cast<double>(report.n_pairs) / report.wall_seconds
                                : 0.0;
    return report;
}

FilterOutcome filter_loop(const ImageSample& x_r,
                          const std::function<ImageSample()>& generator,
                          const ModelScorer& scorer, int max_retries) {
    if (max_retries < 1) throw config_error("filter_loop: max_retries must be >= 1");
    const FeatureVector u_r = scorer.features(x_r);

    FilterOutcome out;
    for (int attempt = 1; attempt <= max_retries; ++attempt) {
        ImageSample candidate = generator();
        const double p = head_forward(scorer.params(), u_r, scorer.features(candidate));
        out.attempts = attempt;
        out.last_score = p;
        if (p < 0.5) { // novel
            out.sample = std::move(candidate);
            out.resolved = true;
            return out;
        }
        ++out.rejected;
        out.sample = std::move(candidate);
    }
    out.resolved = false;
    return out;
}

double mem_rate(const std::vector<std::pair<const ImageSample*, const ImageSample*>>& pairs,
                const ModelScorer& scorer) {
    if (pairs.empty()) throw config_error("mem_rate: empty pair list");
    size_t flagged = 0;
    for (const auto& [x_s, x_r] : pairs)
        if (scorer.score(*x_s, *x_r) > 0.5) ++flagged;
    return static_cast<double>(flagged) / static_cast<double>(pairs.size());
}

} // namespace lcmem
