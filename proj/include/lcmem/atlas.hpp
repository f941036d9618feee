#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lcmem/io.hpp"
#include "lcmem/pipeline.hpp"

namespace lcmem {

// Feature rows in f32 with source ids and identities (-1 = none).
struct FeatureMatrix {
    uint32_t dim = 0;
    std::vector<uint64_t> ids;
    std::vector<int64_t> identities;
    std::vector<float> values; // rows * dim, row-major

    size_t rows() const { return ids.size(); }
};

// Persisted matrix of real-image privacy features, bound to the exact
// parameters that produced it via a SHA-256 fingerprint.
struct Atlas {
    FeatureMatrix features;
    Fingerprint fingerprint{};

    size_t rows() const { return features.rows(); }
    uint32_t dim() const { return features.dim; }

    void save(const std::string& path) const;
    static Atlas load(const std::string& path);
};

Atlas build_atlas(const ModelScorer& scorer, const Corpus& corpus,
                  const std::vector<size_t>& split, int threads = 1);

FeatureMatrix compute_features(const ModelScorer& scorer, const Corpus& corpus,
                               const std::vector<size_t>& split, int threads = 1);

// ---------------------------------------------------------------------------
// exhaustive one-vs-all scoring
// ---------------------------------------------------------------------------

struct TopMatch {
    uint64_t atlas_id;
    float score;
};

struct QueryResult {
    uint64_t query_id;
    std::vector<TopMatch> top; // best-first
};

struct AuditReport {
    uint64_t n_queries = 0;
    uint64_t n_atlas = 0;
    uint64_t n_pairs = 0;
    double threshold = 0.5;
    uint64_t flagged = 0;
    // score histograms over [0,1], 100 bins; positive = identity match
    std::vector<uint64_t> positive_hist, negative_hist;
    uint64_t positive_pairs = 0, negative_pairs = 0;
    uint64_t positives_flagged = 0, negatives_flagged = 0;
    std::vector<QueryResult> top_matches;
    double wall_seconds = 0.0;
    double pairs_per_second = 0.0;
    int threads = 1;
    size_t block_size = 0;
};

// Head evaluation over every (query, atlas row) pair in cache-blocked
// chunks. Scores are f32 with f64 accumulation inside each dot product, so
// the flag set is bit-identical for any block size or worker count.
// Refuses to score when the atlas fingerprint does not match `params`.
// When flag_out is given it receives the full per-pair flag set
// (query-major, queries.rows() * atlas.rows() entries).
AuditReport score_one_vs_all(const Atlas& atlas, const FeatureMatrix& queries,
                             const ModelParams& params, double threshold, int threads = 1,
                             size_t block_size = 1024, int top_k = 5,
                             std::vector<uint8_t>* flag_out = nullptr);

// ---------------------------------------------------------------------------
// rejection-sampling filter and memorization rate
// ---------------------------------------------------------------------------

struct FilterOutcome {
    ImageSample sample;  // the returned (accepted or last) sample
    int attempts = 0;    // generator draws consumed
    int rejected = 0;
    bool resolved = false; // false = exhausted max_retries, sample is suspect
    double last_score = 0.0;
};

// Draws from the generator until the privacy score against x_r drops below
// 0.5 (novel); after max_retries the last sample is returned unresolved.
FilterOutcome filter_loop(const ImageSample& x_r,
                          const std::function<ImageSample()>& generator,
                          const ModelScorer& scorer, int max_retries);

// Fraction of (x_s, x_r) pairs scored as the same identity (p > 0.5).
double mem_rate(const std::vector<std::pair<const ImageSample*, const ImageSample*>>& pairs,
                const ModelScorer& scorer);

} // namespace lcmem
