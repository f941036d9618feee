#include "lcmem/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcmem/errors.hpp"
#include "lcmem/parallel.hpp"

namespace lcmem {
namespace {

constexpr double kNormFloor = 1e-12;
constexpr size_t kChunk = 64; // fixed reduction granularity, independent of threads

double softplus(double x) {
    // log(1 + e^x) without overflow
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

} // namespace

void LossConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw config_error("loss config: alpha must be in [0,1]");
    if (!(temperature > 0.0)) throw config_error("loss config: temperature must be > 0");
}

void PairBatch::validate() const {
    const size_t n = labels.size();
    if (n == 0) throw config_error("pair batch is empty");
    if (z_a.size() != n || z_b.size() != n || id_a.size() != n || id_b.size() != n)
        throw config_error("pair batch: mismatched array lengths");
    for (size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw config_error("pair batch: labels must be 0/1");
        if ((id_a[i] == id_b[i]) != (labels[i] == 1))
            throw config_error("pair batch: label inconsistent with ids at pair " +
                               std::to_string(i));
    }
}

BceResult bce_loss(double logit, int y) {
    BceResult r;
    r.p = sigmoid(logit);
    // -[y log p + (1-y) log(1-p)] in logit space
    r.loss = y == 1 ? softplus(-logit) : softplus(logit);
    r.dlogit = r.p - static_cast<double>(y);
    return r;
}

double nt_xent_loss_from_sims(const std::vector<double>& sims,
                              const std::vector<int64_t>& identities, size_t k) {
    double total = 0.0;
    int anchors = 0;
    for (size_t a = 0; a < k; ++a) {
        size_t n_pos = 0;
        double pos_sum = 0.0;
        double m = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < k; ++j) {
            if (j == a) continue;
            m = std::max(m, sims[a * k + j]);
        }
        double denom = 0.0;
        for (size_t j = 0; j < k; ++j) {
            if (j == a) continue;
            denom += std::exp(sims[a * k + j] - m);
            if (identities[j] == identities[a]) {
                ++n_pos;
                pos_sum += sims[a * k + j];
            }
        }
        if (n_pos == 0) continue;
        total += std::log(denom) + m - pos_sum / static_cast<double>(n_pos);
        ++anchors;
    }
    return anchors > 0 ? total / anchors : 0.0;
}

NtXentResult nt_xent_loss(const std::vector<FeatureVector>& features,
                          const std::vector<int64_t>& identities, const LossConfig& config,
                          int threads) {
    config.validate();
    const size_t k = features.size();
    if (k != identities.size()) throw input_error("nt_xent: features/identities size mismatch");
    NtXentResult res;
    res.dfeatures.assign(k, {});
    if (k < 2) {
        res.degenerate = true;
        for (size_t i = 0; i < k; ++i) res.dfeatures[i].assign(features[i].size(), 0.0);
        return res;
    }
    const size_t d = features[0].size();
    for (const auto& f : features)
        if (f.size() != d) throw input_error("nt_xent: inconsistent feature dimensions");

    // normalized views (or raw copies) + norms
    std::vector<double> v(k * d);
    std::vector<double> norms(k, 1.0);
    for (size_t i = 0; i < k; ++i) {
        double n2 = 0.0;
        for (size_t j = 0; j < d; ++j) n2 += features[i][j] * features[i][j];
        const double n = config.normalize_features ? std::max(std::sqrt(n2), kNormFloor) : 1.0;
        norms[i] = n;
        for (size_t j = 0; j < d; ++j) v[i * d + j] = features[i][j] / n;
    }

    // similarity matrix, temperature applied
    const double inv_tau = 1.0 / config.temperature;
    std::vector<double> sims(k * k, 0.0);
    parallel_chunks(k, kChunk, threads, [&](size_t b, size_t e, size_t) {
        for (size_t a = b; a < e; ++a) {
            const double* va = &v[a * d];
            for (size_t j = 0; j < k; ++j) {
                if (j == a) continue;
                const double* vj = &v[j * d];
                double acc = 0.0;
                for (size_t t = 0; t < d; ++t) acc += va[t] * vj[t];
                sims[a * k + j] = acc * inv_tau;
            }
        }
    });

    // per-anchor loss and dL/dsims (row-parallel, deterministic)
    std::vector<double> g(k * k, 0.0);
    std::vector<double> anchor_loss(k, 0.0);
    std::vector<uint8_t> has_pos(k, 0);
    parallel_chunks(k, kChunk, threads, [&](size_t b, size_t e, size_t) {
        for (size_t a = b; a < e; ++a) {
            size_t n_pos = 0;
            for (size_t j = 0; j < k; ++j)
                if (j != a && identities[j] == identities[a]) ++n_pos;
            if (n_pos == 0) continue;
            has_pos[a] = 1;
            double m = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < k; ++j)
                if (j != a) m = std::max(m, sims[a * k + j]);
            double denom = 0.0;
            for (size_t j = 0; j < k; ++j)
                if (j != a) denom += std::exp(sims[a * k + j] - m);
            double pos_sum = 0.0;
            const double inv_npos = 1.0 / static_cast<double>(n_pos);
            for (size_t j = 0; j < k; ++j) {
                if (j == a) continue;
                const double soft = std::exp(sims[a * k + j] - m) / denom;
                const bool pos = identities[j] == identities[a];
                g[a * k + j] = soft - (pos ? inv_npos : 0.0);
                if (pos) pos_sum += sims[a * k + j];
            }
            anchor_loss[a] = std::log(denom) + m - pos_sum * inv_npos;
        }
    });

    int anchors = 0;
    double total = 0.0;
    for (size_t a = 0; a < k; ++a) {
        if (!has_pos[a]) continue;
        ++anchors;
        total += anchor_loss[a];
    }
    res.anchors_with_positives = anchors;
    if (anchors == 0) {
        res.degenerate = true;
        for (size_t i = 0; i < k; ++i) res.dfeatures[i].assign(d, 0.0);
        return res;
    }
    res.loss = total / anchors;

    // dL/dv_c = sum_j (g[c][j] + g[j][c]) * v_j / (tau * anchors);
    // anchors without positives have zero rows but still receive key-side
    // gradient through their column.
    const double scale = inv_tau / static_cast<double>(anchors);
    parallel_chunks(k, kChunk, threads, [&](size_t b, size_t e, size_t) {
        for (size_t c = b; c < e; ++c) {
            std::vector<double> dv(d, 0.0);
            for (size_t j = 0; j < k; ++j) {
                if (j == c) continue;
                const double w = (g[c * k + j] + g[j * k + c]) * scale;
                if (w == 0.0) continue;
                const double* vj = &v[j * d];
                for (size_t t = 0; t < d; ++t) dv[t] += w * vj[t];
            }
            auto& du = res.dfeatures[c];
            du.assign(d, 0.0);
            if (config.normalize_features) {
                // du = (dv - (dv . v) v) / ||u||
                const double* vc = &v[c * d];
                double dot = 0.0;
                for (size_t t = 0; t < d; ++t) dot += dv[t] * vc[t];
                const double inv_norm = 1.0 / norms[c];
                for (size_t t = 0; t < d; ++t) du[t] = (dv[t] - dot * vc[t]) * inv_norm;
            } else {
                du = dv;
            }
        }
    });
    return res;
}

CombinedLossResult combined_loss(const PairBatch& batch, const ModelParams& params,
                                 const LossConfig& config, int threads) {
    config.validate();
    batch.validate();
    const size_t n = batch.size();
    const size_t sides = 2 * n;
    const double alpha = config.alpha;

    CombinedLossResult res;
    res.grads.allocate(params.dims);

    // 1) encode all sides; side order is [a_0..a_{n-1}, b_0..b_{n-1}]
    std::vector<FeatureVector> features(sides);
    std::vector<EncoderCache> caches(sides);
    std::vector<int64_t> ids(sides);
    parallel_chunks(sides, kChunk, threads, [&](size_t b, size_t e, size_t) {
        for (size_t s = b; s < e; ++s) {
            const bool first = s < n;
            const size_t i = first ? s : s - n;
            const auto& z = first ? batch.z_a[i] : batch.z_b[i];
            features[s] = encoder_forward(params, z, &caches[s]);
            ids[s] = first ? batch.id_a[i] : batch.id_b[i];
        }
    });

    // per-side total feature gradient
    std::vector<FeatureVector> dfeat(sides);
    for (auto& f : dfeat) f.assign(params.dims.feature, 0.0);

    // 2) classification term (skipped entirely at alpha == 1 so the boundary
    //    identity L_final == L_u is exact)
    if (alpha < 1.0) {
        std::vector<HeadCache> head_caches(n);
        std::vector<double> bce_losses(n);
        parallel_chunks(n, kChunk, threads, [&](size_t b, size_t e, size_t) {
            for (size_t i = b; i < e; ++i) {
                head_forward(params, features[i], features[n + i], &head_caches[i]);
                bce_losses[i] = bce_loss(head_caches[i].logit, batch.labels[i]).loss;
            }
        });
        double sum = 0.0;
        for (double l : bce_losses) sum += l;
        res.classification = sum / static_cast<double>(n);

        const double w = (1.0 - alpha) / static_cast<double>(n);
        const size_t n_chunks = (n + kChunk - 1) / kChunk;
        std::vector<Tensors> sinks(n_chunks);
        std::vector<std::vector<std::pair<FeatureVector, FeatureVector>>> dus(n_chunks);
        parallel_chunks(n, kChunk, threads, [&](size_t b, size_t e, size_t c) {
            sinks[c].allocate(params.dims);
            dus[c].reserve(e - b);
            for (size_t i = b; i < e; ++i) {
                const double dlogit = w * bce_loss(head_caches[i].logit, batch.labels[i]).dlogit;
                auto hb = head_backward(params, head_caches[i], dlogit, sinks[c]);
                dus[c].emplace_back(std::move(hb.du), std::move(hb.du2));
            }
        });
        for (size_t c = 0; c < n_chunks; ++c) {
            res.grads.add_scaled(sinks[c], 1.0);
            const size_t b = c * kChunk;
            for (size_t off = 0; off < dus[c].size(); ++off) {
                const size_t i = b + off;
                for (int t = 0; t < params.dims.feature; ++t) {
                    dfeat[i][t] += dus[c][off].first[t];
                    dfeat[n + i][t] += dus[c][off].second[t];
                }
            }
        }
    }

    // 3) contrastive term (skipped entirely at alpha == 0)
    if (alpha > 0.0) {
        NtXentResult nt = nt_xent_loss(features, ids, config, threads);
        res.contrastive = nt.loss;
        res.contrastive_degenerate = nt.degenerate;
        for (size_t s = 0; s < sides; ++s)
            for (int t = 0; t < params.dims.feature; ++t)
                dfeat[s][t] += alpha * nt.dfeatures[s][t];
    }

    res.total = alpha * res.contrastive + (1.0 - alpha) * res.classification;

    // 4) backprop every side through the shared encoder, fixed chunk order
    {
        const size_t n_chunks = (sides + kChunk - 1) / kChunk;
        std::vector<Tensors> sinks(n_chunks);
        parallel_chunks(sides, kChunk, threads, [&](size_t b, size_t e, size_t c) {
            sinks[c].allocate(params.dims);
            for (size_t s = b; s < e; ++s)
                encoder_backward(params, caches[s], dfeat[s], sinks[c]);
        });
        for (auto& sink : sinks) res.grads.add_scaled(sink, 1.0);
    }
    return res;
}

} // namespace lcmem
