#include "lcmem/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "lcmem/augment.hpp"
#include "lcmem/errors.hpp"
#include "lcmem/metrics.hpp"
#include "lcmem/parallel.hpp"

namespace lcmem {
namespace {

// rng stream tags per stage, fixed so runs are reproducible and the two
// stages never share a stream
enum : uint64_t {
    kS1Pairs = 101,
    kS1ValPairs = 102,
    kS2Pairs = 201,
    kS2Aug = 202,
    kS2ValPairs = 203,
    kSSPairs = 301, // single-stage-augmented baseline
    kSSAug = 302,
};

void check_stage(const StageConfig& s, const char* name) {
    if (s.max_epochs < 1 || s.batch_size < 1)
        throw config_error(std::string(name) + ": epochs and batch size must be positive");
    if (!(s.learning_rate >= 0))
        throw config_error(std::string(name) + ": learning rate must be finite and >= 0");
    if (s.patience < 1 || s.patience > s.max_epochs)
        throw config_error(std::string(name) + ": patience must be in [1, max_epochs]");
}

// ---------------------------------------------------------------------------
// precomputed clean latents, flattened to the model input width
// ---------------------------------------------------------------------------

struct LatentStore {
    std::vector<std::vector<double>> flat; // per corpus image index

    LatentStore(const Corpus& corpus, const ToyAutoencoder& ae, int threads) {
        flat.resize(corpus.images.size());
        parallel_chunks(corpus.images.size(), 64, threads, [&](size_t b, size_t e, size_t) {
            for (size_t i = b; i < e; ++i) {
                const auto& img = corpus.images[i];
                flat[i] = normalized_latent(ae, img, corpus.stats[img.dataset_id]).values;
            }
        });
    }
};

// ---------------------------------------------------------------------------
// pair index sampling
// ---------------------------------------------------------------------------

struct SplitIndex {
    std::vector<int> datasets; // datasets present in the split
    // per dataset: identity -> image indices
    std::map<int, std::map<int64_t, std::vector<size_t>>> by_identity;
    // per dataset: identities with >= 2 images
    std::map<int, std::vector<int64_t>> multi_image;
    // per dataset: flat image list
    std::map<int, std::vector<size_t>> images;

    SplitIndex(const Corpus& corpus, const std::vector<size_t>& split) {
        for (size_t idx : split) {
            const auto& img = corpus.images[idx];
            by_identity[img.dataset_id][img.identity].push_back(idx);
            images[img.dataset_id].push_back(idx);
        }
        for (auto& [d, idents] : by_identity) {
            datasets.push_back(d);
            for (auto& [ident, idxs] : idents)
                if (idxs.size() >= 2) multi_image[d].push_back(ident);
        }
    }

    bool has_positive_identity() const {
        for (const auto& [d, v] : multi_image)
            if (!v.empty()) return true;
        return false;
    }
};

struct IndexPair {
    size_t a, b;
    int label;
};

std::vector<IndexPair> sample_index_pairs(const Corpus& corpus, const SplitIndex& index,
                                          size_t batch_size, Rng& rng, PairMode mode) {
    const size_t n_pos = batch_size / 2;
    const size_t n_neg = batch_size - n_pos; // odd remainder goes to negatives
    std::vector<IndexPair> out;
    out.reserve(batch_size);

    auto pick_dataset = [&](bool need_positive) {
        for (;;) {
            const int d = index.datasets[rng.uniform_int(index.datasets.size())];
            if (!need_positive) return d;
            auto it = index.multi_image.find(d);
            if (it != index.multi_image.end() && !it->second.empty()) return d;
        }
    };

    if (mode == PairMode::supervised) {
        if (!index.has_positive_identity())
            throw config_error("sample_pairs: no identity has two images in this split");
        for (size_t p = 0; p < n_pos; ++p) {
            const int d = pick_dataset(true);
            const auto& idents = index.multi_image.at(d);
            const int64_t ident = idents[rng.uniform_int(idents.size())];
            const auto& idxs = index.by_identity.at(d).at(ident);
            const size_t i = rng.uniform_int(idxs.size());
            size_t j = rng.uniform_int(idxs.size() - 1);
            if (j >= i) ++j;
            out.push_back({idxs[i], idxs[j], 1});
        }
        for (size_t q = 0; q < n_neg; ++q) {
            for (;;) {
                const int da = pick_dataset(false);
                const int db = pick_dataset(false);
                const auto& ia = index.images.at(da);
                const auto& ib = index.images.at(db);
                const size_t a = ia[rng.uniform_int(ia.size())];
                const size_t b = ib[rng.uniform_int(ib.size())];
                if (corpus.images[a].identity != corpus.images[b].identity) {
                    out.push_back({a, b, 0});
                    break;
                }
            }
        }
    } else {
        for (size_t p = 0; p < n_pos; ++p) {
            const int d = pick_dataset(false);
            const auto& imgs = index.images.at(d);
            const size_t a = imgs[rng.uniform_int(imgs.size())];
            out.push_back({a, a, 1});
        }
        for (size_t q = 0; q < n_neg; ++q) {
            for (;;) {
                const int da = pick_dataset(false);
                const int db = pick_dataset(false);
                const auto& ia = index.images.at(da);
                const auto& ib = index.images.at(db);
                const size_t a = ia[rng.uniform_int(ia.size())];
                const size_t b = ib[rng.uniform_int(ib.size())];
                if (corpus.images[a].image_id != corpus.images[b].image_id) {
                    out.push_back({a, b, 0});
                    break;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch assembly
// ---------------------------------------------------------------------------

// In augmented mode every side gets an independent sub-rng, derived
// sequentially so parallel assembly is bit-deterministic for any thread
// count. strength_scale == 0 disables augmentation entirely (clean pairs).
struct BatchBuilder {
    const Corpus& corpus;
    const SplitIndex& index;
    const LatentStore& store;
    const ToyAutoencoder& ae;
    PairMode mode = PairMode::supervised;
    bool augment = false;
    double strength_scale = 1.0;
    int threads = 1;

    PairBatch build(size_t batch_size, Rng& pair_rng, Rng& aug_rng) const {
        const auto idx_pairs = sample_index_pairs(corpus, index, batch_size, pair_rng, mode);
        const size_t n = idx_pairs.size();
        PairBatch batch;
        batch.z_a.resize(n);
        batch.z_b.resize(n);
        batch.labels.resize(n);
        batch.id_a.resize(n);
        batch.id_b.resize(n);
        batch.ds_a.resize(n);
        batch.ds_b.resize(n);

        const bool do_augment = augment && strength_scale > 0.0;
        const bool unsup = mode == PairMode::unsupervised;
        std::vector<Rng> side_rngs;
        if (do_augment || unsup) {
            side_rngs.reserve(2 * n);
            for (size_t s = 0; s < 2 * n; ++s) side_rngs.push_back(aug_rng.child(s));
        }

        parallel_chunks(n, 64, threads, [&](size_t lo, size_t hi, size_t) {
            for (size_t i = lo; i < hi; ++i) {
                const auto& pr = idx_pairs[i];
                const auto& img_a = corpus.images[pr.a];
                const auto& img_b = corpus.images[pr.b];
                batch.labels[i] = pr.label;
                batch.ds_a[i] = img_a.dataset_id;
                batch.ds_b[i] = img_b.dataset_id;
                if (unsup) {
                    batch.id_a[i] = static_cast<int64_t>(img_a.image_id);
                    batch.id_b[i] = static_cast<int64_t>(img_b.image_id);
                } else {
                    batch.id_a[i] = img_a.identity;
                    batch.id_b[i] = img_b.identity;
                }

                auto side_latent = [&](size_t corpus_idx, size_t side_slot,
                                       bool augment_this) -> std::vector<double> {
                    if (!augment_this) return store.flat[corpus_idx];
                    const ImageSample& img = corpus.images[corpus_idx];
                    Rng local = side_rngs[side_slot];
                    const double scale = unsup ? 0.3 : strength_scale;
                    const ImageSample aug = apply_random_augmentation(img, local, scale);
                    return normalized_latent(ae, aug, corpus.stats[img.dataset_id]).values;
                };

                if (unsup) {
                    // positives: clean anchor + augmented copy of the same image
                    batch.z_a[i] = side_latent(pr.a, 2 * i, false);
                    batch.z_b[i] = side_latent(pr.b, 2 * i + 1, pr.label == 1);
                } else {
                    batch.z_a[i] = side_latent(pr.a, 2 * i, do_augment);
                    batch.z_b[i] = side_latent(pr.b, 2 * i + 1, do_augment);
                }
            }
        });
        return batch;
    }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    Tensors m, v;
    int64_t t = 0;

    explicit AdamState(const ModelDims& dims) {
        m.allocate(dims);
        v.allocate(dims);
    }
};

void adam_step(ModelParams& p, AdamState& st, double lr, double b1, double b2, double eps) {
    ++st.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    for (int l = 0; l < kLayerCount; ++l) {
        auto update = [&](std::vector<double>& w, std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
            for (size_t i = 0; i < w.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        };
        update(p.values.w[l], p.grads.w[l], st.m.w[l], st.v.w[l]);
        update(p.values.b[l], p.grads.b[l], st.m.b[l], st.v.b[l]);
    }
}

// ---------------------------------------------------------------------------
// validation metrics
// ---------------------------------------------------------------------------

std::vector<FeatureVector> encode_all(const ModelParams& params,
                                      const std::vector<const std::vector<double>*>& latents,
                                      int threads) {
    std::vector<FeatureVector> out(latents.size());
    parallel_chunks(latents.size(), 64, threads, [&](size_t b, size_t e, size_t) {
        for (size_t i = b; i < e; ++i) out[i] = encoder_forward(params, *latents[i]);
    });
    return out;
}

// re-ID AUC over a fixed pair list using precomputed latents
struct ReidValidator {
    std::vector<std::vector<double>> latents; // one per involved image, deduplicated
    std::vector<std::pair<size_t, size_t>> pairs;
    std::vector<int> labels;
    int threads;

    ReidValidator(const Corpus& corpus, const std::vector<size_t>& split,
                  const LatentStore& store, uint64_t seed, int threads_)
        : threads(threads_) {
        const auto reid = build_reid_pairs(corpus, split, seed);
        std::map<size_t, size_t> slot;
        for (const auto& p : reid) {
            for (size_t idx : {p.a, p.b}) {
                if (!slot.count(idx)) {
                    slot[idx] = latents.size();
                    latents.push_back(store.flat[idx]);
                }
            }
            pairs.emplace_back(slot[p.a], slot[p.b]);
            labels.push_back(p.label);
        }
    }

    double operator()(const ModelParams& params) const {
        std::vector<const std::vector<double>*> ptrs;
        ptrs.reserve(latents.size());
        for (const auto& z : latents) ptrs.push_back(&z);
        const auto features = encode_all(params, ptrs, threads);
        ScoredPairs sp;
        sp.scores.resize(pairs.size());
        sp.labels = labels;
        parallel_chunks(pairs.size(), 256, threads, [&](size_t b, size_t e, size_t) {
            for (size_t i = b; i < e; ++i)
                sp.scores[i] = head_forward(params, features[pairs[i].first],
                                            features[pairs[i].second]);
        });
        return roc_auc(sp);
    }
};

// copy-detection recall at the strongest noise, threshold 0.5, over a fixed
// set of same-identity pairs whose second member is noise-augmented once
struct CopyRecallValidator {
    std::vector<std::vector<double>> clean;     // anchors
    std::vector<std::vector<double>> perturbed; // noise @ strength 1.0
    int threads;

    CopyRecallValidator(const Corpus& corpus, const std::vector<size_t>& split,
                        const LatentStore& store, const ToyAutoencoder& ae, uint64_t seed,
                        int threads_, size_t max_pairs = 512)
        : threads(threads_) {
        const auto reid = build_reid_pairs(corpus, split, seed);
        Rng rng(seed, /*stream=*/0xC0F);
        std::vector<std::pair<size_t, size_t>> positives;
        for (const auto& p : reid)
            if (p.label == 1) positives.emplace_back(p.a, p.b);
        rng.shuffle(positives.data(), positives.size());
        if (positives.size() > max_pairs) positives.resize(max_pairs);
        for (const auto& [a, b] : positives) {
            clean.push_back(store.flat[a]);
            Rng aug_rng = rng.child(b);
            const ImageSample noisy = apply_augmentation(
                corpus.images[b], {AugKind::additive_noise, 1.0}, aug_rng);
            perturbed.push_back(
                normalized_latent(ae, noisy, corpus.stats[corpus.images[b].dataset_id]).values);
        }
    }

    double operator()(const ModelParams& params) const {
        std::vector<int> hits(clean.size(), 0);
        parallel_chunks(clean.size(), 64, threads, [&](size_t b, size_t e, size_t) {
            for (size_t i = b; i < e; ++i) {
                const auto fa = encoder_forward(params, clean[i]);
                const auto fb = encoder_forward(params, perturbed[i]);
                hits[i] = head_forward(params, fa, fb) >= 0.5 ? 1 : 0;
            }
        });
        int total = 0;
        for (int h : hits) total += h;
        return clean.empty() ? 0.0 : static_cast<double>(total) / clean.size();
    }
};

// ---------------------------------------------------------------------------
// stage loop
// ---------------------------------------------------------------------------

template <typename BatchFn, typename MetricFn>
TrainOutput run_stage(ModelParams params, const std::string& stage_name,
                      const StageConfig& stage, const TrainConfig& cfg, size_t split_size,
                      BatchFn&& make_batch, MetricFn&& val_metric) {
    const auto t0 = std::chrono::steady_clock::now();
    const int steps_per_epoch = std::max<int>(
        1, static_cast<int>((split_size + stage.batch_size - 1) / stage.batch_size));

    TrainOutput out;
    out.report.stage = stage_name;
    EarlyStopper stopper(stage.patience);
    AdamState adam(cfg.dims);
    ModelParams best = params;
    int best_epoch = 0;
    double last_finite = 0.0;

    for (int epoch = 1; epoch <= stage.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            PairBatch batch = make_batch(static_cast<size_t>(stage.batch_size));
            const CombinedLossResult res = combined_loss(batch, params, cfg.loss, cfg.threads);
            if (!std::isfinite(res.total))
                throw training_error(stage_name + ": loss diverged", epoch, last_finite);
            last_finite = res.total;
            loss_sum += res.total;

            params.zero_grads();
            params.grads.add_scaled(res.grads, 1.0);
            adam_step(params, adam, stage.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps);
            if (!params.finite())
                throw training_error(stage_name + ": parameters diverged", epoch, last_finite);
        }
        const double metric = val_metric(params);
        out.report.epochs.push_back({epoch, loss_sum / steps_per_epoch, metric});
        out.report.stopping_epoch = epoch;
        if (stopper.observe(metric)) {
            best = params;
            best_epoch = epoch;
        }
        if (stopper.should_stop()) break;
    }

    out.params = std::move(best);
    out.report.best_epoch = best_epoch;
    out.report.best_metric = stopper.best();
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace

void TrainConfig::validate() const {
    check_stage(stage1, "stage1");
    check_stage(stage2, "stage2");
    loss.validate();
    if (stage2_strength_scale < 0 || stage2_strength_scale > 1)
        throw config_error("stage2_strength_scale must be in [0,1]");
}

PairBatch sample_pairs(const Corpus& corpus, const std::vector<size_t>& split,
                       size_t batch_size, Rng& rng, PairMode mode) {
    if (batch_size == 0) throw config_error("sample_pairs: batch size must be positive");
    if (split.empty()) throw config_error("sample_pairs: empty split");
    const SplitIndex index(corpus, split);
    const ToyAutoencoder ae;
    const LatentStore store(corpus, ae, 1);
    BatchBuilder builder{corpus, index, store, ae, mode, /*augment=*/false, 1.0, 1};
    Rng aug_rng = rng.child(0x5AED);
    return builder.build(batch_size, rng, aug_rng);
}

TrainOutput train_stage1(const Corpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    const ToyAutoencoder ae;
    const LatentStore store(corpus, ae, cfg.threads);
    const SplitIndex index(corpus, corpus.train);
    const ReidValidator validator(corpus, corpus.val, store, cfg.seed, cfg.threads);
    BatchBuilder builder{corpus, index, store, ae, PairMode::supervised, false, 1.0, cfg.threads};

    Rng pair_rng(cfg.seed, kS1Pairs);
    Rng aug_rng(cfg.seed, kS1ValPairs); // unused in clean mode
    ModelParams params = init_params(cfg.seed, cfg.dims);
    return run_stage(
        std::move(params), "stage1", cfg.stage1, cfg, corpus.train.size(),
        [&](size_t n) { return builder.build(n, pair_rng, aug_rng); },
        [&](const ModelParams& p) { return validator(p); });
}

TrainOutput train_stage2(const ModelParams& init, const Corpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (init.dims != cfg.dims)
        throw config_error("train_stage2: checkpoint dims do not match config");
    const ToyAutoencoder ae;
    const LatentStore store(corpus, ae, cfg.threads);
    const SplitIndex index(corpus, corpus.train);
    const CopyRecallValidator validator(corpus, corpus.val, store, ae, cfg.seed, cfg.threads);
    BatchBuilder builder{corpus,    index, store, ae, PairMode::supervised,
                         /*augment=*/true, cfg.stage2_strength_scale, cfg.threads};

    Rng pair_rng(cfg.seed, kS2Pairs);
    Rng aug_rng(cfg.seed, kS2Aug);
    return run_stage(
        init, "stage2", cfg.stage2, cfg, corpus.train.size(),
        [&](size_t n) { return builder.build(n, pair_rng, aug_rng); },
        [&](const ModelParams& p) { return validator(p); });
}

TrainOutput train_single_stage_augmented(const Corpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    const ToyAutoencoder ae;
    const LatentStore store(corpus, ae, cfg.threads);
    const SplitIndex index(corpus, corpus.train);
    const ReidValidator validator(corpus, corpus.val, store, cfg.seed, cfg.threads);
    BatchBuilder builder{corpus, index, store, ae, PairMode::supervised,
                         /*augment=*/true, 1.0, cfg.threads};

    Rng pair_rng(cfg.seed, kSSPairs);
    Rng aug_rng(cfg.seed, kSSAug);
    ModelParams params = init_params(cfg.seed, cfg.dims);
    return run_stage(
        std::move(params), "single_stage_augmented", cfg.stage1, cfg, corpus.train.size(),
        [&](size_t n) { return builder.build(n, pair_rng, aug_rng); },
        [&](const ModelParams& p) { return validator(p); });
}

} // namespace lcmem
