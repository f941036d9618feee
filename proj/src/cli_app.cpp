#include "lcmem/cli_app.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcmem/atlas.hpp"
#include "lcmem/augment.hpp"
#include "lcmem/corpus.hpp"
#include "lcmem/errors.hpp"
#include "lcmem/metrics.hpp"
#include "lcmem/mockgen.hpp"
#include "lcmem/parallel.hpp"
#include "lcmem/pipeline.hpp"
#include "lcmem/training.hpp"

namespace lcmem {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// config plumbing
// ---------------------------------------------------------------------------

std::pair<size_t, size_t> line_col_of(const std::string& text, size_t byte) {
    size_t line = 1, col = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col_of(text, e.byte);
        throw config_error(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                           ": " + e.what());
    }
}

// Unknown keys are rejected so typos never silently fall back to defaults.
void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw config_error(where + ": unknown key '" + key + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

CorpusSpec corpus_spec_from_json(const json& j) {
    check_keys(j,
               {"n_datasets", "identities_per_dataset", "images_per_identity",
                "intra_identity_noise_scale", "inter_identity_separation", "seed",
                "image_height", "image_width"},
               "corpus config");
    CorpusSpec spec;
    maybe(j, "n_datasets", spec.n_datasets);
    maybe(j, "identities_per_dataset", spec.identities_per_dataset);
    maybe(j, "images_per_identity", spec.images_per_identity);
    maybe(j, "intra_identity_noise_scale", spec.intra_identity_noise_scale);
    maybe(j, "inter_identity_separation", spec.inter_identity_separation);
    maybe(j, "seed", spec.seed);
    maybe(j, "image_height", spec.image_height);
    maybe(j, "image_width", spec.image_width);
    return spec;
}

json corpus_spec_to_json(const CorpusSpec& s) {
    return json{{"n_datasets", s.n_datasets},
                {"identities_per_dataset", s.identities_per_dataset},
                {"images_per_identity", s.images_per_identity},
                {"intra_identity_noise_scale", s.intra_identity_noise_scale},
                {"inter_identity_separation", s.inter_identity_separation},
                {"seed", s.seed},
                {"image_height", s.image_height},
                {"image_width", s.image_width}};
}

void stage_from_json(const json& j, StageConfig& s, const std::string& where) {
    check_keys(j, {"max_epochs", "patience", "batch_size", "learning_rate"}, where);
    maybe(j, "max_epochs", s.max_epochs);
    maybe(j, "patience", s.patience);
    maybe(j, "batch_size", s.batch_size);
    maybe(j, "learning_rate", s.learning_rate);
}

TrainConfig train_config_from_json(const json& j) {
    check_keys(j,
               {"stage1", "stage2", "loss", "adam_beta1", "adam_beta2", "adam_eps", "seed",
                "dims", "stage2_strength_scale", "threads"},
               "train config");
    TrainConfig cfg;
    if (j.contains("stage1")) stage_from_json(j.at("stage1"), cfg.stage1, "train config.stage1");
    if (j.contains("stage2")) stage_from_json(j.at("stage2"), cfg.stage2, "train config.stage2");
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        check_keys(l, {"alpha", "temperature", "normalize_features"}, "train config.loss");
        maybe(l, "alpha", cfg.loss.alpha);
        maybe(l, "temperature", cfg.loss.temperature);
        maybe(l, "normalize_features", cfg.loss.normalize_features);
    }
    if (j.contains("dims")) {
        const auto& d = j.at("dims");
        check_keys(d, {"input", "enc1", "enc2", "feature", "head_hidden"}, "train config.dims");
        maybe(d, "input", cfg.dims.input);
        maybe(d, "enc1", cfg.dims.enc1);
        maybe(d, "enc2", cfg.dims.enc2);
        maybe(d, "feature", cfg.dims.feature);
        maybe(d, "head_hidden", cfg.dims.head_hidden);
    }
    maybe(j, "adam_beta1", cfg.adam_beta1);
    maybe(j, "adam_beta2", cfg.adam_beta2);
    maybe(j, "adam_eps", cfg.adam_eps);
    maybe(j, "seed", cfg.seed);
    maybe(j, "stage2_strength_scale", cfg.stage2_strength_scale);
    maybe(j, "threads", cfg.threads);
    return cfg;
}

json train_config_to_json(const TrainConfig& c) {
    auto stage = [](const StageConfig& s) {
        return json{{"max_epochs", s.max_epochs},
                    {"patience", s.patience},
                    {"batch_size", s.batch_size},
                    {"learning_rate", s.learning_rate}};
    };
    return json{{"stage1", stage(c.stage1)},
                {"stage2", stage(c.stage2)},
                {"loss",
                 {{"alpha", c.loss.alpha},
                  {"temperature", c.loss.temperature},
                  {"normalize_features", c.loss.normalize_features}}},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"seed", c.seed},
                {"dims",
                 {{"input", c.dims.input},
                  {"enc1", c.dims.enc1},
                  {"enc2", c.dims.enc2},
                  {"feature", c.dims.feature},
                  {"head_hidden", c.dims.head_hidden}}},
                {"stage2_strength_scale", c.stage2_strength_scale},
                {"threads", c.threads}};
}

std::vector<SweepEntry> sweep_from_json(const json& j) {
    if (!j.is_array()) throw config_error("sweep config: expected a JSON array");
    std::vector<SweepEntry> sweep;
    for (const auto& entry : j) {
        check_keys(entry, {"kind", "strengths"}, "sweep entry");
        SweepEntry e;
        e.kind = aug_kind_from_name(entry.at("kind").get<std::string>());
        e.strengths = entry.at("strengths").get<std::vector<double>>();
        sweep.push_back(std::move(e));
    }
    return sweep;
}

void write_json(const std::string& path, const json& j) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw config_error("cannot write " + path);
}

void write_resolved_config(const std::string& out_dir, const std::string& command,
                           const json& resolved) {
    json j{{"schema_version", kSchemaVersion}, {"command", command}, {"config", resolved}};
    write_json(out_dir + "/resolved_config.json", j);
}

int resolve_thread_flag(int threads_flag) {
    if (threads_flag > 0) return threads_flag;
    if (const char* env = std::getenv("LCMEM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return resolve_threads(0);
}

// ---------------------------------------------------------------------------
// shared evaluation pieces
// ---------------------------------------------------------------------------

json reid_metrics_json(const Corpus& corpus, const std::vector<ReidPair>& pairs,
                       const ModelScorer& scorer, double clean_threshold, uint64_t seed) {
    (void)seed;
    std::set<int> datasets;
    for (const auto& p : pairs) datasets.insert(p.dataset);

    json per_dataset = json::object();
    double auc_sum = 0, par_sum = 0, sas_sum = 0;
    for (int d : datasets) {
        const ScoredPairs sp = score_pairs(corpus, pairs, scorer, d);
        const double auc = roc_auc(sp);
        const auto par = precision_at_recall(sp, 0.99);
        const auto sas = specificity_at_sensitivity(sp, 0.99);
        per_dataset[std::to_string(d)] = {
            {"auc", auc},
            {"precision_at_recall_99", par.value},
            {"precision_threshold", par.threshold},
            {"specificity_at_sensitivity_99", sas.value},
            {"specificity_threshold", sas.threshold},
            {"pairs", sp.size()}};
        auc_sum += auc;
        par_sum += par.value;
        sas_sum += sas.value;
    }
    const double n = static_cast<double>(datasets.size());

    // clean positive-pair recall at a fixed threshold (the strength-0 row of
    // a copy sweep with the same threshold must match this)
    const ScoredPairs all = score_pairs(corpus, pairs, scorer);
    size_t pos = 0, hit = 0;
    for (size_t i = 0; i < all.size(); ++i) {
        if (all.labels[i] != 1) continue;
        ++pos;
        if (all.scores[i] >= clean_threshold) ++hit;
    }

    return json{{"schema_version", kSchemaVersion},
                {"auc", auc_sum / n},
                {"precision_at_recall_99", par_sum / n},
                {"specificity_at_sensitivity_99", sas_sum / n},
                {"per_dataset", per_dataset},
                {"clean_recall_threshold", clean_threshold},
                {"clean_recall_at_threshold", pos ? static_cast<double>(hit) / pos : 0.0},
                {"pairs_total", all.size()}};
}

json audit_report_json(const AuditReport& r) {
    json top = json::array();
    for (const auto& q : r.top_matches) {
        json matches = json::array();
        for (const auto& m : q.top) matches.push_back({{"atlas_id", m.atlas_id}, {"score", m.score}});
        top.push_back({{"query_id", q.query_id}, {"matches", matches}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"n_queries", r.n_queries},
                {"n_atlas", r.n_atlas},
                {"n_pairs", r.n_pairs},
                {"threshold", r.threshold},
                {"flagged", r.flagged},
                {"positive_pairs", r.positive_pairs},
                {"negative_pairs", r.negative_pairs},
                {"positives_flagged", r.positives_flagged},
                {"negatives_flagged", r.negatives_flagged},
                {"positive_hist", r.positive_hist},
                {"negative_hist", r.negative_hist},
                {"top_matches", top},
                {"wall_seconds", r.wall_seconds},
                {"pairs_per_second", r.pairs_per_second},
                {"threads", r.threads},
                {"block_size", r.block_size}};
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

struct GlobalFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<uint64_t> seed;
    int threads = 0;
};

int cmd_corpus_gen(const GlobalFlags& g) {
    CorpusSpec spec;
    if (!g.config_path.empty()) spec = corpus_spec_from_json(load_json_file(g.config_path));
    if (g.seed) spec.seed = *g.seed;
    const Corpus corpus = generate_corpus(spec);
    export_corpus(corpus, g.out_dir);
    write_resolved_config(g.out_dir, "corpus gen", corpus_spec_to_json(spec));
    std::cout << "corpus: " << corpus.images.size() << " images (train " << corpus.train.size()
              << ", val " << corpus.val.size() << ", test " << corpus.test.size() << ") -> "
              << g.out_dir << "\n";
    return 0;
}

json train_report_json(const TrainReport& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs)
        epochs.push_back(
            {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_metric", e.val_metric}});
    return json{{"schema_version", kSchemaVersion}, {"stage", r.stage},
                {"optimizer", r.optimizer},       {"epochs", epochs},
                {"stopping_epoch", r.stopping_epoch}, {"best_epoch", r.best_epoch},
                {"best_metric", r.best_metric},   {"wall_seconds", r.wall_seconds}};
}

int cmd_train(const GlobalFlags& g, const std::string& corpus_dir, const std::string& init_path,
              bool run_stage1, bool run_stage2) {
    TrainConfig cfg;
    if (!g.config_path.empty()) cfg = train_config_from_json(load_json_file(g.config_path));
    if (g.seed) cfg.seed = *g.seed;
    cfg.threads = resolve_thread_flag(g.threads > 0 ? g.threads : cfg.threads);

    const Corpus corpus = import_corpus(corpus_dir);
    fs::create_directories(g.out_dir);
    write_resolved_config(g.out_dir, "train", train_config_to_json(cfg));

    ModelParams params;
    if (run_stage1) {
        TrainOutput out = train_stage1(corpus, cfg);
        save_params(out.params, g.out_dir + "/stage1.lcmp");
        write_json(g.out_dir + "/train_report_stage1.json", train_report_json(out.report));
        std::cout << "stage1: best val AUC " << out.report.best_metric << " at epoch "
                  << out.report.best_epoch << " (" << out.report.wall_seconds << " s)\n";
        params = std::move(out.params);
    } else {
        params = load_params(init_path);
    }
    if (run_stage2) {
        TrainOutput out = train_stage2(params, corpus, cfg);
        save_params(out.params, g.out_dir + "/stage2.lcmp");
        write_json(g.out_dir + "/train_report_stage2.json", train_report_json(out.report));
        std::cout << "stage2: best val noise-recall " << out.report.best_metric << " at epoch "
                  << out.report.best_epoch << " (" << out.report.wall_seconds << " s)\n";
    }
    return 0;
}

int cmd_eval_reid(const GlobalFlags& g, const std::string& corpus_dir,
                  const std::string& params_path, const std::string& split_name,
                  double threshold) {
    const Corpus corpus = import_corpus(corpus_dir);
    const ModelParams params = load_params(params_path);
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);
    const uint64_t seed = g.seed.value_or(corpus.spec.seed);

    const auto pairs = build_reid_pairs(corpus, corpus.split(split_name), seed);
    const json report = reid_metrics_json(corpus, pairs, scorer, threshold, seed);
    fs::create_directories(g.out_dir);
    write_resolved_config(g.out_dir, "eval reid",
                          json{{"corpus", corpus_dir},
                               {"params", params_path},
                               {"split", split_name},
                               {"threshold", threshold},
                               {"seed", seed}});
    write_json(g.out_dir + "/reid_report.json", report);
    std::cout << "reid AUC " << report.at("auc").get<double>() << ", spec@0.99sens "
              << report.at("specificity_at_sensitivity_99").get<double>() << "\n";
    return 0;
}

int cmd_eval_copy(const GlobalFlags& g, const std::string& corpus_dir,
                  const std::string& params_path, const std::string& sweep_path,
                  const std::string& split_name, const std::string& target_name,
                  double target_value, int max_pairs) {
    const Corpus corpus = import_corpus(corpus_dir);
    const ModelParams params = load_params(params_path);
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);
    const uint64_t seed = g.seed.value_or(corpus.spec.seed);

    std::vector<SweepEntry> sweep = sweep_from_json(load_json_file(sweep_path));

    CalibrationTarget target;
    if (target_name == "recall")
        target = CalibrationTarget::recall;
    else if (target_name == "specificity")
        target = CalibrationTarget::specificity;
    else if (target_name == "sensitivity")
        target = CalibrationTarget::sensitivity;
    else
        throw config_error("unknown calibration target: " + target_name);

    // calibrate on validation, evaluate the sweep on the requested split
    const auto val_pairs = build_reid_pairs(corpus, corpus.val, seed);
    const ScoredPairs val_scores = score_pairs(corpus, val_pairs, scorer);
    const CalibrationResult cal = calibrate(val_scores, target, target_value);

    const auto cells = robustness_curve(corpus, corpus.split(split_name), scorer, sweep, cal,
                                        seed, max_pairs);

    fs::create_directories(g.out_dir);
    std::ofstream csv(g.out_dir + "/robustness.csv");
    csv << "dataset,kind,strength,recall,pairs\n";
    for (const auto& c : cells) {
        csv << (c.dataset < 0 ? std::string("macro") : std::to_string(c.dataset)) << ","
            << aug_kind_name(c.kind) << "," << c.strength << "," << c.recall << "," << c.pairs
            << "\n";
    }
    if (!csv) throw config_error("cannot write robustness.csv");

    write_resolved_config(g.out_dir, "eval copy",
                          json{{"corpus", corpus_dir},
                               {"params", params_path},
                               {"sweep", sweep_path},
                               {"split", split_name},
                               {"calibration_target", target_name},
                               {"calibration_value", target_value},
                               {"max_pairs", max_pairs},
                               {"seed", seed}});
    write_json(g.out_dir + "/copy_report.json",
               json{{"schema_version", kSchemaVersion},
                    {"calibration",
                     {{"target", calibration_target_name(cal.target)},
                      {"target_value", cal.target_value},
                      {"threshold", cal.threshold},
                      {"achieved", cal.achieved},
                      {"degenerate", cal.degenerate}}},
                    {"cells", cells.size()}});
    std::cout << "copy sweep: " << cells.size() << " cells at threshold " << cal.threshold
              << "\n";
    return 0;
}

int cmd_atlas_build(const GlobalFlags& g, const std::string& corpus_dir,
                    const std::string& params_path, const std::string& split_name,
                    const std::string& out_file) {
    const Corpus corpus = import_corpus(corpus_dir);
    const ModelParams params = load_params(params_path);
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);
    const Atlas atlas =
        build_atlas(scorer, corpus, corpus.split(split_name), resolve_thread_flag(g.threads));
    fs::create_directories(fs::path(out_file).parent_path().empty()
                               ? "."
                               : fs::path(out_file).parent_path().string());
    atlas.save(out_file);
    std::cout << "atlas: " << atlas.rows() << " x " << atlas.dim() << " -> " << out_file
              << " (fingerprint " << hex(atlas.fingerprint).substr(0, 12) << ")\n";
    return 0;
}

int cmd_audit_one_vs_all(const GlobalFlags& g, const std::string& atlas_path,
                         const std::string& corpus_dir, const std::string& params_path,
                         const std::string& split_name, double threshold, int max_queries,
                         size_t block_size) {
    const Corpus corpus = import_corpus(corpus_dir);
    const ModelParams params = load_params(params_path);
    const Atlas atlas = Atlas::load(atlas_path);
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);

    std::vector<size_t> query_idx = corpus.split(split_name);
    if (max_queries > 0 && static_cast<size_t>(max_queries) < query_idx.size())
        query_idx.resize(max_queries);
    const int threads = resolve_thread_flag(g.threads);
    const FeatureMatrix queries = compute_features(scorer, corpus, query_idx, threads);

    const AuditReport report =
        score_one_vs_all(atlas, queries, params, threshold, threads, block_size);
    fs::create_directories(g.out_dir);
    write_resolved_config(g.out_dir, "audit one-vs-all",
                          json{{"atlas", atlas_path},
                               {"corpus", corpus_dir},
                               {"params", params_path},
                               {"split", split_name},
                               {"threshold", threshold},
                               {"max_queries", max_queries},
                               {"block_size", block_size},
                               {"threads", threads}});
    write_json(g.out_dir + "/audit_report.json", audit_report_json(report));
    std::cout << "one-vs-all: " << report.n_pairs << " pairs, " << report.flagged
              << " flagged, " << static_cast<uint64_t>(report.pairs_per_second) << " pairs/s\n";
    return 0;
}

int cmd_audit_memrate(const GlobalFlags& g, const std::string& corpus_dir,
                      const std::string& params_path, double p_mem, int trials,
                      int max_retries) {
    const Corpus corpus = import_corpus(corpus_dir);
    const ModelParams params = load_params(params_path);
    const ToyAutoencoder ae;
    const ModelScorer scorer(params, ae, corpus.stats);
    const uint64_t seed = g.seed.value_or(corpus.spec.seed);

    const auto& pool = corpus.split("test");
    if (pool.empty()) throw config_error("audit memrate: empty test split");
    MockGenerator gen(corpus, pool, p_mem, Rng(seed, 0x6E6));
    Rng pick(seed, 0x9C4);

    // pre-filter memorization rate + filter efficacy with oracle flags
    int prefilter_flagged = 0, accepted = 0, accepted_memorized = 0, unresolved = 0;
    for (int t = 0; t < trials; ++t) {
        const auto& x_r = corpus.images[pool[pick.uniform_int(pool.size())]];
        const auto draw = gen.generate(x_r);
        if (scorer.score(draw.sample, x_r) > 0.5) ++prefilter_flagged;

        bool last_memorized = false;
        const auto outcome = filter_loop(
            x_r,
            [&] {
                auto d = gen.generate(x_r);
                last_memorized = d.memorized;
                return d.sample;
            },
            scorer, max_retries);
        if (outcome.resolved) {
            ++accepted;
            if (last_memorized) ++accepted_memorized;
        } else {
            ++unresolved;
        }
    }

    const double memrate = static_cast<double>(prefilter_flagged) / trials;
    fs::create_directories(g.out_dir);
    write_resolved_config(g.out_dir, "audit memrate",
                          json{{"corpus", corpus_dir},
                               {"params", params_path},
                               {"p_mem", p_mem},
                               {"trials", trials},
                               {"max_retries", max_retries},
                               {"seed", seed}});
    write_json(g.out_dir + "/memrate_report.json",
               json{{"schema_version", kSchemaVersion},
                    {"p_mem", p_mem},
                    {"trials", trials},
                    {"mem_rate_prefilter", memrate},
                    {"accepted", accepted},
                    {"accepted_memorized", accepted_memorized},
                    {"accepted_memorized_fraction",
                     accepted > 0 ? static_cast<double>(accepted_memorized) / accepted : 0.0},
                    {"unresolved", unresolved}});
    std::cout << "memrate (pre-filter) " << memrate << ", accepted-memorized "
              << accepted_memorized << "/" << accepted << "\n";
    return 0;
}

int cmd_bench_throughput(const GlobalFlags& g, int atlas_rows, int queries, int feature_dim,
                         size_t block_size) {
    ModelDims dims;
    dims.feature = feature_dim;
    const ModelParams params = init_params(g.seed.value_or(7), dims);

    Rng rng(g.seed.value_or(7), 0xBE7C);
    Atlas atlas;
    atlas.fingerprint = param_fingerprint(params);
    atlas.features.dim = static_cast<uint32_t>(feature_dim);
    atlas.features.ids.resize(atlas_rows);
    atlas.features.identities.assign(atlas_rows, -1);
    atlas.features.values.resize(static_cast<size_t>(atlas_rows) * feature_dim);
    for (int i = 0; i < atlas_rows; ++i) atlas.features.ids[i] = i;
    for (auto& v : atlas.features.values) v = static_cast<float>(rng.normal());

    FeatureMatrix qm;
    qm.dim = atlas.features.dim;
    qm.ids.resize(queries);
    qm.identities.assign(queries, -1);
    qm.values.resize(static_cast<size_t>(queries) * feature_dim);
    for (int i = 0; i < queries; ++i) qm.ids[i] = i;
    for (auto& v : qm.values) v = static_cast<float>(rng.normal());

    const int threads = resolve_thread_flag(g.threads);
    const AuditReport single = score_one_vs_all(atlas, qm, params, 0.5, 1, block_size, 0);
    const AuditReport multi = score_one_vs_all(atlas, qm, params, 0.5, threads, block_size, 0);

    fs::create_directories(g.out_dir);
    write_json(g.out_dir + "/throughput.json",
               json{{"schema_version", kSchemaVersion},
                    {"atlas_rows", atlas_rows},
                    {"queries", queries},
                    {"feature_dim", feature_dim},
                    {"block_size", block_size},
                    {"single_thread", audit_report_json(single)},
                    {"multi_thread", audit_report_json(multi)}});
    std::cout << "throughput: " << static_cast<uint64_t>(single.pairs_per_second)
              << " pairs/s @1 thread, " << static_cast<uint64_t>(multi.pairs_per_second)
              << " pairs/s @" << multi.threads << " threads\n";
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"LCMem memorization-auditing engine"};
    app.require_subcommand(1);

    GlobalFlags g;
    uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", seed_flag, "global seed override")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--threads", g.threads, "worker threads (0 = auto, env LCMEM_THREADS)");

    // corpus gen
    auto* corpus_cmd = app.add_subcommand("corpus", "corpus operations");
    auto* corpus_gen = corpus_cmd->add_subcommand("gen", "generate a synthetic corpus");

    // train stage1|stage2|full
    std::string corpus_dir, init_path = "stage1.lcmp";
    auto* train_cmd = app.add_subcommand("train", "train the detector");
    auto* train_s1 = train_cmd->add_subcommand("stage1", "clean latent stage");
    auto* train_s2 = train_cmd->add_subcommand("stage2", "augmented fine-tuning stage");
    auto* train_full = train_cmd->add_subcommand("full", "both stages");
    for (auto* c : {train_s1, train_s2, train_full})
        c->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train_s2->add_option("--init", init_path, "stage-1 checkpoint")->required();

    // eval reid / eval copy
    std::string params_path, sweep_path, split_name = "test";
    double reid_threshold = 0.5;
    std::string cal_target = "specificity";
    double cal_value = 0.50;
    int max_pairs = 1000;
    auto* eval_cmd = app.add_subcommand("eval", "evaluation");
    auto* eval_reid = eval_cmd->add_subcommand("reid", "re-identification metrics");
    auto* eval_copy = eval_cmd->add_subcommand("copy", "copy-detection robustness sweep");
    for (auto* c : {eval_reid, eval_copy}) {
        c->add_option("--corpus", corpus_dir, "corpus directory")->required();
        c->add_option("--params", params_path, "parameter file")->required();
        c->add_option("--split", split_name, "split to evaluate")->capture_default_str();
    }
    eval_reid->add_option("--threshold", reid_threshold, "clean-recall threshold")
        ->capture_default_str();
    eval_copy->add_option("--sweep", sweep_path, "sweep JSON")->required();
    eval_copy->add_option("--cal-target", cal_target, "recall|specificity|sensitivity")
        ->capture_default_str();
    eval_copy->add_option("--cal-value", cal_value, "calibration target value")
        ->capture_default_str();
    eval_copy->add_option("--max-pairs", max_pairs, "positive pairs per dataset")
        ->capture_default_str();

    // atlas build
    std::string atlas_out = "atlas.lcma", atlas_split = "train";
    auto* atlas_cmd = app.add_subcommand("atlas", "atlas operations");
    auto* atlas_build_cmd = atlas_cmd->add_subcommand("build", "build a feature atlas");
    atlas_build_cmd->add_option("--corpus", corpus_dir, "corpus directory")->required();
    atlas_build_cmd->add_option("--params", params_path, "parameter file")->required();
    atlas_build_cmd->add_option("--split", atlas_split, "split to index")->capture_default_str();
    atlas_build_cmd->add_option("--file", atlas_out, "output atlas file")->capture_default_str();

    // audit one-vs-all / memrate
    std::string atlas_path;
    double audit_threshold = 0.5, p_mem = 0.1;
    int max_queries = 0, trials = 1000, max_retries = 10;
    size_t block_size = 1024;
    auto* audit_cmd = app.add_subcommand("audit", "privacy audits");
    auto* audit_ova = audit_cmd->add_subcommand("one-vs-all", "exhaustive pair audit");
    audit_ova->add_option("--atlas", atlas_path, "atlas file")->required();
    audit_ova->add_option("--corpus", corpus_dir, "corpus directory")->required();
    audit_ova->add_option("--params", params_path, "parameter file")->required();
    audit_ova->add_option("--split", split_name, "query split")->capture_default_str();
    audit_ova->add_option("--threshold", audit_threshold, "flag threshold")
        ->capture_default_str();
    audit_ova->add_option("--max-queries", max_queries, "limit query count (0 = all)")
        ->capture_default_str();
    audit_ova->add_option("--block-size", block_size, "atlas block size")->capture_default_str();
    auto* audit_mem = audit_cmd->add_subcommand("memrate", "mock-generator memorization rate");
    audit_mem->add_option("--corpus", corpus_dir, "corpus directory")->required();
    audit_mem->add_option("--params", params_path, "parameter file")->required();
    audit_mem->add_option("--p-mem", p_mem, "mock memorization probability")
        ->capture_default_str();
    audit_mem->add_option("--trials", trials, "number of trials")->capture_default_str();
    audit_mem->add_option("--max-retries", max_retries, "filter retries")->capture_default_str();

    // bench throughput
    int bench_rows = 10000, bench_queries = 100, bench_dim = 64;
    auto* bench_cmd = app.add_subcommand("bench", "benchmarks");
    auto* bench_tp = bench_cmd->add_subcommand("throughput", "pair-scoring throughput");
    bench_tp->add_option("--rows", bench_rows, "atlas rows")->capture_default_str();
    bench_tp->add_option("--queries", bench_queries, "query count")->capture_default_str();
    bench_tp->add_option("--dim", bench_dim, "feature dimension")->capture_default_str();
    bench_tp->add_option("--block-size", block_size, "atlas block size")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (seed_set) g.seed = seed_flag;

    try {
        if (corpus_gen->parsed()) return cmd_corpus_gen(g);
        if (train_s1->parsed()) return cmd_train(g, corpus_dir, "", true, false);
        if (train_s2->parsed()) return cmd_train(g, corpus_dir, init_path, false, true);
        if (train_full->parsed()) return cmd_train(g, corpus_dir, "", true, true);
        if (eval_reid->parsed())
            return cmd_eval_reid(g, corpus_dir, params_path, split_name, reid_threshold);
        if (eval_copy->parsed())
            return cmd_eval_copy(g, corpus_dir, params_path, sweep_path, split_name, cal_target,
                                 cal_value, max_pairs);
        if (atlas_build_cmd->parsed())
            return cmd_atlas_build(g, corpus_dir, params_path, atlas_split, atlas_out);
        if (audit_ova->parsed())
            return cmd_audit_one_vs_all(g, atlas_path, corpus_dir, params_path, split_name,
                                        audit_threshold, max_queries, block_size);
        if (audit_mem->parsed())
            return cmd_audit_memrate(g, corpus_dir, params_path, p_mem, trials, max_retries);
        if (bench_tp->parsed())
            return cmd_bench_throughput(g, bench_rows, bench_queries, bench_dim, block_size);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const format_error& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace lcmem
