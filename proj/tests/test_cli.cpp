#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcmem/cli_app.hpp"

using namespace lcmem;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"lcmem"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::map<std::string, std::vector<char>> dir_contents(const fs::path& dir) {
    std::map<std::string, std::vector<char>> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        out[fs::relative(entry.path(), dir).string()] =
            std::vector<char>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    }
    return out;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return json::parse(in);
}

// 16x16 images keep the whole pipeline fast; dims.input = 4*2*2 = 16
const char* kCorpusConfig = R"({
  "n_datasets": 2, "identities_per_dataset": 14, "images_per_identity": 3,
  "intra_identity_noise_scale": 0.05, "inter_identity_separation": 0.25,
  "seed": 7, "image_height": 16, "image_width": 16
})";

const char* kTrainConfig = R"({
  "stage1": {"max_epochs": 4, "patience": 4, "batch_size": 32, "learning_rate": 0.002},
  "stage2": {"max_epochs": 2, "patience": 2, "batch_size": 16, "learning_rate": 0.0002},
  "dims": {"input": 16, "enc1": 16, "enc2": 12, "feature": 8, "head_hidden": 6},
  "seed": 9
})";

} // namespace

TEST_CASE("corpus gen with the same seed produces identical output trees") {
    const auto dir_a = fresh_dir("lcmem_cli_corpus_a");
    const auto dir_b = fresh_dir("lcmem_cli_corpus_b");
    const auto cfg = fresh_dir("lcmem_cli_cfg") / "corpus.json";
    write_text(cfg, kCorpusConfig);

    CHECK(run({"--out", dir_a.string(), "--config", cfg.string(), "corpus", "gen"}) == 0);
    CHECK(run({"--out", dir_b.string(), "--config", cfg.string(), "corpus", "gen"}) == 0);
    CHECK(dir_contents(dir_a) == dir_contents(dir_b));

    // different seed, different tree
    const auto dir_c = fresh_dir("lcmem_cli_corpus_c");
    CHECK(run({"--out", dir_c.string(), "--config", cfg.string(), "--seed", "8", "corpus",
               "gen"}) == 0);
    CHECK(dir_contents(dir_c) != dir_contents(dir_a));
}

TEST_CASE("config errors exit with code 2") {
    const auto dir = fresh_dir("lcmem_cli_errs");
    const auto bad_key = dir / "bad_key.json";
    write_text(bad_key, R"({"n_datasets": 2, "typo_key": 1})");
    CHECK(run({"--out", (dir / "out").string(), "--config", bad_key.string(), "corpus",
               "gen"}) == 2);

    const auto bad_syntax = dir / "bad_syntax.json";
    write_text(bad_syntax, "{\n  \"n_datasets\": 2,\n  oops\n}");
    CHECK(run({"--out", (dir / "out").string(), "--config", bad_syntax.string(), "corpus",
               "gen"}) == 2);

    // missing corpus directory
    CHECK(run({"--out", (dir / "out").string(), "train", "stage1", "--corpus",
               (dir / "nope").string()}) == 2);

    // invalid spec values
    const auto bad_value = dir / "bad_value.json";
    write_text(bad_value, R"({"n_datasets": 0})");
    CHECK(run({"--out", (dir / "out").string(), "--config", bad_value.string(), "corpus",
               "gen"}) == 2);
}

TEST_CASE("full pipeline: gen, train, eval, atlas, audit, bench") {
    const auto root = fresh_dir("lcmem_cli_pipeline");
    const auto corpus_dir = root / "corpus";
    const auto cfg_dir = root / "cfg";
    fs::create_directories(cfg_dir);
    write_text(cfg_dir / "corpus.json", kCorpusConfig);
    write_text(cfg_dir / "train.json", kTrainConfig);

    REQUIRE(run({"--out", corpus_dir.string(), "--config", (cfg_dir / "corpus.json").string(),
                 "corpus", "gen"}) == 0);

    const auto train_dir = root / "train";
    REQUIRE(run({"--out", train_dir.string(), "--config", (cfg_dir / "train.json").string(),
                 "train", "full", "--corpus", corpus_dir.string()}) == 0);
    CHECK(fs::exists(train_dir / "stage1.lcmp"));
    CHECK(fs::exists(train_dir / "stage2.lcmp"));
    CHECK(fs::exists(train_dir / "train_report_stage1.json"));

    // reports carry schema_version and resolved configs are written
    const json report = read_json(train_dir / "train_report_stage1.json");
    CHECK(report.at("schema_version") == 1);
    CHECK(fs::exists(train_dir / "resolved_config.json"));

    // eval reid: required keys
    const auto reid_dir = root / "reid";
    REQUIRE(run({"--out", reid_dir.string(), "eval", "reid", "--corpus", corpus_dir.string(),
                 "--params", (train_dir / "stage2.lcmp").string()}) == 0);
    const json reid = read_json(reid_dir / "reid_report.json");
    CHECK(reid.contains("auc"));
    CHECK(reid.contains("precision_at_recall_99"));
    CHECK(reid.contains("specificity_at_sensitivity_99"));

    // eval copy with a strength-0 row
    const auto sweep = cfg_dir / "sweep.json";
    write_text(sweep, R"([{"kind": "additive_noise", "strengths": [0.0, 1.0]}])");
    const auto copy_dir = root / "copy";
    REQUIRE(run({"--out", copy_dir.string(), "eval", "copy", "--corpus", corpus_dir.string(),
                 "--params", (train_dir / "stage2.lcmp").string(), "--sweep",
                 sweep.string()}) == 0);
    const json copy_report = read_json(copy_dir / "copy_report.json");
    const double threshold = copy_report.at("calibration").at("threshold").get<double>();

    // cross-command consistency: the strength-0 macro recall must match
    // eval reid's clean recall at the same threshold
    const auto reid2_dir = root / "reid_at_t";
    REQUIRE(run({"--out", reid2_dir.string(), "eval", "reid", "--corpus", corpus_dir.string(),
                 "--params", (train_dir / "stage2.lcmp").string(), "--threshold",
                 std::to_string(threshold)}) == 0);
    const json reid2 = read_json(reid2_dir / "reid_report.json");
    const double clean_recall = reid2.at("clean_recall_at_threshold").get<double>();

    double strength0_macro = -1;
    {
        std::ifstream csv(copy_dir / "robustness.csv");
        REQUIRE(csv.good());
        std::string line;
        std::getline(csv, line);
        CHECK(line == "dataset,kind,strength,recall,pairs");
        while (std::getline(csv, line)) {
            if (line.rfind("macro,additive_noise,0,", 0) == 0) {
                const auto a = line.find(",0,") + 3;
                const auto b = line.find(',', a);
                strength0_macro = std::stod(line.substr(a, b - a));
            }
        }
    }
    REQUIRE(strength0_macro >= 0);
    CHECK(strength0_macro == doctest::Approx(clean_recall).epsilon(1e-9));

    // atlas + audit + bench
    const auto atlas_file = root / "atlas.lcma";
    REQUIRE(run({"atlas", "build", "--corpus", corpus_dir.string(), "--params",
                 (train_dir / "stage2.lcmp").string(), "--split", "train", "--file",
                 atlas_file.string()}) == 0);
    const auto audit_dir = root / "audit";
    REQUIRE(run({"--out", audit_dir.string(), "audit", "one-vs-all", "--atlas",
                 atlas_file.string(), "--corpus", corpus_dir.string(), "--params",
                 (train_dir / "stage2.lcmp").string()}) == 0);
    const json audit = read_json(audit_dir / "audit_report.json");
    CHECK(audit.at("n_pairs").get<uint64_t>() > 0);
    CHECK(audit.at("schema_version") == 1);

    const auto mem_dir = root / "memrate";
    REQUIRE(run({"--out", mem_dir.string(), "audit", "memrate", "--corpus",
                 corpus_dir.string(), "--params", (train_dir / "stage2.lcmp").string(),
                 "--p-mem", "0.2", "--trials", "50"}) == 0);
    CHECK(read_json(mem_dir / "memrate_report.json").contains("mem_rate_prefilter"));

    const auto bench_dir = root / "bench";
    REQUIRE(run({"--out", bench_dir.string(), "bench", "throughput", "--rows", "2000",
                 "--queries", "20"}) == 0);
    CHECK(read_json(bench_dir / "throughput.json").contains("single_thread"));

    fs::remove_all(root);
}

TEST_CASE("scoring a mismatched model exits with a validation failure") {
    const auto root = fresh_dir("lcmem_cli_mismatch");
    const auto cfg = root / "corpus.json";
    write_text(cfg, kCorpusConfig);
    const auto corpus_dir = root / "corpus";
    REQUIRE(run({"--out", corpus_dir.string(), "--config", cfg.string(), "corpus", "gen"}) == 0);

    write_text(root / "train.json", kTrainConfig);
    const auto train_dir = root / "train";
    REQUIRE(run({"--out", train_dir.string(), "--config", (root / "train.json").string(),
                 "train", "stage1", "--corpus", corpus_dir.string()}) == 0);

    const auto atlas_file = root / "atlas.lcma";
    REQUIRE(run({"atlas", "build", "--corpus", corpus_dir.string(), "--params",
                 (train_dir / "stage1.lcmp").string(), "--file", atlas_file.string()}) == 0);

    // different params: a second training run with another seed
    const auto train2_dir = root / "train2";
    REQUIRE(run({"--out", train2_dir.string(), "--config", (root / "train.json").string(),
                 "--seed", "123", "train", "stage1", "--corpus", corpus_dir.string()}) == 0);
    CHECK(run({"--out", (root / "audit").string(), "audit", "one-vs-all", "--atlas",
               atlas_file.string(), "--corpus", corpus_dir.string(), "--params",
               (train2_dir / "stage1.lcmp").string()}) == 1);
    fs::remove_all(root);
}
