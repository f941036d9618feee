#include "lcmem/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lcmem/errors.hpp"
#include "lcmem/io.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {
namespace {

using nlohmann::json;

constexpr int kCoarse = 8;        // smooth-field control grid
constexpr int kMaxShift = 2;      // intra-identity jitter in pixels
constexpr int kWalshGrid = 64;    // Walsh code resolution (= image size)

// rng stream tags
enum : uint64_t { kStreamSmooth = 1, kStreamSplit = 2, kStreamImages = 3 };

struct Amplitudes {
    double walsh;  // code amplitude around mid-gray
    double smooth; // smooth-field amplitude
};

// The Walsh component alone guarantees a pairwise mean pixel distance of
// `walsh` (two distinct codes disagree on exactly half the pixels, by 2A);
// independent smooth fields can shrink that by at most 2*`smooth` on those
// pixels, so `walsh - smooth >= separation` with `walsh + smooth <= 0.5`
// keeps every prototype inside [0,1] without clamping.
Amplitudes amplitudes_for(double separation) {
    Amplitudes a;
    a.smooth = (0.5 - separation) / 2.0;
    a.walsh = separation + a.smooth;
    return a;
}

// 2D Walsh pattern (u,v) at pixel (x,y): (-1)^(popcount(u&x)+popcount(v&y)).
// Patterns with u%8 != 0 or v%8 != 0 sum to zero over every aligned 8x8
// block, so they vanish under the toy encoder's pooling: identity codes
// separate images in pixel space without leaking into the latent.
inline int walsh_sign(int u, int v, int x, int y) {
    return (std::popcount(static_cast<unsigned>(u & x)) +
            std::popcount(static_cast<unsigned>(v & y))) &
                   1
               ? -1
               : 1;
}

// Enumeration order of pooling-invisible codes is fixed; index = global identity.
std::pair<int, int> walsh_code(int index) {
    int count = 0;
    for (int u = 0; u < kWalshGrid; ++u) {
        for (int v = 0; v < kWalshGrid; ++v) {
            if (u % 8 == 0 && v % 8 == 0) continue;
            if (count == index) return {u, v};
            ++count;
        }
    }
    throw config_error("identity count exceeds Walsh code capacity");
}

int walsh_capacity() { return kWalshGrid * kWalshGrid - (kWalshGrid / 8) * (kWalshGrid / 8); }

// Bilinear sample of the coarse grid at fractional pixel coordinates,
// clamped at the edges.
double sample_smooth(const std::vector<double>& coarse, int h, int w, double px, double py,
                     double cell_h, double cell_w) {
    double cy = (py + 0.5) / cell_h - 0.5;
    double cx = (px + 0.5) / cell_w - 0.5;
    cy = std::clamp(cy, 0.0, static_cast<double>(h - 1));
    cx = std::clamp(cx, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(cy);
    const int x0 = static_cast<int>(cx);
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = cy - y0;
    const double fx = cx - x0;
    return coarse[static_cast<size_t>(y0) * w + x0] * (1 - fy) * (1 - fx) +
           coarse[static_cast<size_t>(y0) * w + x1] * (1 - fy) * fx +
           coarse[static_cast<size_t>(y1) * w + x0] * fy * (1 - fx) +
           coarse[static_cast<size_t>(y1) * w + x1] * fy * fx;
}

std::vector<double> smooth_coarse_grid(const CorpusSpec& spec, int dataset, int local_identity,
                                       double amplitude) {
    Rng rng(spec.seed, kStreamSmooth);
    // one independent stream per (dataset, identity)
    Rng field = rng.child(static_cast<uint64_t>(dataset) * 1000003ULL +
                          static_cast<uint64_t>(local_identity));
    std::vector<double> coarse(kCoarse * kCoarse);
    for (auto& c : coarse) c = field.uniform(-amplitude, amplitude);
    return coarse;
}

ImageSample render_identity(const CorpusSpec& spec, int dataset, int local_identity,
                            int shift_x, int shift_y) {
    const auto amp = amplitudes_for(spec.inter_identity_separation);
    const int H = spec.image_height;
    const int W = spec.image_width;
    const auto coarse = smooth_coarse_grid(spec, dataset, local_identity, amp.smooth);
    const auto [wu, wv] = walsh_code(dataset * spec.identities_per_dataset + local_identity);
    const double cell_h = static_cast<double>(H) / kCoarse;
    const double cell_w = static_cast<double>(W) / kCoarse;

    ImageSample img;
    img.height = H;
    img.width = W;
    img.channels = 1;
    img.pixels.resize(static_cast<size_t>(H) * W);
    img.dataset_id = dataset;
    img.identity = static_cast<int64_t>(dataset) * spec.identities_per_dataset + local_identity;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double s = sample_smooth(coarse, kCoarse, kCoarse,
                                           x - static_cast<double>(shift_x),
                                           y - static_cast<double>(shift_y), cell_h, cell_w);
            const double wmod = amp.walsh * walsh_sign(wu, wv, x % kWalshGrid, y % kWalshGrid);
            img.pixels[static_cast<size_t>(y) * W + x] = static_cast<float>(0.5 + s + wmod);
        }
    }
    return img;
}

json stats_to_json(const std::vector<DatasetStats>& stats) {
    json arr = json::array();
    for (const auto& s : stats) arr.push_back({{"latent_mean", s.latent_mean}, {"latent_std", s.latent_std}});
    return arr;
}

} // namespace

void CorpusSpec::validate() const {
    if (n_datasets < 1 || identities_per_dataset < 1 || images_per_identity < 1)
        throw config_error("corpus spec: all counts must be >= 1");
    if (intra_identity_noise_scale < 0)
        throw config_error("corpus spec: noise scale must be >= 0");
    if (inter_identity_separation < 0 || inter_identity_separation > 0.5)
        throw config_error("corpus spec: separation must be in [0, 0.5] "
                           "(0.5 is the most [0,1]-valued prototypes can guarantee)");
    if (image_height % ToyAutoencoder::kBlock != 0 || image_width % ToyAutoencoder::kBlock != 0)
        throw config_error("corpus spec: image sides must be multiples of 8");
    if (n_datasets * identities_per_dataset > walsh_capacity())
        throw config_error("corpus spec: at most " + std::to_string(walsh_capacity()) +
                           " total identities supported");
}

ImageSample identity_prototype(const CorpusSpec& spec, int dataset, int local_identity) {
    spec.validate();
    return render_identity(spec, dataset, local_identity, 0, 0);
}

const std::vector<size_t>& Corpus::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw config_error("unknown split: " + name);
}

Corpus generate_corpus(const CorpusSpec& spec) {
    spec.validate();

    Corpus corpus;
    corpus.spec = spec;

    Rng image_rng(spec.seed, kStreamImages);
    uint64_t next_image_id = 0;
    for (int d = 0; d < spec.n_datasets; ++d) {
        for (int ident = 0; ident < spec.identities_per_dataset; ++ident) {
            Rng per_identity = image_rng.child(static_cast<uint64_t>(d) * 1000003ULL + ident);
            for (int k = 0; k < spec.images_per_identity; ++k) {
                const int sx = static_cast<int>(per_identity.uniform_int(2 * kMaxShift + 1)) - kMaxShift;
                const int sy = static_cast<int>(per_identity.uniform_int(2 * kMaxShift + 1)) - kMaxShift;
                ImageSample img = render_identity(spec, d, ident, sx, sy);
                if (spec.intra_identity_noise_scale > 0) {
                    for (auto& p : img.pixels) {
                        const double v = p + spec.intra_identity_noise_scale * per_identity.normal();
                        p = static_cast<float>(std::clamp(v, 0.0, 1.0));
                    }
                } else {
                    for (auto& p : img.pixels)
                        p = std::clamp(p, 0.0f, 1.0f);
                }
                img.image_id = next_image_id++;
                corpus.images.push_back(std::move(img));
            }
        }
    }

    // identity-disjoint splits: shuffle identities per dataset, 70/15/15
    Rng split_rng(spec.seed, kStreamSplit);
    const int n_id = spec.identities_per_dataset;
    const int n_val = static_cast<int>(std::floor(0.15 * n_id));
    const int n_test = static_cast<int>(std::floor(0.15 * n_id));
    for (int d = 0; d < spec.n_datasets; ++d) {
        std::vector<int> order(n_id);
        for (int i = 0; i < n_id; ++i) order[i] = i;
        split_rng.shuffle(order.data(), order.size());
        for (int i = 0; i < n_id; ++i) {
            auto* dest = &corpus.train;
            if (i < n_val)
                dest = &corpus.val;
            else if (i < n_val + n_test)
                dest = &corpus.test;
            const size_t base =
                (static_cast<size_t>(d) * n_id + order[i]) * spec.images_per_identity;
            for (int k = 0; k < spec.images_per_identity; ++k) dest->push_back(base + k);
        }
    }
    std::sort(corpus.train.begin(), corpus.train.end());
    std::sort(corpus.val.begin(), corpus.val.end());
    std::sort(corpus.test.begin(), corpus.test.end());

    // per-dataset latent statistics over the train split
    ToyAutoencoder ae;
    std::vector<double> sum(spec.n_datasets, 0.0), sumsq(spec.n_datasets, 0.0);
    std::vector<uint64_t> count(spec.n_datasets, 0);
    for (size_t idx : corpus.train) {
        const LatentSample z = ae.encode(corpus.images[idx]);
        const int d = corpus.images[idx].dataset_id;
        for (double v : z.values) {
            sum[d] += v;
            sumsq[d] += v * v;
        }
        count[d] += z.values.size();
    }
    corpus.stats.resize(spec.n_datasets);
    for (int d = 0; d < spec.n_datasets; ++d) {
        if (count[d] == 0) {
            corpus.stats[d] = {0.0, 1.0};
            continue;
        }
        const double mean = sum[d] / static_cast<double>(count[d]);
        const double var = sumsq[d] / static_cast<double>(count[d]) - mean * mean;
        corpus.stats[d].latent_mean = mean;
        corpus.stats[d].latent_std = var > 0 ? std::sqrt(var) : 1.0;
    }
    return corpus;
}

LatentSample normalized_latent(const ToyAutoencoder& ae, const ImageSample& x,
                               const DatasetStats& stats) {
    LatentSample z = ae.encode(x);
    const double scale = 0.5 / stats.latent_std;
    for (auto& v : z.values) v = (v - stats.latent_mean) * scale;
    return z;
}

// ---------------------------------------------------------------------------
// export / import
// ---------------------------------------------------------------------------

namespace {

MatrixContainer split_container(const Corpus& corpus, const std::vector<size_t>& split,
                                const Fingerprint& fp) {
    const auto& spec = corpus.spec;
    MatrixContainer c;
    c.rows = split.size();
    c.dim = static_cast<uint32_t>(spec.image_height) * spec.image_width;
    c.fingerprint = fp;
    c.ids.reserve(split.size());
    c.identities.reserve(split.size());
    c.data.reserve(split.size() * c.dim);
    for (size_t idx : split) {
        const auto& img = corpus.images[idx];
        c.ids.push_back(img.image_id);
        c.identities.push_back(img.identity);
        c.data.insert(c.data.end(), img.pixels.begin(), img.pixels.end());
    }
    return c;
}

json spec_to_json(const CorpusSpec& s) {
    return json{{"n_datasets", s.n_datasets},
                {"identities_per_dataset", s.identities_per_dataset},
                {"images_per_identity", s.images_per_identity},
                {"intra_identity_noise_scale", s.intra_identity_noise_scale},
                {"inter_identity_separation", s.inter_identity_separation},
                {"seed", s.seed},
                {"image_height", s.image_height},
                {"image_width", s.image_width}};
}

CorpusSpec spec_from_json(const json& j) {
    CorpusSpec s;
    s.n_datasets = j.at("n_datasets").get<int>();
    s.identities_per_dataset = j.at("identities_per_dataset").get<int>();
    s.images_per_identity = j.at("images_per_identity").get<int>();
    s.intra_identity_noise_scale = j.at("intra_identity_noise_scale").get<double>();
    s.inter_identity_separation = j.at("inter_identity_separation").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    s.image_height = j.at("image_height").get<int>();
    s.image_width = j.at("image_width").get<int>();
    return s;
}

} // namespace

void export_corpus(const Corpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const json spec_json = spec_to_json(corpus.spec);
    const std::string spec_str = spec_json.dump();
    const Fingerprint fp =
        sha256(reinterpret_cast<const uint8_t*>(spec_str.data()), spec_str.size());

    const std::pair<const char*, const std::vector<size_t>*> splits[] = {
        {"train", &corpus.train}, {"val", &corpus.val}, {"test", &corpus.test}};
    json sizes;
    for (const auto& [name, idxs] : splits) {
        split_container(corpus, *idxs, fp).save(dir + "/" + name + ".lcmi", kMagicImages);
        sizes[name] = idxs->size();
    }

    json manifest{{"schema_version", 1},
                  {"spec", spec_json},
                  {"split_sizes", sizes},
                  {"dataset_stats", stats_to_json(corpus.stats)}};
    std::ofstream out(dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw format_error("cannot write manifest in " + dir, 0);
}

Corpus import_corpus(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw format_error("cannot open " + dir + "/manifest.json", 0);
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        throw format_error("manifest parse error: " + std::string(e.what()), e.byte);
    }

    Corpus corpus;
    corpus.spec = spec_from_json(manifest.at("spec"));
    for (const auto& s : manifest.at("dataset_stats"))
        corpus.stats.push_back({s.at("latent_mean").get<double>(), s.at("latent_std").get<double>()});
    if (static_cast<int>(corpus.stats.size()) != corpus.spec.n_datasets)
        throw format_error("manifest dataset_stats size mismatch", 0);

    const int ipd = corpus.spec.identities_per_dataset;
    for (const char* name : {"train", "val", "test"}) {
        MatrixContainer c = MatrixContainer::load(dir + "/" + std::string(name) + ".lcmi",
                                                  kMagicImages);
        auto* split = &corpus.train;
        if (std::string(name) == "val") split = &corpus.val;
        if (std::string(name) == "test") split = &corpus.test;
        for (uint64_t r = 0; r < c.rows; ++r) {
            ImageSample img;
            img.height = corpus.spec.image_height;
            img.width = corpus.spec.image_width;
            img.channels = 1;
            img.image_id = c.ids[r];
            img.identity = c.identities[r];
            img.dataset_id = img.identity >= 0 ? static_cast<int>(img.identity / ipd)
                                               : 0;
            img.pixels.assign(c.data.begin() + static_cast<ptrdiff_t>(r * c.dim),
                              c.data.begin() + static_cast<ptrdiff_t>((r + 1) * c.dim));
            split->push_back(corpus.images.size());
            corpus.images.push_back(std::move(img));
        }
    }
    return corpus;
}

} // namespace lcmem
