#include "lcmem/model.hpp"

#include <array>
#include <cmath>
#include <cstring>

#include "lcmem/errors.hpp"
#include "lcmem/io.hpp"
#include "lcmem/rng.hpp"

namespace lcmem {
namespace {

struct LayerShape {
    int out, in;
};

std::array<LayerShape, kLayerCount> layer_shapes(const ModelDims& d) {
    return {{{d.enc1, d.input},
             {d.enc2, d.enc1},
             {d.feature, d.enc2},
             {d.head_hidden, d.feature},
             {1, d.head_hidden}}};
}

// y = W x + b, W row-major out x in
void affine(const std::vector<double>& w, const std::vector<double>& b,
            std::span<const double> x, std::vector<double>& y) {
    const size_t out = b.size();
    const size_t in = x.size();
    y.resize(out);
    const double* wp = w.data();
    for (size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = wp + o * in;
        for (size_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

// accumulate dW += dy x^T, db += dy, and dx = W^T dy
void affine_backward(const std::vector<double>& w, std::span<const double> x,
                     std::span<const double> dy, std::vector<double>& dw,
                     std::vector<double>& db, std::vector<double>* dx) {
    const size_t out = dy.size();
    const size_t in = x.size();
    if (dx) dx->assign(in, 0.0);
    for (size_t o = 0; o < out; ++o) {
        const double g = dy[o];
        db[o] += g;
        double* dwrow = dw.data() + o * in;
        const double* wrow = w.data() + o * in;
        if (dx) {
            double* dxp = dx->data();
            for (size_t i = 0; i < in; ++i) {
                dwrow[i] += g * x[i];
                dxp[i] += g * wrow[i];
            }
        } else {
            for (size_t i = 0; i < in; ++i) dwrow[i] += g * x[i];
        }
    }
}

void relu_inplace(std::vector<double>& v) {
    for (auto& x : v)
        if (x < 0) x = 0;
}

} // namespace

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void Tensors::allocate(const ModelDims& dims) {
    const auto shapes = layer_shapes(dims);
    for (int l = 0; l < kLayerCount; ++l) {
        w[l].assign(static_cast<size_t>(shapes[l].out) * shapes[l].in, 0.0);
        b[l].assign(static_cast<size_t>(shapes[l].out), 0.0);
    }
}

void Tensors::fill(double v) {
    for (int l = 0; l < kLayerCount; ++l) {
        std::fill(w[l].begin(), w[l].end(), v);
        std::fill(b[l].begin(), b[l].end(), v);
    }
}

void Tensors::add_scaled(const Tensors& other, double scale) {
    for (int l = 0; l < kLayerCount; ++l) {
        for (size_t i = 0; i < w[l].size(); ++i) w[l][i] += scale * other.w[l][i];
        for (size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * other.b[l][i];
    }
}

size_t ModelParams::param_count() const {
    size_t n = 0;
    for (int l = 0; l < kLayerCount; ++l) n += values.w[l].size() + values.b[l].size();
    return n;
}

namespace {
// flat order: w0, b0, w1, b1, ...
template <typename T>
double* locate(T& tensors, size_t i) {
    for (int l = 0; l < kLayerCount; ++l) {
        if (i < tensors.w[l].size()) return &tensors.w[l][i];
        i -= tensors.w[l].size();
        if (i < tensors.b[l].size()) return &tensors.b[l][i];
        i -= tensors.b[l].size();
    }
    throw input_error("parameter index out of range");
}
} // namespace

double ModelParams::get_param(size_t i) const { return *locate(const_cast<Tensors&>(values), i); }
void ModelParams::set_param(size_t i, double v) { *locate(values, i) = v; }
double ModelParams::get_grad(size_t i) const { return *locate(const_cast<Tensors&>(grads), i); }

bool ModelParams::finite() const {
    for (int l = 0; l < kLayerCount; ++l) {
        for (double v : values.w[l])
            if (!std::isfinite(v)) return false;
        for (double v : values.b[l])
            if (!std::isfinite(v)) return false;
    }
    return true;
}

ModelParams init_params(uint64_t seed, const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    p.values.allocate(dims);
    p.grads.allocate(dims);

    Rng rng(seed, /*stream=*/0x1417);
    const auto shapes = layer_shapes(dims);
    for (int l = 0; l < kLayerCount; ++l) {
        // uniform with std sqrt(2/fan_in): half-width sqrt(6/fan_in)
        const double bound = std::sqrt(6.0 / shapes[l].in);
        for (auto& w : p.values.w[l]) w = rng.uniform(-bound, bound);
        // biases start at zero
    }
    return p;
}

std::vector<uint8_t> ModelParams::serialize() const {
    ByteWriter w;
    w.bytes(kMagicParams, 4);
    w.u32(kFormatVersion);
    w.u32(kLayerCount);
    const auto shapes = layer_shapes(dims);
    for (const auto& s : shapes) {
        w.u32(static_cast<uint32_t>(s.out));
        w.u32(static_cast<uint32_t>(s.in));
    }
    for (int l = 0; l < kLayerCount; ++l) {
        w.bytes(values.w[l].data(), values.w[l].size() * sizeof(double));
        w.bytes(values.b[l].data(), values.b[l].size() * sizeof(double));
    }
    w.finish_with_crc();
    return w.take();
}

ModelParams ModelParams::deserialize(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    r.check_crc("parameter file");

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagicParams, 4) != 0)
        throw format_error("parameter file: bad magic", 0);
    const uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw format_error("parameter file: unsupported version " + std::to_string(version), 4);
    const size_t count_off = r.offset();
    const uint32_t layers = r.u32();
    if (layers != kLayerCount)
        throw format_error("parameter file: expected " + std::to_string(kLayerCount) +
                               " layers, got " + std::to_string(layers),
                           count_off);

    std::array<LayerShape, kLayerCount> shapes{};
    for (auto& s : shapes) {
        const size_t off = r.offset();
        s.out = static_cast<int>(r.u32());
        s.in = static_cast<int>(r.u32());
        if (s.out <= 0 || s.in <= 0 || s.out > (1 << 20) || s.in > (1 << 20))
            throw format_error("parameter file: implausible layer shape", off);
    }
    // reconstruct dims and validate the chain
    ModelDims dims;
    dims.input = shapes[0].in;
    dims.enc1 = shapes[0].out;
    dims.enc2 = shapes[1].out;
    dims.feature = shapes[2].out;
    dims.head_hidden = shapes[3].out;
    const auto expect = layer_shapes(dims);
    for (int l = 0; l < kLayerCount; ++l)
        if (expect[l].in != shapes[l].in || expect[l].out != shapes[l].out)
            throw format_error("parameter file: inconsistent layer chain", 12);

    ModelParams p;
    p.dims = dims;
    p.values.allocate(dims);
    p.grads.allocate(dims);
    for (int l = 0; l < kLayerCount; ++l) {
        r.bytes(p.values.w[l].data(), p.values.w[l].size() * sizeof(double));
        r.bytes(p.values.b[l].data(), p.values.b[l].size() * sizeof(double));
    }
    if (r.remaining() != 4)
        throw format_error("parameter file: trailing bytes", r.offset());
    return p;
}

void save_params(const ModelParams& params, const std::string& path) {
    write_file(path, params.serialize());
}

ModelParams load_params(const std::string& path) {
    return ModelParams::deserialize(read_file(path));
}

std::array<uint8_t, 32> param_fingerprint(const ModelParams& params) {
    const auto bytes = params.serialize();
    return sha256(bytes.data(), bytes.size());
}

FeatureVector encoder_forward(const ModelParams& params, std::span<const double> z,
                              EncoderCache* cache) {
    if (static_cast<int>(z.size()) != params.dims.input)
        throw input_error("encoder_forward: input length " + std::to_string(z.size()) +
                          " != " + std::to_string(params.dims.input));
    std::vector<double> a1, a2, u;
    affine(params.values.w[0], params.values.b[0], z, a1);
    relu_inplace(a1);
    affine(params.values.w[1], params.values.b[1], a1, a2);
    relu_inplace(a2);
    affine(params.values.w[2], params.values.b[2], a2, u);
    if (cache) {
        cache->input.assign(z.begin(), z.end());
        cache->a1 = std::move(a1);
        cache->a2 = std::move(a2);
        cache->valid = true;
    }
    return u;
}

double head_forward(const ModelParams& params, const FeatureVector& u,
                    const FeatureVector& u2, HeadCache* cache) {
    if (u.size() != u2.size() || static_cast<int>(u.size()) != params.dims.feature)
        throw input_error("head_forward: feature dimension mismatch");
    std::vector<double> diff(u.size()), sign(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - u2[i];
        diff[i] = std::fabs(d);
        sign[i] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    }
    std::vector<double> hidden, logit_vec;
    affine(params.values.w[3], params.values.b[3], diff, hidden);
    relu_inplace(hidden);
    affine(params.values.w[4], params.values.b[4], hidden, logit_vec);
    const double logit = logit_vec[0];
    if (cache) {
        cache->diff = std::move(diff);
        cache->sign = std::move(sign);
        cache->hidden = std::move(hidden);
        cache->logit = logit;
        cache->valid = true;
    }
    return sigmoid(logit);
}

void encoder_backward(const ModelParams& params, const EncoderCache& cache,
                      std::span<const double> dfeature, Tensors& sink) {
    if (!cache.valid) throw state_error("encoder_backward: no matching forward cache");
    if (static_cast<int>(dfeature.size()) != params.dims.feature)
        throw input_error("encoder_backward: gradient dimension mismatch");

    std::vector<double> da2, da1;
    affine_backward(params.values.w[2], cache.a2, dfeature, sink.w[2], sink.b[2], &da2);
    for (size_t i = 0; i < da2.size(); ++i)
        if (cache.a2[i] <= 0) da2[i] = 0;
    affine_backward(params.values.w[1], cache.a1, da2, sink.w[1], sink.b[1], &da1);
    for (size_t i = 0; i < da1.size(); ++i)
        if (cache.a1[i] <= 0) da1[i] = 0;
    affine_backward(params.values.w[0], cache.input, da1, sink.w[0], sink.b[0], nullptr);
}

HeadBackwardResult head_backward(const ModelParams& params, const HeadCache& cache,
                                 double dlogit, Tensors& sink) {
    if (!cache.valid) throw state_error("head_backward: no matching forward cache");

    std::vector<double> dhidden;
    const std::vector<double> dlogit_vec{dlogit};
    affine_backward(params.values.w[4], cache.hidden, dlogit_vec, sink.w[4], sink.b[4], &dhidden);
    for (size_t i = 0; i < dhidden.size(); ++i)
        if (cache.hidden[i] <= 0) dhidden[i] = 0;
    std::vector<double> ddiff;
    affine_backward(params.values.w[3], cache.diff, dhidden, sink.w[3], sink.b[3], &ddiff);

    HeadBackwardResult res;
    res.du.resize(ddiff.size());
    res.du2.resize(ddiff.size());
    for (size_t i = 0; i < ddiff.size(); ++i) {
        res.du[i] = ddiff[i] * cache.sign[i];
        res.du2[i] = -res.du[i];
    }
    return res;
}

} // namespace lcmem
