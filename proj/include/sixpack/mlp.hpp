#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sixpack/ad.hpp"
#include "sixpack/core.hpp"
#include "sixpack/rng.hpp"

// Multilayer-perceptron primitives. Hidden layers use tanh, the output
// layer is linear. The forward pass is templated on the scalar type:
// MlpParamsT<double> runs plain inference, MlpParamsT<ad::Value> records
// the computation on a tape for training.

namespace sixpack {

template <class S>
struct MlpParamsT {
    std::vector<int> sizes;                 // layer widths, including input
    std::vector<std::vector<S>> weights;    // per layer, row-major out x in
    std::vector<std::vector<S>> biases;     // per layer, length out

    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }
    int layer_count() const { return static_cast<int>(sizes.size()) - 1; }

    size_t flat_size() const {
        size_t n = 0;
        for (int l = 0; l < layer_count(); ++l)
            n += static_cast<size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
        return n;
    }

    template <class Fn>
    void for_each_param(Fn&& fn) {
        for (int l = 0; l < layer_count(); ++l) {
            for (S& w : weights[l]) fn(w);
            for (S& b : biases[l]) fn(b);
        }
    }
    template <class Fn>
    void for_each_param(Fn&& fn) const {
        for (int l = 0; l < layer_count(); ++l) {
            for (const S& w : weights[l]) fn(w);
            for (const S& b : biases[l]) fn(b);
        }
    }
};

using MlpParams = MlpParamsT<double>;

/// Seeded uniform (Glorot-style) initialization, biases zero.
inline MlpParams make_mlp(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw ShapeMismatch("make_mlp: need at least two layer sizes");
    for (int s : sizes)
        if (s <= 0) throw ShapeMismatch("make_mlp: layer sizes must be positive");
    MlpParams p;
    p.sizes = sizes;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int in = sizes[l], out = sizes[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& v : w) v = rng.uniform(-a, a);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(static_cast<size_t>(out), 0.0);
    }
    return p;
}

inline MlpParams make_zero_mlp(const std::vector<int>& sizes) {
    MlpParams p;
    p.sizes = sizes;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        p.weights.emplace_back(static_cast<size_t>(sizes[l]) * sizes[l + 1], 0.0);
        p.biases.emplace_back(static_cast<size_t>(sizes[l + 1]), 0.0);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

namespace detail {
inline double affine_combine(std::span<const double> w, std::span<const double> x,
                             double bias) {
    double acc = bias;
    for (size_t i = 0; i < w.size(); ++i) acc += w[i] * x[i];
    return acc;
}

// Fused single-node version for the tape.
inline ad::Value affine_combine(std::span<const ad::Value> w,
                                std::span<const ad::Value> x, ad::Value bias) {
    ad::Tape* tape = bias.tape();
    for (size_t i = 0; i < w.size() && tape == nullptr; ++i) {
        if (!w[i].is_const()) tape = w[i].tape();
        else if (!x[i].is_const()) tape = x[i].tape();
    }
    if (tape == nullptr) {
        double acc = bias.value();
        for (size_t i = 0; i < w.size(); ++i) acc += w[i].value() * x[i].value();
        return ad::Value(acc);
    }
    return tape->affine(w, x, bias);
}
}  // namespace detail

template <class S>
std::vector<S> mlp_forward(const MlpParamsT<S>& params, std::span<const S> input) {
    using std::tanh;
    if (static_cast<int>(input.size()) != params.input_size())
        throw ShapeMismatch("mlp_forward: input length does not match first layer");
    std::vector<S> x(input.begin(), input.end());
    std::vector<S> next;
    for (int l = 0; l < params.layer_count(); ++l) {
        const int in = params.sizes[l], out = params.sizes[l + 1];
        next.clear();
        next.reserve(static_cast<size_t>(out));
        const bool last = l + 1 == params.layer_count();
        for (int j = 0; j < out; ++j) {
            std::span<const S> row(params.weights[l].data() + static_cast<size_t>(j) * in,
                                   static_cast<size_t>(in));
            S a = detail::affine_combine(row, std::span<const S>(x), params.biases[l][j]);
            next.push_back(last ? a : tanh(a));
        }
        x.swap(next);
    }
    return x;
}

/// Record the parameters as tape inputs (flat order, for gradient lookup).
inline MlpParamsT<ad::Value> lift_params(ad::Tape& tape, const MlpParams& p) {
    MlpParamsT<ad::Value> out;
    out.sizes = p.sizes;
    out.weights.resize(p.weights.size());
    out.biases.resize(p.biases.size());
    for (size_t l = 0; l < p.weights.size(); ++l) {
        out.weights[l].reserve(p.weights[l].size());
        for (double w : p.weights[l]) out.weights[l].push_back(tape.input(w));
        out.biases[l].reserve(p.biases[l].size());
        for (double b : p.biases[l]) out.biases[l].push_back(tape.input(b));
    }
    return out;
}

/// Gradient of `grads_by_node` with respect to each lifted parameter,
/// flattened in the same order as MlpParams::for_each_param.
inline std::vector<double> collect_gradients(const MlpParamsT<ad::Value>& lifted,
                                             const std::vector<double>& grads_by_node) {
    std::vector<double> out;
    out.reserve(lifted.flat_size());
    lifted.for_each_param([&](const ad::Value& v) {
        out.push_back(grads_by_node[static_cast<size_t>(v.node())]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

/// Numerically stable softmax. The max shift is treated as a constant,
/// which leaves both values and gradients unchanged (shift invariance).
template <class S>
std::vector<S> softmax(std::span<const S> values) {
    using std::exp;
    if (values.empty()) throw ShapeMismatch("softmax: empty input");
    double m = value_of(values[0]);
    for (const S& v : values) m = std::max(m, value_of(v));
    std::vector<S> out;
    out.reserve(values.size());
    S total(0.0);
    for (const S& v : values) {
        S e = exp(v - S(m));
        total = total + e;
        out.push_back(std::move(e));
    }
    for (S& v : out) v = v / total;
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& values) {
    return softmax<double>(std::span<const double>(values));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    static AdamState zeros(size_t n) { return {std::vector<double>(n, 0.0),
                                               std::vector<double>(n, 0.0), 0}; }
};

/// One Adam update over the flat parameter vector of `params`.
inline void adam_step(MlpParams& params, std::span<const double> grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
    const size_t n = params.flat_size();
    if (grads.size() != n) throw ShapeMismatch("adam_step: gradient size mismatch");
    if (state.m.size() != n) throw ShapeMismatch("adam_step: state size mismatch");
    for (double g : grads)
        if (!std::isfinite(g)) throw NonFiniteGradient("adam_step: non-finite gradient");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    size_t i = 0;
    params.for_each_param([&](double& w) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mh = state.m[i] / bc1;
        const double vh = state.v[i] / bc2;
        w -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        ++i;
    });
}

// ---------------------------------------------------------------------------
// Checkpoint serialization (text, lossless via %.17g round-trip)
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointVersion = "sixpack-ckpt/1";

inline void write_doubles(std::ostream& os, std::span<const double> vals) {
    os << vals.size();
    os << std::setprecision(17);
    for (double v : vals) os << ' ' << v;
    os << '\n';
}

inline std::vector<double> read_doubles(std::istream& is) {
    size_t n = 0;
    if (!(is >> n)) throw IoError("checkpoint: expected array length");
    std::vector<double> vals(n);
    for (double& v : vals)
        if (!(is >> v)) throw IoError("checkpoint: truncated value array");
    return vals;
}

inline void write_mlp(std::ostream& os, const std::string& name, const MlpParams& p) {
    os << "net " << name << "\nlayers " << p.sizes.size();
    for (int s : p.sizes) os << ' ' << s;
    os << '\n';
    std::vector<double> flat;
    flat.reserve(p.flat_size());
    p.for_each_param([&](double v) { flat.push_back(v); });
    os << "params ";
    write_doubles(os, flat);
}

inline MlpParams read_mlp(std::istream& is, std::string* name_out = nullptr) {
    std::string tag, name;
    if (!(is >> tag >> name) || tag != "net") throw IoError("checkpoint: expected net record");
    if (name_out) *name_out = name;
    size_t nsizes = 0;
    if (!(is >> tag >> nsizes) || tag != "layers")
        throw IoError("checkpoint: expected layers record");
    std::vector<int> sizes(nsizes);
    for (int& s : sizes)
        if (!(is >> s)) throw IoError("checkpoint: truncated layer sizes");
    if (!(is >> tag) || tag != "params") throw IoError("checkpoint: expected params record");
    const std::vector<double> flat = read_doubles(is);
    MlpParams p = make_zero_mlp(sizes);
    if (flat.size() != p.flat_size()) throw IoError("checkpoint: parameter count mismatch");
    size_t i = 0;
    p.for_each_param([&](double& v) { v = flat[i++]; });
    return p;
}

/// Standalone single-network checkpoint (the full model format lives in
/// model.hpp and embeds the same net records).
inline void save_mlp(const std::string& path, const MlpParams& p) {
    std::ofstream os(path);
    if (!os) throw IoError("save_mlp: cannot open " + path);
    os << kCheckpointVersion << "\n";
    write_mlp(os, "mlp", p);
    if (!os) throw IoError("save_mlp: write failed for " + path);
}

inline MlpParams load_mlp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_mlp: cannot open " + path);
    std::string version;
    if (!std::getline(is, version)) throw IoError("load_mlp: empty file");
    if (version != kCheckpointVersion)
        throw FormatVersionMismatch("load_mlp: unsupported version '" + version + "'");
    return read_mlp(is);
}

}  // namespace sixpack
