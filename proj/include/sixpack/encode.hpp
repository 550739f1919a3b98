#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "sixpack/geometry.hpp"
#include "sixpack/mlp.hpp"
#include "sixpack/rng.hpp"

// Observation encoding: crop the point cloud around the predicted pose,
// normalize into the unit cube, lay an anchor lattice over it, embed each
// colored point with a shared MLP, and pool point features into per-anchor
// embeddings by softmax over negative distances.
//
// Note on the pooling sign: the weights are softmax(-d / temperature), so
// the pooled feature is dominated by the points nearest the anchor. See the
// README for why the sign is pinned this way.

namespace sixpack {

struct ObservedPoint {
    Vec3 position;  // meters, camera frame (normalized crop frame inside Crop)
    Vec3 color;     // rgb in [0, 1]
};

/// Points remapped into the crop frame: positions are (p - center) / scale,
/// all inside [-0.5, 0.5]^3.
struct Crop {
    std::vector<ObservedPoint> points;
    Vec3 center{0, 0, 0};
    double scale = 1.0;

    Vec3 to_camera(const Vec3& normalized) const { return normalized * scale + center; }
    Vec3 to_normalized(const Vec3& camera) const { return (camera - center) / scale; }
    size_t size() const { return points.size(); }
};

struct CropParams {
    int min_points = 32;    // below this the crop reports a lost view
    int max_points = 512;   // cap via deterministic uniform subsampling
    uint64_t seed = 0;
};

/// Cut the axis-aligned box of size enlargement * category_extent centered
/// at the predicted translation out of the frame, and normalize it
/// isotropically by the largest box side (so the box maps into the unit
/// cube, exactly onto it when the box is cubic).
inline Crop crop_volume(std::span<const ObservedPoint> frame, const Pose& predicted,
                        const Vec3& category_extent, double enlargement,
                        const CropParams& params = {}) {
    if (enlargement < 1.0) throw Error("crop_volume: enlargement must be >= 1");
    if (category_extent.x <= 0 || category_extent.y <= 0 || category_extent.z <= 0)
        throw Error("crop_volume: category extent must be positive");

    const Vec3 half = category_extent * (0.5 * enlargement);
    const Vec3 center = predicted.translation;

    std::vector<size_t> inside;
    for (size_t i = 0; i < frame.size(); ++i) {
        const Vec3 d = frame[i].position - center;
        if (std::abs(d.x) <= half.x && std::abs(d.y) <= half.y && std::abs(d.z) <= half.z)
            inside.push_back(i);
    }
    if (static_cast<int>(inside.size()) < params.min_points)
        throw EmptyCrop("crop_volume: only " + std::to_string(inside.size()) +
                        " points inside the crop box");

    if (static_cast<int>(inside.size()) > params.max_points) {
        // Partial Fisher-Yates, then restore input order.
        Rng rng(params.seed, "crop_subsample");
        for (int i = 0; i < params.max_points; ++i) {
            const size_t j =
                static_cast<size_t>(i) + rng.uniform_index(inside.size() - static_cast<size_t>(i));
            std::swap(inside[static_cast<size_t>(i)], inside[j]);
        }
        inside.resize(static_cast<size_t>(params.max_points));
        std::sort(inside.begin(), inside.end());
    }

    Crop crop;
    crop.center = center;
    crop.scale = 2.0 * std::max({half.x, half.y, half.z});
    crop.points.reserve(inside.size());
    for (size_t i : inside)
        crop.points.push_back({(frame[i].position - center) / crop.scale, frame[i].color});
    return crop;
}

// ---------------------------------------------------------------------------
// Anchor lattice
// ---------------------------------------------------------------------------

/// n^3 lattice points at ((i + 0.5)/n - 0.5) per axis, z varying fastest.
inline std::vector<Vec3> build_anchor_grid(int n) {
    if (n < 2) throw Error("build_anchor_grid: need n >= 2");
    std::vector<Vec3> anchors;
    anchors.reserve(static_cast<size_t>(n) * n * n);
    auto coord = [n](int i) { return (i + 0.5) / static_cast<double>(n) - 0.5; };
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy)
            for (int iz = 0; iz < n; ++iz)
                anchors.push_back({coord(ix), coord(iy), coord(iz)});
    return anchors;
}

template <class S>
struct AnchorGridT {
    std::vector<Vec3> anchors;            // normalized crop frame
    std::vector<std::vector<S>> embeddings;  // one F-vector per anchor
    int n = 0;
};

using AnchorGrid = AnchorGridT<double>;

// ---------------------------------------------------------------------------
// Point features
// ---------------------------------------------------------------------------

using PointFeature = std::vector<double>;

/// One F-dimensional feature per crop point: a shared MLP applied to the
/// 6-vector (normalized position, color).
template <class S>
std::vector<std::vector<S>> encode_points(const Crop& crop, const MlpParamsT<S>& params) {
    if (crop.points.empty()) throw EmptyCrop("encode_points: empty crop");
    if (params.input_size() != 6)
        throw ShapeMismatch("encode_points: encoder must take 6 inputs");
    std::vector<std::vector<S>> features;
    features.reserve(crop.points.size());
    std::vector<S> input(6);
    for (const ObservedPoint& p : crop.points) {
        input[0] = S(p.position.x);
        input[1] = S(p.position.y);
        input[2] = S(p.position.z);
        input[3] = S(p.color.x);
        input[4] = S(p.color.y);
        input[5] = S(p.color.z);
        features.push_back(mlp_forward<S>(params, input));
    }
    return features;
}

// ---------------------------------------------------------------------------
// Distance-weighted pooling
// ---------------------------------------------------------------------------

/// Softmax weights over negative point-anchor distances (nearer points
/// dominate); the weights depend only on geometry, so they are constants
/// under differentiation.
inline std::vector<double> pooling_weights(const Vec3& anchor, const Crop& crop,
                                           double temperature) {
    if (temperature <= 0) throw Error("pooling_weights: temperature must be positive");
    std::vector<double> scores;
    scores.reserve(crop.points.size());
    for (const ObservedPoint& p : crop.points)
        scores.push_back(-(anchor - p.position).norm() / temperature);
    return softmax(scores);
}

namespace detail {
inline double pooled_dim(std::span<const double> w, std::span<const double> col) {
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) acc += w[i] * col[i];
    return acc;
}
inline ad::Value pooled_dim(std::span<const double> w, std::span<const ad::Value> col) {
    ad::Tape* tape = nullptr;
    for (const ad::Value& v : col)
        if (!v.is_const()) {
            tape = v.tape();
            break;
        }
    if (tape == nullptr) {
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) acc += w[i] * col[i].value();
        return ad::Value(acc);
    }
    return tape->weighted_sum(w, col);
}
}  // namespace detail

template <class S>
std::vector<S> pool_anchor(const Vec3& anchor, const Crop& crop,
                           const std::vector<std::vector<S>>& features,
                           double temperature) {
    if (features.size() != crop.points.size())
        throw ShapeMismatch("pool_anchor: features do not align with crop points");
    const std::vector<double> w = pooling_weights(anchor, crop, temperature);
    const size_t dim = features.empty() ? 0 : features[0].size();
    std::vector<S> pooled;
    pooled.reserve(dim);
    std::vector<S> column(features.size());
    for (size_t f = 0; f < dim; ++f) {
        for (size_t j = 0; j < features.size(); ++j) column[j] = features[j][f];
        pooled.push_back(detail::pooled_dim(w, std::span<const S>(column)));
    }
    return pooled;
}

/// Embed and pool a whole crop into an anchor grid.
template <class S>
AnchorGridT<S> compute_anchor_grid(const Crop& crop,
                                   const std::vector<std::vector<S>>& features, int n,
                                   double temperature) {
    AnchorGridT<S> grid;
    grid.n = n;
    grid.anchors = build_anchor_grid(n);
    grid.embeddings.reserve(grid.anchors.size());
    for (const Vec3& a : grid.anchors)
        grid.embeddings.push_back(pool_anchor<S>(a, crop, features, temperature));
    return grid;
}

}  // namespace sixpack
