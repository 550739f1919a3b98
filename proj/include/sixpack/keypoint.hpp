#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "sixpack/encode.hpp"
#include "sixpack/geometry.hpp"
#include "sixpack/mlp.hpp"

// Attention over anchors, ordered keypoint generation, and the training
// losses. Everything is templated on the scalar type: the double
// instantiation is the inference/evaluation path, the ad::Value
// instantiation records the same computation for backprop.
//
// The rotation-dependent losses come in two flavors: the evaluation path
// solves the alignment rotation exactly (SVD), while the training path
// uses a differentiable relaxation (unconstrained linear fit of the
// centered sets) whose gradients are finite-difference checked.

namespace sixpack {

using KeypointSet = std::vector<Vec3>;
template <class S>
using KeypointSetT = std::vector<Vec3T<S>>;

template <class S>
struct AnchorScoresT {
    std::vector<S> confidences;  // softmax-normalized, sum to 1
    int selected = 0;            // argmax, ties broken by lowest index
};

using AnchorScores = AnchorScoresT<double>;

struct LossWeights {
    double mvc = 10.0;
    double tra = 1.0;
    double rot = 1.0;
    double sep = 0.1;
    double sil = 0.1;
    double cen = 1.0;
    double anc = 1.0;
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Per-anchor logit from the attention MLP, softmax across anchors.
template <class S>
AnchorScoresT<S> attend(const AnchorGridT<S>& grid, const MlpParamsT<S>& params) {
    if (grid.embeddings.empty()) throw ShapeMismatch("attend: empty anchor grid");
    if (params.output_size() != 1)
        throw ShapeMismatch("attend: attention net must emit one logit");
    std::vector<S> logits;
    logits.reserve(grid.embeddings.size());
    for (const auto& psi : grid.embeddings)
        logits.push_back(mlp_forward<S>(params, psi)[0]);

    AnchorScoresT<S> scores;
    scores.confidences = softmax<S>(logits);
    scores.selected = 0;
    for (size_t i = 1; i < scores.confidences.size(); ++i)
        if (value_of(scores.confidences[i]) > value_of(scores.confidences[scores.selected]))
            scores.selected = static_cast<int>(i);
    return scores;
}

/// Mean confidence-weighted excess distance to the object centroid over
/// the best achievable anchor distance; zero exactly when all confidence
/// sits on (one of) the nearest anchors.
template <class S>
S anchor_loss(const AnchorScoresT<S>& scores, std::span<const Vec3> anchors,
              const Vec3& centroid_gt) {
    if (scores.confidences.size() != anchors.size())
        throw ShapeMismatch("anchor_loss: scores do not align with anchors");
    std::vector<double> dist(anchors.size());
    double beta = std::numeric_limits<double>::max();
    for (size_t i = 0; i < anchors.size(); ++i) {
        dist[i] = (anchors[i] - centroid_gt).norm();
        beta = std::min(beta, dist[i]);
    }
    S acc(0.0);
    for (size_t i = 0; i < anchors.size(); ++i)
        acc = acc + scores.confidences[i] * S(dist[i] - beta);
    return acc * S(1.0 / static_cast<double>(anchors.size()));
}

// ---------------------------------------------------------------------------
// Keypoint generation
// ---------------------------------------------------------------------------

/// K keypoints as bounded offsets (tanh scaled to half the crop cube) from
/// the selected anchor, de-normalized back to the camera frame.
template <class S>
KeypointSetT<S> generate_keypoints(std::span<const S> selected_embedding,
                                   const Vec3& selected_anchor, const Crop& crop,
                                   const MlpParamsT<S>& params, int keypoint_count) {
    using std::tanh;
    if (params.output_size() != 3 * keypoint_count)
        throw ShapeMismatch("generate_keypoints: head output must be 3K");
    const std::vector<S> raw = mlp_forward<S>(params, selected_embedding);
    KeypointSetT<S> out;
    out.reserve(static_cast<size_t>(keypoint_count));
    const S half(0.5), scale(crop.scale);
    const Vec3T<S> anchor = vec_cast<S>(selected_anchor);
    const Vec3T<S> center = vec_cast<S>(crop.center);
    for (int k = 0; k < keypoint_count; ++k) {
        const Vec3T<S> offset{half * tanh(raw[static_cast<size_t>(3 * k)]),
                              half * tanh(raw[static_cast<size_t>(3 * k + 1)]),
                              half * tanh(raw[static_cast<size_t>(3 * k + 2)])};
        const Vec3T<S> normalized = anchor + offset;
        out.push_back(normalized * scale + center);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inter-frame consistency losses
// ---------------------------------------------------------------------------

template <class S>
Vec3T<S> apply_pose(const Pose& p, const Vec3T<S>& v) {
    return mat_cast<S>(p.rotation.m) * v + vec_cast<S>(p.translation);
}

/// Mean (unsquared) distance between current keypoints and ground-truth
/// transformed previous keypoints.
template <class S>
S mvc_loss(const KeypointSetT<S>& curr, const KeypointSetT<S>& prev, const Pose& delta_gt) {
    using std::sqrt;
    if (curr.size() != prev.size() || curr.empty())
        throw ShapeMismatch("mvc_loss: keypoint sets must match and be nonempty");
    S acc(0.0);
    for (size_t i = 0; i < curr.size(); ++i)
        acc = acc + sqrt((curr[i] - apply_pose<S>(delta_gt, prev[i])).squared_norm());
    return acc * S(1.0 / static_cast<double>(curr.size()));
}

namespace detail {
/// Difference of two symmetry triplets; the angle component is compared on
/// the circle (wrap at 2*pi).
template <class S>
S sym_triplet_distance(const SymTripletT<S>& a, const SymTripletT<S>& b) {
    using std::abs;
    using std::min;
    using std::sqrt;
    const S dd = a.d - b.d;
    const S dh = a.h - b.h;
    S dt = abs(a.theta - b.theta);
    dt = min(dt, S(kTwoPi) - dt);
    return sqrt(dd * dd + dh * dh + dt * dt);
}
}  // namespace detail

/// Multi-view consistency in symmetry-invariant coordinates. All inputs
/// must live in one common frame whose origin lies on the symmetry axis
/// (the object canonical frame in training).
template <class S>
S sym_mvc_loss(const KeypointSetT<S>& curr, const KeypointSetT<S>& prev,
               const Pose& delta_gt, const SymmetryAxis& axis) {
    if (curr.size() != prev.size() || curr.empty())
        throw ShapeMismatch("sym_mvc_loss: keypoint sets must match and be nonempty");
    KeypointSetT<S> moved;
    moved.reserve(prev.size());
    for (const auto& p : prev) moved.push_back(apply_pose<S>(delta_gt, p));
    const auto ta = sym_transform_t<S>(std::span<const Vec3T<S>>(curr), axis);
    const auto tb = sym_transform_t<S>(std::span<const Vec3T<S>>(moved), axis);
    S acc(0.0);
    for (size_t i = 0; i < ta.size(); ++i)
        acc = acc + detail::sym_triplet_distance<S>(ta[i], tb[i]);
    return acc * S(1.0 / static_cast<double>(curr.size()));
}

// ---------------------------------------------------------------------------
// Differentiable rotation fit (training relaxation)
// ---------------------------------------------------------------------------

namespace detail {
template <class S>
Vec3T<S> centroid_of(const KeypointSetT<S>& pts) {
    Vec3T<S> c{S(0.0), S(0.0), S(0.0)};
    for (const auto& p : pts) c += p;
    return c * S(1.0 / static_cast<double>(pts.size()));
}

/// Unconstrained linear map A minimizing sum ||curr_c - A prev_c||^2 over
/// the centered sets: A = Cov * (Gram + ridge)^-1. Coincides with the
/// alignment rotation when the correspondence is exactly rigid and the
/// source spans 3D; orthogonality is not enforced, which is what makes it
/// differentiable in closed form.
template <class S>
Mat3T<S> relaxed_rotation_fit(const KeypointSetT<S>& curr, const KeypointSetT<S>& prev,
                              double ridge_rel = 1e-9) {
    const Vec3T<S> cc = centroid_of<S>(curr);
    const Vec3T<S> cp = centroid_of<S>(prev);
    Mat3T<S> cov = Mat3T<S>::zero();
    Mat3T<S> gram = Mat3T<S>::zero();
    for (size_t k = 0; k < curr.size(); ++k) {
        const Vec3T<S> a = curr[k] - cc;
        const Vec3T<S> b = prev[k] - cp;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                cov(i, j) = cov(i, j) + a[i] * b[j];
                gram(i, j) = gram(i, j) + b[i] * b[j];
            }
    }
    const S ridge = gram.trace() * S(ridge_rel) + S(1e-15);
    for (int i = 0; i < 3; ++i) gram(i, i) = gram(i, i) + ridge;
    return cov * gram.inverse();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Pose estimation loss
// ---------------------------------------------------------------------------

/// Evaluation path: centroid-displacement translation error and the exact
/// alignment-rotation error against the ground-truth delta.
///
/// The translation term compares the current centroid with the
/// ground-truth-transformed previous centroid, so an exact correspondence
/// scores (0, 0) for any delta; for pure-translation deltas this reduces
/// to the plain centroid-difference error.
inline std::pair<double, double> pose_loss(const KeypointSet& curr, const KeypointSet& prev,
                                           const Pose& delta_gt) {
    if (curr.size() != prev.size() || curr.size() < 3)
        throw ShapeMismatch("pose_loss: need matching sets of at least 3 keypoints");
    const double tra = (detail::centroid_of<double>(curr) -
                        delta_gt.apply(detail::centroid_of<double>(prev)))
                           .norm();
    const Pose align = least_squares_align(prev, curr);  // throws DegenerateInput
    const double rot = rotation_error(align.rotation, delta_gt.rotation);
    return {tra, rot};
}

/// Training path: same translation term; the rotation term goes through
/// the relaxed linear fit so gradients flow to the keypoints.
template <class S>
std::pair<S, S> pose_loss_training(const KeypointSetT<S>& curr, const KeypointSetT<S>& prev,
                                   const Pose& delta_gt) {
    using std::sqrt;
    if (curr.size() != prev.size() || curr.size() < 3)
        throw ShapeMismatch("pose_loss_training: need matching sets of at least 3 keypoints");
    const Vec3T<S> err =
        detail::centroid_of<S>(curr) - apply_pose<S>(delta_gt, detail::centroid_of<S>(prev));
    const S tra = sqrt(err.squared_norm());
    const Mat3T<S> fit = detail::relaxed_rotation_fit<S>(curr, prev);
    const S rot = rotation_error_mat<S>(fit, mat_cast<S>(delta_gt.rotation.m));
    return {tra, rot};
}

/// Evaluation path for symmetric categories: angular error between the
/// estimated and ground-truth change of the symmetry-axis direction.
inline double sym_rot_loss(const KeypointSet& curr, const KeypointSet& prev,
                           const Vec3& axis_prev, const Pose& delta_gt) {
    if (curr.size() != prev.size() || curr.size() < 3)
        throw ShapeMismatch("sym_rot_loss: need matching sets of at least 3 keypoints");
    const Pose align = least_squares_align(prev, curr);
    const Vec3 est = align.rotation * axis_prev;
    const Vec3 truth = delta_gt.rotation * axis_prev;
    return axis_rotation_error(est, truth);
}

template <class S>
S sym_rot_loss_training(const KeypointSetT<S>& curr, const KeypointSetT<S>& prev,
                        const Vec3& axis_prev, const Pose& delta_gt) {
    if (curr.size() != prev.size() || curr.size() < 3)
        throw ShapeMismatch("sym_rot_loss_training: need matching sets of at least 3 keypoints");
    const Mat3T<S> fit = detail::relaxed_rotation_fit<S>(curr, prev);
    const Vec3T<S> est = fit * vec_cast<S>(axis_prev);
    const Vec3T<S> truth = vec_cast<S>(delta_gt.rotation * axis_prev);
    return axis_angle_between<S>(est, truth);
}

// ---------------------------------------------------------------------------
// Regularizers
// ---------------------------------------------------------------------------

/// Hinge-squared pairwise separation: (2 / (K(K-1))) * sum_{i<j}
/// max(0, margin - ||k_i - k_j||)^2.
template <class S>
S sep_loss(const KeypointSetT<S>& kps, double margin) {
    using std::max;
    using std::sqrt;
    const size_t k = kps.size();
    if (k < 2) throw ShapeMismatch("sep_loss: need at least 2 keypoints");
    S acc(0.0);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = i + 1; j < k; ++j) {
            const S dist = sqrt((kps[i] - kps[j]).squared_norm());
            const S hinge = max(S(0.0), S(margin) - dist);
            acc = acc + hinge * hinge;
        }
    return acc * S(2.0 / (static_cast<double>(k) * static_cast<double>(k - 1)));
}

/// Mean squared distance from each keypoint to its nearest observed point
/// (both in the camera frame).
template <class S>
S sil_loss(const KeypointSetT<S>& kps, const Crop& crop) {
    if (crop.points.empty()) throw EmptyCrop("sil_loss: empty crop");
    if (kps.empty()) throw ShapeMismatch("sil_loss: empty keypoint set");
    S acc(0.0);
    for (const auto& kp : kps) {
        S best(0.0);
        bool found = false;
        for (const ObservedPoint& p : crop.points) {
            const Vec3T<S> d = kp - vec_cast<S>(crop.to_camera(p.position));
            const S dist2 = d.squared_norm();
            if (!found || value_of(dist2) < value_of(best)) {
                best = dist2;
                found = true;
            }
        }
        acc = acc + best;
    }
    return acc * S(1.0 / static_cast<double>(kps.size()));
}

/// Distance from the keypoint centroid to the ground-truth object centroid.
template <class S>
S cen_loss(const KeypointSetT<S>& kps, const Vec3& centroid_gt) {
    using std::sqrt;
    if (kps.empty()) throw ShapeMismatch("cen_loss: empty keypoint set");
    const Vec3T<S> d = detail::centroid_of<S>(kps) - vec_cast<S>(centroid_gt);
    return sqrt(d.squared_norm());
}

// ---------------------------------------------------------------------------
// Total loss
// ---------------------------------------------------------------------------

template <class S>
struct LossPartsT {
    S mvc{0.0};      // Eq.-style multi-view consistency (plain coordinates)
    S sym_mvc{0.0};  // symmetry-invariant variant
    S tra{0.0};
    S rot{0.0};      // alignment-rotation error (plain)
    S sym_rot{0.0};  // symmetry-axis variant
    S sep{0.0};
    S sil{0.0};
    S cen{0.0};
    S anc{0.0};
};

using LossParts = LossPartsT<double>;

/// Weighted sum of the loss terms; `symmetric` picks the symmetry-aware
/// consistency and rotation terms in place of the plain ones.
template <class S>
S total_loss(const LossPartsT<S>& parts, const LossWeights& w, bool symmetric) {
    const S& mvc = symmetric ? parts.sym_mvc : parts.mvc;
    const S& rot = symmetric ? parts.sym_rot : parts.rot;
    return S(w.mvc) * mvc + S(w.tra) * parts.tra + S(w.rot) * rot + S(w.sep) * parts.sep +
           S(w.sil) * parts.sil + S(w.cen) * parts.cen + S(w.anc) * parts.anc;
}

}  // namespace sixpack
