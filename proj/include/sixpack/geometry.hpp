#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "sixpack/core.hpp"
#include "sixpack/rng.hpp"

// Rigid-body geometry: SO(3)/SE(3) value types, closed-form point-set
// alignment, pose error metrics, symmetry-invariant coordinates, and
// sampled oriented-box overlap.
//
// Eigen is used internally for the 3x3 SVDs (alignment, rotation
// projection); the public surface stays on the library's own small types.

namespace sixpack {

namespace detail {
inline Eigen::Matrix3d to_eigen(const Mat3& a) {
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = a(i, j);
    return r;
}
inline Mat3 from_eigen(const Eigen::Matrix3d& a) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = a(i, j);
    return r;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

struct Rotation {
    Mat3 m = Mat3::identity();

    static Rotation identity() { return {}; }

    /// Rodrigues formula; axis need not be normalized.
    static Rotation axis_angle(const Vec3& axis, double angle) {
        const Vec3 u = normalized(axis);
        const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
        Rotation r;
        r.m(0, 0) = c + u.x * u.x * t;
        r.m(0, 1) = u.x * u.y * t - u.z * s;
        r.m(0, 2) = u.x * u.z * t + u.y * s;
        r.m(1, 0) = u.y * u.x * t + u.z * s;
        r.m(1, 1) = c + u.y * u.y * t;
        r.m(1, 2) = u.y * u.z * t - u.x * s;
        r.m(2, 0) = u.z * u.x * t - u.y * s;
        r.m(2, 1) = u.z * u.y * t + u.x * s;
        r.m(2, 2) = c + u.z * u.z * t;
        return r;
    }

    static Rotation from_matrix(const Mat3& m) { return Rotation{m}; }

    Vec3 operator*(const Vec3& v) const { return m * v; }
    Rotation operator*(const Rotation& o) const { return Rotation{m * o.m}; }
    Rotation inverse() const { return Rotation{m.transposed()}; }

    /// Max deviation from orthonormality / unit determinant.
    double orthonormality_error() const {
        const Mat3 e = m.transposed() * m - Mat3::identity();
        double r = 0.0;
        for (double v : e.m) r = std::max(r, std::abs(v));
        return std::max(r, std::abs(m.det() - 1.0));
    }

    bool is_valid(double tol = 1e-9) const { return orthonormality_error() <= tol; }

    /// Rotation angle and (for nonzero angles) unit axis.
    void to_axis_angle(Vec3& axis, double& angle) const {
        const Eigen::AngleAxisd aa(detail::to_eigen(m));
        angle = aa.angle();
        axis = {aa.axis()(0), aa.axis()(1), aa.axis()(2)};
    }
};

/// Projection onto SO(3): nearest rotation in the Frobenius sense.
inline Rotation nearest_rotation(const Mat3& a) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        detail::to_eigen(a), Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
    return Rotation{detail::from_eigen(u * v.transpose())};
}

/// Uniform random rotation (quaternion from 4 normals).
inline Rotation random_rotation(Rng& rng) {
    double q[4];
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& c : q) {
            c = rng.normal();
            n2 += c * c;
        }
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Rotation r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
           2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
    return r;
}

// ---------------------------------------------------------------------------
// Pose
// ---------------------------------------------------------------------------

struct Pose {
    Rotation rotation;
    Vec3 translation{0.0, 0.0, 0.0};

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Left-composition: the result applies `base` first, then `delta`.
inline Pose compose(const Pose& delta, const Pose& base) {
    return {delta.rotation * base.rotation,
            delta.rotation * base.translation + delta.translation};
}

inline Pose invert(const Pose& p) {
    const Rotation rt = p.rotation.inverse();
    return {rt, -(rt * p.translation)};
}

// ---------------------------------------------------------------------------
// Least-squares rigid alignment (closed form, SVD of the cross-covariance)
// ---------------------------------------------------------------------------

/// Rigid transform minimizing sum_i ||dst_i - (R src_i + t)||^2, with
/// correspondence by index. Reflections are corrected by flipping the
/// smallest singular direction. Throws DegenerateInput for fewer than 3
/// points or a collinear source set.
inline Pose least_squares_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
    if (src.size() != dst.size())
        throw LengthMismatch("least_squares_align: size mismatch");
    const size_t n = src.size();
    if (n < 3) throw DegenerateInput("least_squares_align: need at least 3 points");

    Vec3 cs{0, 0, 0}, cd{0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs *= 1.0 / static_cast<double>(n);
    cd *= 1.0 / static_cast<double>(n);

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = src[i] - cs;
        const Vec3 b = dst[i] - cd;
        const Eigen::Vector3d ea(a.x, a.y, a.z), eb(b.x, b.y, b.z);
        h += ea * eb.transpose();
        gram += ea * ea.transpose();
    }

    // Collinear source: second principal direction carries no spread.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(gram);
    const double lead = es.eigenvalues()(2);
    if (es.eigenvalues()(1) <= 1e-10 * std::max(lead, 1e-30))
        throw DegenerateInput("least_squares_align: source points are collinear");

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d v = svd.matrixV();
    const Eigen::Matrix3d u = svd.matrixU();
    if ((v * u.transpose()).determinant() < 0.0) v.col(2) = -v.col(2);
    const Rotation r{detail::from_eigen(v * u.transpose())};
    return {r, cd - r * cs};
}

inline double alignment_residual(std::span<const Vec3> src, std::span<const Vec3> dst,
                                 const Pose& p) {
    double acc = 0.0;
    for (size_t i = 0; i < src.size(); ++i) acc += (dst[i] - p.apply(src[i])).squared_norm();
    return acc;
}

// ---------------------------------------------------------------------------
// Pose error metrics
// ---------------------------------------------------------------------------

/// 2*asin(||A - B||_F / (2*sqrt(2))), the geodesic angle between rotations.
/// Templated so the training path can differentiate through it.
template <class S>
S rotation_error_mat(const Mat3T<S>& estimated, const Mat3T<S>& truth) {
    using std::asin;
    using std::max;
    using std::min;
    using std::sqrt;
    const S fro = sqrt((estimated - truth).squared_frobenius());
    const S arg = min(max(fro * S(1.0 / (2.0 * std::sqrt(2.0))), S(0.0)), S(1.0));
    return S(2.0) * asin(arg);
}

inline double rotation_error(const Rotation& estimated, const Rotation& truth) {
    return rotation_error_mat<double>(estimated.m, truth.m);
}

/// Angle between two (not necessarily unit) axis vectors.
template <class S>
S axis_angle_between(const Vec3T<S>& a, const Vec3T<S>& b) {
    using std::acos;
    using std::max;
    using std::min;
    using std::sqrt;
    const S na = sqrt(a.squared_norm());
    const S nb = sqrt(b.squared_norm());
    const S c = a.dot(b) / (na * nb);
    return acos(min(max(c, S(-1.0)), S(1.0)));
}

inline double axis_rotation_error(const Vec3& estimated_axis, const Vec3& truth_axis) {
    if (estimated_axis.norm() < 1e-12 || truth_axis.norm() < 1e-12)
        throw ZeroVector("axis_rotation_error: zero-length axis");
    return axis_angle_between<double>(estimated_axis, truth_axis);
}

// ---------------------------------------------------------------------------
// Symmetry-invariant coordinates
// ---------------------------------------------------------------------------

struct SymmetryAxis {
    Vec3 direction{0.0, 1.0, 0.0};  // unit; the axis passes through the origin

    static SymmetryAxis from(const Vec3& dir) { return {normalized(dir)}; }
};

template <class S>
struct SymTripletT {
    S d;      // distance to the axis line
    S h;      // signed height along the axis direction
    S theta;  // angle to the next point advancing clockwise about +axis
};

using SymTriplet = SymTripletT<double>;

namespace detail {
/// Orthonormal frame (u, v, axis), right-handed.
inline void axis_frame(const Vec3& axis, Vec3& u, Vec3& v) {
    const Vec3 ref = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    u = normalized(ref - axis * ref.dot(axis));
    v = axis.cross(u);
}
inline double wrap_two_pi_value(double x) {
    double r = x - kTwoPi * std::floor(x / kTwoPi);
    if (r >= kTwoPi) r -= kTwoPi;  // guard against floor round-off
    if (r < 0.0) r = 0.0;
    return r;
}
}  // namespace detail

/// (d, h, theta) per point. The angular neighbor of a point is the next
/// off-axis point encountered clockwise about the axis (clockwise when
/// sighting along +axis, i.e. increasing right-handed azimuth); theta is
/// the separating angle between the two radial directions, in [0, pi].
/// Points on the axis (d < 1e-9) get theta = 0 and do not participate as
/// angular neighbors; a lone off-axis point also gets theta = 0.
///
/// Invariant under any rotation of the whole set about the axis.
template <class S>
std::vector<SymTripletT<S>> sym_transform_t(std::span<const Vec3T<S>> points,
                                            const SymmetryAxis& axis) {
    using std::atan2;
    using std::min;
    using std::sqrt;
    const size_t n = points.size();
    Vec3 ud, vd;
    detail::axis_frame(axis.direction, ud, vd);
    const Vec3T<S> u = vec_cast<S>(ud), v = vec_cast<S>(vd),
                   w = vec_cast<S>(axis.direction);

    std::vector<S> pu(n), pv(n), alpha(n), d(n), h(n);
    std::vector<bool> off_axis(n);
    for (size_t i = 0; i < n; ++i) {
        pu[i] = points[i].dot(u);
        pv[i] = points[i].dot(v);
        h[i] = points[i].dot(w);
        d[i] = sqrt(pu[i] * pu[i] + pv[i] * pv[i]);
        off_axis[i] = value_of(d[i]) >= 1e-9;
        alpha[i] = off_axis[i] ? atan2(pv[i], pu[i]) : S(0.0);
    }

    std::vector<SymTripletT<S>> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        S theta(0.0);
        if (off_axis[i]) {
            bool found = false;
            double best = 0.0;
            for (size_t j = 0; j < n; ++j) {
                if (j == i || !off_axis[j]) continue;
                const S raw = alpha[j] - alpha[i];
                const double shift =
                    detail::wrap_two_pi_value(value_of(raw)) - value_of(raw);
                const S gap = raw + S(shift);
                if (!found || value_of(gap) < best) {
                    found = true;
                    best = value_of(gap);
                    theta = gap;
                }
            }
            if (found) theta = min(theta, S(kTwoPi) - theta);
        }
        out.push_back({d[i], h[i], theta});
    }
    return out;
}

inline std::vector<SymTriplet> sym_transform(std::span<const Vec3> points,
                                             const SymmetryAxis& axis) {
    if (points.empty()) throw Error("sym_transform: empty point list");
    return sym_transform_t<double>(points, axis);
}

// ---------------------------------------------------------------------------
// Oriented boxes
// ---------------------------------------------------------------------------

struct OrientedBox3 {
    Pose pose;
    Vec3 extents{0.1, 0.1, 0.1};  // positive half-lengths

    bool contains(const Vec3& p) const {
        const Vec3 q = invert(pose).apply(p);
        return std::abs(q.x) <= extents.x && std::abs(q.y) <= extents.y &&
               std::abs(q.z) <= extents.z;
    }
    double volume() const { return 8.0 * extents.x * extents.y * extents.z; }
};

/// Monte Carlo intersection-over-union of two oriented boxes. Samples
/// uniformly inside each box (symmetric estimate), deterministic per seed.
inline double box_iou(const OrientedBox3& a, const OrientedBox3& b, int samples,
                      uint64_t seed = 0x6b0c5eedULL) {
    if (samples < 10000) throw Error("box_iou: need at least 10^4 samples");
    Rng rng(seed, "box_iou");
    auto hit_fraction = [&](const OrientedBox3& from, const OrientedBox3& other) {
        int hits = 0;
        for (int i = 0; i < samples; ++i) {
            const Vec3 local{rng.uniform(-from.extents.x, from.extents.x),
                             rng.uniform(-from.extents.y, from.extents.y),
                             rng.uniform(-from.extents.z, from.extents.z)};
            if (other.contains(from.pose.apply(local))) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(samples);
    };
    const double inter =
        0.5 * (hit_fraction(a, b) * a.volume() + hit_fraction(b, a) * b.volume());
    const double uni = a.volume() + b.volume() - inter;
    return clamp01(inter / uni);
}

}  // namespace sixpack
