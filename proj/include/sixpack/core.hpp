#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

// Small fixed-size linear algebra used across the library.
//
// Vec3T / Mat3T are templated on the scalar type so the same geometry and
// loss code can run on plain doubles and on reverse-mode autodiff values
// (see ad.hpp). Heavier decompositions (SVD) live behind double-only entry
// points in geometry.hpp.

namespace sixpack {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Error types. Names follow the failure condition they signal.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};
struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& msg) : Error(msg) {}
};
struct ZeroVector : Error {
    explicit ZeroVector(const std::string& msg) : Error(msg) {}
};
struct EmptyCrop : Error {
    explicit EmptyCrop(const std::string& msg) : Error(msg) {}
};
struct EmptyCloud : Error {
    explicit EmptyCloud(const std::string& msg) : Error(msg) {}
};
struct LostTrack : Error {
    explicit LostTrack(const std::string& msg) : Error(msg) {}
};
struct NonFiniteGradient : Error {
    explicit NonFiniteGradient(const std::string& msg) : Error(msg) {}
};
struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};
struct FormatVersionMismatch : Error {
    explicit FormatVersionMismatch(const std::string& msg) : Error(msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Vec3T
// ---------------------------------------------------------------------------

template <class S>
struct Vec3T {
    S x{}, y{}, z{};

    Vec3T() = default;
    Vec3T(S x_, S y_, S z_) : x(x_), y(y_), z(z_) {}

    S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3T operator+(const Vec3T& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3T operator-(const Vec3T& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3T operator-() const { return {-x, -y, -z}; }
    Vec3T operator*(const S& s) const { return {x * s, y * s, z * s}; }
    Vec3T operator/(const S& s) const { return {x / s, y / s, z / s}; }
    Vec3T& operator+=(const Vec3T& o) {
        x = x + o.x; y = y + o.y; z = z + o.z;
        return *this;
    }
    Vec3T& operator-=(const Vec3T& o) {
        x = x - o.x; y = y - o.y; z = z - o.z;
        return *this;
    }
    Vec3T& operator*=(const S& s) {
        x = x * s; y = y * s; z = z * s;
        return *this;
    }

    S dot(const Vec3T& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3T cross(const Vec3T& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    S squared_norm() const { return dot(*this); }
    S norm() const {
        using std::sqrt;
        return sqrt(squared_norm());
    }
};

template <class S>
inline Vec3T<S> operator*(const S& s, const Vec3T<S>& v) { return v * s; }

using Vec3 = Vec3T<double>;

/// Convert a double vector into any scalar type (constants under autodiff).
template <class S>
inline Vec3T<S> vec_cast(const Vec3& v) {
    return {S(v.x), S(v.y), S(v.z)};
}

inline Vec3 normalized(const Vec3& v) {
    const double n = v.norm();
    if (n < 1e-300) throw ZeroVector("normalized: zero-length vector");
    return v / n;
}

// ---------------------------------------------------------------------------
// Mat3T (row-major)
// ---------------------------------------------------------------------------

template <class S>
struct Mat3T {
    std::array<S, 9> m{};

    static Mat3T identity() {
        Mat3T r;
        r.m = {S(1), S(0), S(0), S(0), S(1), S(0), S(0), S(0), S(1)};
        return r;
    }
    static Mat3T zero() { return Mat3T{}; }

    S& operator()(int r, int c) { return m[3 * r + c]; }
    const S& operator()(int r, int c) const { return m[3 * r + c]; }

    Vec3T<S> operator*(const Vec3T<S>& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3T operator*(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) +
                          (*this)(i, 2) * o(2, j);
        return r;
    }

    Mat3T operator+(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3T operator-(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    Mat3T operator*(const S& s) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }

    Mat3T transposed() const {
        Mat3T r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    S det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    S trace() const { return m[0] + m[4] + m[8]; }

    /// Inverse via adjugate; caller guarantees a well-conditioned matrix.
    Mat3T inverse() const {
        const S d = det();
        Mat3T adj;
        adj(0, 0) = m[4] * m[8] - m[5] * m[7];
        adj(0, 1) = m[2] * m[7] - m[1] * m[8];
        adj(0, 2) = m[1] * m[5] - m[2] * m[4];
        adj(1, 0) = m[5] * m[6] - m[3] * m[8];
        adj(1, 1) = m[0] * m[8] - m[2] * m[6];
        adj(1, 2) = m[2] * m[3] - m[0] * m[5];
        adj(2, 0) = m[3] * m[7] - m[4] * m[6];
        adj(2, 1) = m[1] * m[6] - m[0] * m[7];
        adj(2, 2) = m[0] * m[4] - m[1] * m[3];
        return adj * (S(1) / d);
    }

    S squared_frobenius() const {
        S acc = m[0] * m[0];
        for (int i = 1; i < 9; ++i) acc = acc + m[i] * m[i];
        return acc;
    }
};

using Mat3 = Mat3T<double>;

template <class S>
inline Mat3T<S> mat_cast(const Mat3& a) {
    Mat3T<S> r;
    for (int i = 0; i < 9; ++i) r.m[i] = S(a.m[i]);
    return r;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
    double r = 0.0;
    for (int i = 0; i < 9; ++i) r = std::max(r, std::abs(a.m[i] - b.m[i]));
    return r;
}

inline double max_abs_diff(const Vec3& a, const Vec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

template <class S>
inline S sq(const S& v) { return v * v; }

/// Forward value of a scalar; overloaded for autodiff values via ADL.
inline double value_of(double v) { return v; }

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace sixpack
