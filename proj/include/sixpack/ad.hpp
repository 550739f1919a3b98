#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sixpack/core.hpp"

// Scalar-tape reverse-mode automatic differentiation.
//
// The networks in this project are tiny, so the tape records scalar
// operations. Each node stores only a range of (parent, local partial)
// edges; local partials are evaluated during the forward pass, which makes
// the backward sweep a single generic reverse loop.
//
// Value is a lightweight handle: either a constant (no tape) or a node on
// a tape. Arithmetic between constants folds immediately and records
// nothing, so generic templated code can mix data constants and tracked
// quantities freely.
//
// Fused nodes (affine, weighted_sum) keep the tape compact where the MLPs
// and the anchor pooling would otherwise emit one node per multiply.

namespace sixpack::ad {

class Tape;

class Value {
public:
    Value() = default;
    Value(double v) : val_(v) {}  // implicit: constants fold silently
    Value(Tape* tape, int32_t node, double v) : tape_(tape), node_(node), val_(v) {}

    double value() const { return val_; }
    bool is_const() const { return tape_ == nullptr; }
    Tape* tape() const { return tape_; }
    int32_t node() const { return node_; }

private:
    Tape* tape_ = nullptr;
    int32_t node_ = -1;
    double val_ = 0.0;
};

class Tape {
public:
    /// Number of nodes recorded so far.
    int32_t size() const { return static_cast<int32_t>(nodes_.size()); }

    /// Reset for reuse; keeps allocated capacity.
    void clear() {
        nodes_.clear();
        parents_.clear();
        partials_.clear();
    }

    /// New leaf node (parameter or tracked input).
    Value input(double v) {
        const int32_t id = push_node(0);
        return Value(this, id, v);
    }

    /// Generic single-parent node.
    Value unary(const Value& a, double val, double pa) {
        if (a.is_const()) return Value(val);
        const int32_t id = push_node(1);
        set_edge(0, a.node(), pa);
        return Value(this, id, val);
    }

    /// Generic two-parent node; either operand may be a constant.
    Value binary(const Value& a, const Value& b, double val, double pa, double pb) {
        const int va = !a.is_const(), vb = !b.is_const();
        if (!va && !vb) return Value(val);
        assert(!va || !vb || a.tape() == b.tape());
        const int32_t id = push_node(va + vb);
        int k = 0;
        if (va) set_edge(k++, a.node(), pa);
        if (vb) set_edge(k++, b.node(), pb);
        return Value(this, id, val);
    }

    /// Fused affine combination: sum_i a_i * b_i + bias. One tape node.
    Value affine(std::span<const Value> a, std::span<const Value> b, const Value& bias) {
        assert(a.size() == b.size());
        double val = bias.value();
        int nvar = bias.is_const() ? 0 : 1;
        for (size_t i = 0; i < a.size(); ++i) {
            val += a[i].value() * b[i].value();
            nvar += !a[i].is_const();
            nvar += !b[i].is_const();
        }
        if (nvar == 0) return Value(val);
        const int32_t id = push_node(nvar);
        int k = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_const()) set_edge(k++, a[i].node(), b[i].value());
            if (!b[i].is_const()) set_edge(k++, b[i].node(), a[i].value());
        }
        if (!bias.is_const()) set_edge(k++, bias.node(), 1.0);
        return Value(this, id, val);
    }

    /// Fused constant-coefficient sum: sum_i w_i * x_i. One tape node.
    Value weighted_sum(std::span<const double> w, std::span<const Value> x) {
        assert(w.size() == x.size());
        double val = 0.0;
        int nvar = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            val += w[i] * x[i].value();
            nvar += !x[i].is_const();
        }
        if (nvar == 0) return Value(val);
        const int32_t id = push_node(nvar);
        int k = 0;
        for (size_t i = 0; i < x.size(); ++i)
            if (!x[i].is_const()) set_edge(k++, x[i].node(), w[i]);
        return Value(this, id, val);
    }

    /// d(output)/d(node) for every node on the tape, via one reverse sweep.
    std::vector<double> gradient(const Value& output) const {
        std::vector<double> grad(nodes_.size(), 0.0);
        if (output.is_const()) return grad;
        assert(output.tape() == this);
        grad[static_cast<size_t>(output.node())] = 1.0;
        for (int32_t i = size() - 1; i >= 0; --i) {
            const double g = grad[static_cast<size_t>(i)];
            if (g == 0.0) continue;
            const Node& n = nodes_[static_cast<size_t>(i)];
            for (uint32_t e = n.edge_begin; e < n.edge_end; ++e)
                grad[parents_[e]] += partials_[e] * g;
        }
        return grad;
    }

private:
    struct Node {
        uint32_t edge_begin;
        uint32_t edge_end;
    };

    int32_t push_node(int nedges) {
        const uint32_t begin = static_cast<uint32_t>(parents_.size());
        parents_.resize(begin + static_cast<uint32_t>(nedges));
        partials_.resize(begin + static_cast<uint32_t>(nedges));
        nodes_.push_back({begin, begin + static_cast<uint32_t>(nedges)});
        edge_cursor_ = begin;
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    void set_edge(int k, int32_t parent, double partial) {
        parents_[edge_cursor_ + static_cast<uint32_t>(k)] = static_cast<uint32_t>(parent);
        partials_[edge_cursor_ + static_cast<uint32_t>(k)] = partial;
    }

    std::vector<Node> nodes_;
    std::vector<uint32_t> parents_;
    std::vector<double> partials_;
    uint32_t edge_cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

namespace detail {
inline Tape* tape_of(const Value& a, const Value& b) {
    return a.is_const() ? b.tape() : a.tape();
}
}  // namespace detail

inline Value operator+(const Value& a, const Value& b) {
    if (a.is_const() && b.is_const()) return Value(a.value() + b.value());
    return detail::tape_of(a, b)->binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Value operator-(const Value& a, const Value& b) {
    if (a.is_const() && b.is_const()) return Value(a.value() - b.value());
    return detail::tape_of(a, b)->binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Value operator*(const Value& a, const Value& b) {
    if (a.is_const() && b.is_const()) return Value(a.value() * b.value());
    return detail::tape_of(a, b)->binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Value operator/(const Value& a, const Value& b) {
    if (a.is_const() && b.is_const()) return Value(a.value() / b.value());
    const double inv = 1.0 / b.value();
    return detail::tape_of(a, b)->binary(a, b, a.value() * inv, inv,
                                         -a.value() * inv * inv);
}
inline Value operator-(const Value& a) {
    if (a.is_const()) return Value(-a.value());
    return a.tape()->unary(a, -a.value(), -1.0);
}

inline Value& operator+=(Value& a, const Value& b) { return a = a + b; }
inline Value& operator-=(Value& a, const Value& b) { return a = a - b; }
inline Value& operator*=(Value& a, const Value& b) { return a = a * b; }

// Comparisons act on the forward values; used for piecewise selections.
inline bool operator<(const Value& a, const Value& b) { return a.value() < b.value(); }
inline bool operator>(const Value& a, const Value& b) { return a.value() > b.value(); }
inline bool operator<=(const Value& a, const Value& b) { return a.value() <= b.value(); }
inline bool operator>=(const Value& a, const Value& b) { return a.value() >= b.value(); }

// ---------------------------------------------------------------------------
// Elementary functions (local partials computed inline)
// ---------------------------------------------------------------------------

inline Value sqrt(const Value& a) {
    const double r = std::sqrt(a.value());
    if (a.is_const()) return Value(r);
    return a.tape()->unary(a, r, 0.5 / r);
}
inline Value exp(const Value& a) {
    const double r = std::exp(a.value());
    if (a.is_const()) return Value(r);
    return a.tape()->unary(a, r, r);
}
inline Value log(const Value& a) {
    if (a.is_const()) return Value(std::log(a.value()));
    return a.tape()->unary(a, std::log(a.value()), 1.0 / a.value());
}
inline Value tanh(const Value& a) {
    const double r = std::tanh(a.value());
    if (a.is_const()) return Value(r);
    return a.tape()->unary(a, r, 1.0 - r * r);
}
inline Value asin(const Value& a) {
    if (a.is_const()) return Value(std::asin(a.value()));
    const double d = 1.0 / std::sqrt(std::max(1.0 - a.value() * a.value(), 1e-300));
    return a.tape()->unary(a, std::asin(a.value()), d);
}
inline Value acos(const Value& a) {
    if (a.is_const()) return Value(std::acos(a.value()));
    const double d = -1.0 / std::sqrt(std::max(1.0 - a.value() * a.value(), 1e-300));
    return a.tape()->unary(a, std::acos(a.value()), d);
}
inline Value atan2(const Value& y, const Value& x) {
    const double r = std::atan2(y.value(), x.value());
    if (y.is_const() && x.is_const()) return Value(r);
    const double d = y.value() * y.value() + x.value() * x.value();
    return detail::tape_of(y, x)->binary(y, x, r, x.value() / d, -y.value() / d);
}
inline Value abs(const Value& a) { return a.value() < 0.0 ? -a : a; }
inline Value fabs(const Value& a) { return abs(a); }
inline double value_of(const Value& v) { return v.value(); }
inline Value min(const Value& a, const Value& b) { return a.value() <= b.value() ? a : b; }
inline Value max(const Value& a, const Value& b) { return a.value() >= b.value() ? a : b; }

using Vec3v = Vec3T<Value>;
using Mat3v = Mat3T<Value>;

}  // namespace sixpack::ad
