#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sixpack/ad.hpp"
#include "sixpack/rng.hpp"

using namespace sixpack;
using ad::Tape;
using ad::Value;

namespace {

// Central finite difference of a scalar function of n inputs.
template <class Fn>
std::vector<double> fd_gradient(Fn&& fn, std::vector<double> x, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double hi = fn(x);
        x[i] = keep - eps;
        const double lo = fn(x);
        x[i] = keep;
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

}  // namespace

TEST_CASE("square function gradient") {
    Tape tape;
    Value x = tape.input(3.0);
    Value y = x * x;
    REQUIRE(y.value() == Catch::Approx(9.0));
    const auto g = tape.gradient(y);
    CHECK(g[static_cast<size_t>(x.node())] == Catch::Approx(6.0));
    CHECK(g[static_cast<size_t>(y.node())] == Catch::Approx(1.0));  // d out / d out
}

TEST_CASE("product gradient") {
    Tape tape;
    Value x = tape.input(2.0);
    Value y = tape.input(5.0);
    Value f = x * y;
    const auto g = tape.gradient(f);
    CHECK(g[static_cast<size_t>(x.node())] == Catch::Approx(5.0));
    CHECK(g[static_cast<size_t>(y.node())] == Catch::Approx(2.0));
}

TEST_CASE("constants fold without touching the tape") {
    Tape tape;
    Value a(2.0), b(3.5);
    Value c = a * b + ad::sqrt(Value(16.0)) - ad::tanh(Value(0.0));
    CHECK(c.is_const());
    CHECK(c.value() == Catch::Approx(11.0));
    CHECK(tape.size() == 0);
}

TEST_CASE("elementary functions match finite differences") {
    auto fn = [](const std::vector<double>& v) {
        const double x = v[0], y = v[1];
        return std::exp(std::tanh(x) * y) + std::log(x * x + 1.0) +
               std::sqrt(x * x + y * y) + std::asin(0.3 * x) + std::acos(0.2 * y) +
               std::atan2(y, x);
    };
    const std::vector<double> at{0.7, -0.4};

    Tape tape;
    Value x = tape.input(at[0]);
    Value y = tape.input(at[1]);
    Value f = ad::exp(ad::tanh(x) * y) + ad::log(x * x + 1.0) +
              ad::sqrt(x * x + y * y) + ad::asin(0.3 * x) + ad::acos(0.2 * y) +
              ad::atan2(y, x);
    REQUIRE(f.value() == Catch::Approx(fn(at)).epsilon(1e-12));

    const auto g = tape.gradient(f);
    const auto fd = fd_gradient(fn, at);
    CHECK(g[static_cast<size_t>(x.node())] == Catch::Approx(fd[0]).epsilon(1e-6));
    CHECK(g[static_cast<size_t>(y.node())] == Catch::Approx(fd[1]).epsilon(1e-6));
}

TEST_CASE("division and negation") {
    Tape tape;
    Value x = tape.input(4.0);
    Value y = tape.input(2.0);
    Value f = -(x / y);
    CHECK(f.value() == Catch::Approx(-2.0));
    const auto g = tape.gradient(f);
    CHECK(g[static_cast<size_t>(x.node())] == Catch::Approx(-0.5));
    CHECK(g[static_cast<size_t>(y.node())] == Catch::Approx(1.0));
}

TEST_CASE("piecewise min/max/abs pick the active branch") {
    Tape tape;
    Value x = tape.input(-1.5);
    Value y = tape.input(2.0);
    Value m = ad::max(x, y);
    CHECK(m.value() == 2.0);
    auto g = tape.gradient(m);
    CHECK(g[static_cast<size_t>(x.node())] == 0.0);
    CHECK(g[static_cast<size_t>(y.node())] == 1.0);

    Value a = ad::abs(x);
    CHECK(a.value() == 1.5);
    g = tape.gradient(a);
    CHECK(g[static_cast<size_t>(x.node())] == -1.0);
}

TEST_CASE("fused affine node equals the unfused computation") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(6));
        std::vector<double> wv(n), xv(n);
        for (double& v : wv) v = rng.uniform(-1, 1);
        for (double& v : xv) v = rng.uniform(-1, 1);
        const double bv = rng.uniform(-1, 1);

        Tape tape;
        std::vector<Value> w, x;
        for (double v : wv) w.push_back(tape.input(v));
        for (double v : xv) x.push_back(tape.input(v));
        Value b = tape.input(bv);
        Value fused = tape.affine(w, x, b);

        double expect = bv;
        for (int i = 0; i < n; ++i) expect += wv[i] * xv[i];
        REQUIRE(fused.value() == Catch::Approx(expect).margin(1e-15));

        const auto g = tape.gradient(fused);
        for (int i = 0; i < n; ++i) {
            CHECK(g[static_cast<size_t>(w[i].node())] == Catch::Approx(xv[i]));
            CHECK(g[static_cast<size_t>(x[i].node())] == Catch::Approx(wv[i]));
        }
        CHECK(g[static_cast<size_t>(b.node())] == Catch::Approx(1.0));
    }
}

TEST_CASE("weighted_sum with constant coefficients") {
    Tape tape;
    std::vector<Value> x{tape.input(1.0), tape.input(2.0), tape.input(3.0)};
    const std::vector<double> w{0.2, 0.3, 0.5};
    Value s = tape.weighted_sum(w, x);
    CHECK(s.value() == Catch::Approx(0.2 + 0.6 + 1.5));
    const auto g = tape.gradient(s);
    for (size_t i = 0; i < 3; ++i)
        CHECK(g[static_cast<size_t>(x[i].node())] == Catch::Approx(w[i]));
}

TEST_CASE("gradients accumulate over shared subexpressions") {
    Tape tape;
    Value x = tape.input(1.3);
    Value t = ad::tanh(x);
    Value f = t * t + t;  // df/dx = (2 t + 1) (1 - t^2)
    const auto g = tape.gradient(f);
    const double tv = std::tanh(1.3);
    CHECK(g[static_cast<size_t>(x.node())] ==
          Catch::Approx((2.0 * tv + 1.0) * (1.0 - tv * tv)).epsilon(1e-12));
}

TEST_CASE("tape reuse after clear") {
    Tape tape;
    Value x = tape.input(2.0);
    Value f = x * x;
    (void)tape.gradient(f);
    tape.clear();
    CHECK(tape.size() == 0);
    Value y = tape.input(3.0);
    Value h = y * y * y;
    const auto g = tape.gradient(h);
    CHECK(g[static_cast<size_t>(y.node())] == Catch::Approx(27.0));
}
