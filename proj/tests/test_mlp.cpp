#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "sixpack/mlp.hpp"

using namespace sixpack;

TEST_CASE("zero parameters give zero output") {
    const MlpParams p = make_zero_mlp({4, 3, 2});
    const std::vector<double> in{0.3, -1.0, 2.0, 0.7};
    for (double v : mlp_forward<double>(p, in)) CHECK(v == 0.0);
}

TEST_CASE("single linear layer with identity weights echoes the input") {
    MlpParams p = make_zero_mlp({3, 3});
    for (int i = 0; i < 3; ++i) p.weights[0][static_cast<size_t>(4 * i)] = 1.0;
    const std::vector<double> in{0.25, -0.5, 1.5};
    const auto out = mlp_forward<double>(p, in);
    for (int i = 0; i < 3; ++i) CHECK(out[static_cast<size_t>(i)] == in[static_cast<size_t>(i)]);
}

TEST_CASE("2-2-1 network matches a hand computation") {
    MlpParams p = make_zero_mlp({2, 2, 1});
    p.weights[0] = {0.5, -0.25, 0.1, 0.3};
    p.biases[0] = {0.05, -0.1};
    p.weights[1] = {0.7, -0.2};
    p.biases[1] = {0.2};
    const std::vector<double> in{0.3, -0.6};
    const double h0 = std::tanh(0.5 * 0.3 + (-0.25) * (-0.6) + 0.05);
    const double h1 = std::tanh(0.1 * 0.3 + 0.3 * (-0.6) - 0.1);
    const double expect = 0.7 * h0 - 0.2 * h1 + 0.2;
    const auto out = mlp_forward<double>(p, in);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("shape mismatch is rejected") {
    const MlpParams p = make_zero_mlp({3, 2});
    const std::vector<double> in{1.0, 2.0};
    CHECK_THROWS_AS(mlp_forward<double>(p, in), ShapeMismatch);
}

TEST_CASE("softmax basics") {
    const auto uniform = softmax(std::vector<double>{4.2, 4.2, 4.2});
    for (double v : uniform) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-12));

    const auto single = softmax(std::vector<double>{-17.0});
    REQUIRE(single.size() == 1);
    CHECK(single[0] == Catch::Approx(1.0).margin(1e-12));

    const auto two = softmax(std::vector<double>{0.0, std::log(2.0)});
    CHECK(two[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
    CHECK(two[1] == Catch::Approx(2.0 / 3.0).margin(1e-12));
}

TEST_CASE("softmax is translation invariant and normalized") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(5);
        for (double& x : v) x = rng.uniform(-30, 30);
        const auto a = softmax(v);
        std::vector<double> shifted = v;
        const double c = rng.uniform(-100, 100);
        for (double& x : shifted) x += c;
        const auto b = softmax(shifted);
        double total = 0.0;
        for (size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-12);
            CHECK(a[i] > 0.0);
            total += a[i];
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    Rng rng(32);
    MlpParams p = make_mlp({2, 2}, rng);
    const MlpParams before = p;
    AdamState st = AdamState::zeros(p.flat_size());
    st.m.assign(p.flat_size(), 0.25);
    st.v.assign(p.flat_size(), 0.5);
    const std::vector<double> zeros(p.flat_size(), 0.0);

    // Fresh (zero) moments + zero gradient: parameters must not move.
    AdamState fresh = AdamState::zeros(p.flat_size());
    adam_step(p, zeros, fresh);
    std::vector<double> after, orig;
    p.for_each_param([&](double v) { after.push_back(v); });
    before.for_each_param([&](double v) { orig.push_back(v); });
    for (size_t k = 0; k < orig.size(); ++k) CHECK(after[k] == orig[k]);
    CHECK(fresh.step == 1);

    // Nonzero moments decay toward zero under zero gradients.
    MlpParams q = before;
    adam_step(q, zeros, st);
    for (size_t k = 0; k < st.m.size(); ++k) {
        CHECK(st.m[k] == Catch::Approx(0.9 * 0.25));
        CHECK(st.v[k] == Catch::Approx(0.999 * 0.5));
    }
}

TEST_CASE("first adam step moves by roughly -lr * sign(g)") {
    MlpParams p = make_zero_mlp({1, 2});
    AdamState st = AdamState::zeros(p.flat_size());
    const std::vector<double> grads{0.37, -1.9, 0.0, 0.0};
    AdamConfig cfg;
    cfg.lr = 1e-2;
    adam_step(p, grads, st, cfg);
    std::vector<double> after;
    p.for_each_param([&](double v) { after.push_back(v); });
    CHECK(after[0] == Catch::Approx(-cfg.lr).epsilon(1e-4));
    CHECK(after[1] == Catch::Approx(cfg.lr).epsilon(1e-4));
    CHECK(after[2] == 0.0);
}

TEST_CASE("adam rejects non-finite gradients") {
    MlpParams p = make_zero_mlp({1, 1});
    AdamState st = AdamState::zeros(p.flat_size());
    std::vector<double> grads{std::numeric_limits<double>::quiet_NaN(), 0.0};
    CHECK_THROWS_AS(adam_step(p, grads, st), NonFiniteGradient);
}

TEST_CASE("adam converges on a quadratic bowl") {
    Rng rng(33);
    MlpParams p = make_zero_mlp({1, 4});
    p.for_each_param([&](double& v) { v = rng.uniform(-0.5, 0.5); });
    AdamState st = AdamState::zeros(p.flat_size());
    AdamConfig cfg;
    cfg.lr = 0.02;
    for (int step = 0; step < 500; ++step) {
        std::vector<double> grads;
        p.for_each_param([&](double v) { grads.push_back(2.0 * v); });
        adam_step(p, grads, st, cfg);
    }
    double norm2 = 0.0;
    p.for_each_param([&](double v) { norm2 += v * v; });
    CHECK(std::sqrt(norm2) < 1e-3);
}

TEST_CASE("training path gradients match finite differences") {
    Rng rng(34);
    MlpParams p = make_mlp({3, 4, 2}, rng);
    const std::vector<double> input{0.2, -0.7, 0.4};

    auto loss_at = [&](const MlpParams& params) {
        const auto out = mlp_forward<double>(params, input);
        return out[0] * out[0] + 0.5 * out[1] * out[1] + out[0] * out[1];
    };

    ad::Tape tape;
    auto lifted = lift_params(tape, p);
    std::vector<ad::Value> in;
    for (double v : input) in.push_back(ad::Value(v));
    const auto out = mlp_forward<ad::Value>(lifted, in);
    ad::Value loss = out[0] * out[0] + ad::Value(0.5) * out[1] * out[1] + out[0] * out[1];
    CHECK(loss.value() == Catch::Approx(loss_at(p)).epsilon(1e-12));

    const auto grads = collect_gradients(lifted, tape.gradient(loss));

    const double eps = 1e-5;
    size_t idx = 0;
    double worst = 0.0;
    p.for_each_param([&](double& v) {
        const double keep = v;
        v = keep + eps;
        const double hi = loss_at(p);
        v = keep - eps;
        const double lo = loss_at(p);
        v = keep;
        const double fd = (hi - lo) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(grads[idx]), 1e-8});
        worst = std::max(worst, std::abs(fd - grads[idx]) / denom);
        ++idx;
    });
    CHECK(worst < 1e-4);
}

TEST_CASE("checkpoint round-trip is lossless") {
    Rng rng(35);
    MlpParams p = make_mlp({5, 7, 3}, rng);
    const std::string path = (std::filesystem::temp_directory_path() /
                              "sixpack_test_mlp_ckpt.txt").string();
    save_mlp(path, p);
    const MlpParams q = load_mlp(path);
    REQUIRE(q.sizes == p.sizes);
    std::vector<double> a, b;
    p.for_each_param([&](double v) { a.push_back(v); });
    q.for_each_param([&](double v) { b.push_back(v); });
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // bitwise
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects a wrong version line") {
    const std::string path = (std::filesystem::temp_directory_path() /
                              "sixpack_test_bad_ckpt.txt").string();
    {
        std::ofstream os(path);
        os << "sixpack-ckpt/999\nnet mlp\n";
    }
    CHECK_THROWS_AS(load_mlp(path), FormatVersionMismatch);
    std::filesystem::remove(path);
}

TEST_CASE("parameter initialization is deterministic per seed") {
    Rng a(99), b(99);
    const MlpParams pa = make_mlp({4, 8, 2}, a);
    const MlpParams pb = make_mlp({4, 8, 2}, b);
    std::vector<double> va, vb;
    pa.for_each_param([&](double v) { va.push_back(v); });
    pb.for_each_param([&](double v) { vb.push_back(v); });
    for (size_t i = 0; i < va.size(); ++i) CHECK(va[i] == vb[i]);
}
