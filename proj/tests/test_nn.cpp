#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "gridsim/nn/gradcheck.hpp"
#include "gridsim/nn/mlp.hpp"
#include "gridsim/nn/optimizer.hpp"

using namespace gridsim;
using namespace gridsim::nn;
using Catch::Approx;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
    return v;
}

Mlp random_net(Rng& rng, Activation act) {
    std::vector<int> sizes{static_cast<int>(1 + rng.index(6))};
    const auto hidden = 1 + rng.index(3);
    for (std::size_t i = 0; i < hidden; ++i) sizes.push_back(static_cast<int>(1 + rng.index(8)));
    sizes.push_back(static_cast<int>(1 + rng.index(4)));
    Mlp m(sizes, act, rng);
    for (auto& l : m.layers()) l.b = random_vector(l.b.size(), rng, 0.5);
    return m;
}

}  // namespace

TEST_CASE("zero network outputs zeros") {
    auto m = Mlp::zeros({3, 5, 2}, Activation::tanh);
    const auto y = m.forward(Eigen::Vector3d(1.0, -2.0, 0.5));
    REQUIRE(y.size() == 2);
    CHECK(y.isZero(0.0));
}

TEST_CASE("identity linear layer") {
    auto m = Mlp::zeros({3, 3}, Activation::relu);
    m.layers()[0].w.setIdentity();
    const Eigen::Vector3d x(0.3, -1.2, 4.0);
    CHECK(m.forward(x) == x);
}

TEST_CASE("hand-computed 2-2-1 tanh network") {
    auto m = Mlp::zeros({2, 2, 1}, Activation::tanh);
    m.layers()[0].w << 0.5, -0.3, 0.2, 0.8;
    m.layers()[0].b << 0.1, -0.2;
    m.layers()[1].w << 1.5, -0.7;
    m.layers()[1].b << 0.05;
    const double x0 = 0.4, x1 = -1.1;
    const double h0 = std::tanh(0.5 * x0 - 0.3 * x1 + 0.1);
    const double h1 = std::tanh(0.2 * x0 + 0.8 * x1 - 0.2);
    const double expected = 1.5 * h0 - 0.7 * h1 + 0.05;
    CHECK(std::abs(m.forward(Eigen::Vector2d(x0, x1))[0] - expected) <= 1e-12);
}

TEST_CASE("dimension mismatches throw") {
    auto m = Mlp::zeros({2, 3, 1}, Activation::tanh);
    CHECK_THROWS_AS(m.forward(Eigen::Vector3d::Zero()), DimensionError);
    CHECK_THROWS_AS(m.backward(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()), DimensionError);
    CHECK_THROWS_AS(Mlp::zeros({4}, Activation::tanh), DimensionError);
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(1);
    Mlp m({4, 6, 3}, Activation::tanh, rng);
    const auto g = m.backward(random_vector(4, rng), Eigen::VectorXd::Zero(3));
    CHECK(Mlp::flatten(g).isZero(0.0));
}

TEST_CASE("linear 1-1 gradient") {
    auto m = Mlp::zeros({1, 1}, Activation::tanh);
    m.layers()[0].w(0, 0) = 0.7;
    Eigen::VectorXd x(1), up(1);
    x << 2.5;
    up << 1.0;
    const auto g = m.backward(x, up);
    CHECK(g.layers[0].w(0, 0) == 2.5);
    CHECK(g.layers[0].b[0] == 1.0);
    CHECK(g.d_input[0] == 0.7);
}

TEST_CASE("finite-difference check on random networks") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto act = trial % 2 == 0 ? Activation::tanh : Activation::relu;
        const auto m = random_net(rng, act);
        const auto x = random_vector(m.input_size(), rng);
        const auto up = random_vector(m.output_size(), rng);
        const auto r = gradient_check(m, x, up);
        INFO("trial " << trial << " worst " << r.worst_index);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("probes across a ReLU kink are skipped") {
    auto m = Mlp::zeros({1, 1, 1}, Activation::relu);
    m.layers()[0].w(0, 0) = 1.0;
    m.layers()[1].w(0, 0) = 2.0;
    const auto r = gradient_check(m, Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0));
    CHECK(r.kinks_skipped == 1);  // first-layer bias; the weight multiplies x = 0
    CHECK(r.checked == 3);
    CHECK(r.max_rel_error < 1e-6);

    const auto smooth = gradient_check(m, Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 1.0));
    CHECK(smooth.kinks_skipped == 0);
    CHECK(smooth.checked == m.parameter_count());
}

TEST_CASE("input gradient matches finite differences") {
    Rng rng(7);
    Mlp m({3, 5, 2}, Activation::tanh, rng);
    Eigen::VectorXd x = random_vector(3, rng);
    const Eigen::VectorXd up = random_vector(2, rng);
    const auto g = m.backward(x, up);
    for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += 1e-5;
        xm[i] -= 1e-5;
        const double fd = (m.forward(xp).dot(up) - m.forward(xm).dot(up)) / 2e-5;
        CHECK(g.d_input[i] == Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("glorot initialization bounds and seeding") {
    Rng a(11), b(11);
    Mlp m1({9, 64, 64, 4}, Activation::tanh, a);
    Mlp m2({9, 64, 64, 4}, Activation::tanh, b);
    CHECK(m1 == m2);
    const double lim = std::sqrt(6.0 / (9 + 64));
    CHECK(m1.layers()[0].w.cwiseAbs().maxCoeff() <= lim);
    CHECK(m1.layers()[0].b.isZero(0.0));
    CHECK(m1.parameter_count() == 9 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4);
}

TEST_CASE("parameter flattening round trip") {
    Rng rng(3);
    Mlp m({2, 3, 2}, Activation::relu, rng);
    auto p = m.parameters();
    p *= 2.0;
    m.set_parameters(p);
    CHECK(m.parameters() == p);
}

TEST_CASE("sgd update") {
    auto m = Mlp::zeros({1, 1}, Activation::tanh);
    Optimizer opt({OptimizerKind::sgd, 0.1});
    auto g = m.zero_gradients();
    g.layers[0].w(0, 0) = 1.0;
    opt.apply(m, g);
    CHECK(m.layers()[0].w(0, 0) == Approx(-0.1).epsilon(1e-15));
    CHECK(m.layers()[0].b[0] == 0.0);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
    Rng rng(4);
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
        Mlp m({3, 4, 2}, Activation::tanh, rng);
        const auto before = m;
        Optimizer opt({kind, 0.01});
        for (int i = 0; i < 5; ++i) opt.apply(m, m.zero_gradients());
        CHECK(m == before);
    }
}

TEST_CASE("adam minimizes a scalar quadratic") {
    auto m = Mlp::zeros({1, 1}, Activation::tanh);
    m.layers()[0].b[0] = 1.0;
    Optimizer opt({OptimizerKind::adam, 0.01});
    for (int k = 0; k < 500; ++k) {
        auto g = m.zero_gradients();
        g.layers[0].b[0] = 2.0 * m.layers()[0].b[0];
        opt.apply(m, g);
    }
    // A scalar oracle running the same recursion independently.
    double p = 1.0, mm = 0.0, vv = 0.0;
    for (int t = 1; t <= 500; ++t) {
        const double g = 2.0 * p;
        mm = 0.9 * mm + 0.1 * g;
        vv = 0.999 * vv + 0.001 * g * g;
        p -= 0.01 * (mm / (1.0 - std::pow(0.9, t))) / (std::sqrt(vv / (1.0 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(m.layers()[0].b[0] == Approx(p).margin(1e-12));
    CHECK(std::abs(m.layers()[0].b[0]) < 0.05);
}

TEST_CASE("gradient clipping caps the step") {
    auto m = Mlp::zeros({1, 1}, Activation::tanh);
    OptimizerConfig c{OptimizerKind::sgd, 1.0};
    c.grad_clip = 1.0;
    Optimizer opt(c);
    auto g = m.zero_gradients();
    g.layers[0].w(0, 0) = 30.0;
    g.layers[0].b[0] = 40.0;
    opt.apply(m, g);
    CHECK(m.layers()[0].w(0, 0) == Approx(-0.6));
    CHECK(m.layers()[0].b[0] == Approx(-0.8));
}

TEST_CASE("invalid optimizer config") {
    OptimizerConfig c;
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(Optimizer(c), ConfigError);
    c.learning_rate = 0.1;
    c.beta1 = 1.0;
    CHECK_THROWS_AS(Optimizer(c), ConfigError);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(5);
    Mlp m({4, 7, 3}, Activation::relu, rng);
    for (auto& l : m.layers()) l.b = random_vector(l.b.size(), rng);
    const auto path = (std::filesystem::temp_directory_path() / "gridsim_mlp_ckpt.json").string();
    save_checkpoint(m, path);
    const auto back = load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(back == m);

    auto j = to_json(m);
    j["version"] = 2;
    CHECK_THROWS_AS(mlp_from_json(j), ConfigError);
    j = to_json(m);
    j["layers"][0]["bias"].erase(0);
    CHECK_THROWS_AS(mlp_from_json(j), ConfigError);
}

TEST_CASE("batched passes agree with per-sample passes") {
    Rng rng(8);
    for (auto act : {Activation::tanh, Activation::relu}) {
        auto m = random_net(rng, act);
        const int n = 7;
        Eigen::MatrixXd x(m.input_size(), n), up(m.output_size(), n);
        for (int j = 0; j < n; ++j) {
            x.col(j) = random_vector(m.input_size(), rng);
            up.col(j) = random_vector(m.output_size(), rng);
        }
        const auto yb = m.forward_batch(x);
        auto sum = m.zero_gradients();
        for (int j = 0; j < n; ++j) {
            CHECK((yb.col(j) - m.forward(x.col(j))).cwiseAbs().maxCoeff() < 1e-13);
            sum += m.backward(x.col(j), up.col(j));
        }
        const auto gb = m.backward_batch(x, up);
        CHECK((Mlp::flatten(gb) - Mlp::flatten(sum)).cwiseAbs().maxCoeff() < 1e-12);
    }
}
