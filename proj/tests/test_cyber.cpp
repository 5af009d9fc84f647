#include <catch_amalgamated.hpp>

#include "gridsim/cyber/actuation.hpp"
#include "gridsim/cyber/channel.hpp"

using namespace gridsim;
using namespace gridsim::cyber;
using Catch::Approx;

namespace {

BusState state_at(long k) {
    BusState s;
    s.v = 1.0 + 0.001 * static_cast<double>(k);
    s.freq = 50.0 + 0.01 * static_cast<double>(k);
    s.step = k;
    return s;
}

ChannelConfig identity_channel() {
    ChannelConfig c;
    c.delay_pmf = {1.0, 0.0, 0.0, 0.0};
    c.p_drop = 0.0;
    c.sigma_v = 0.0;
    c.sigma_f = 0.0;
    return c;
}

FdiConfig no_attack() {
    FdiConfig f;
    f.enabled = false;
    return f;
}

}  // namespace

TEST_CASE("truncated gaussian delay masses") {
    const auto p = truncated_gaussian_pmf();
    CHECK(p[0] == Approx(normal_cdf(-0.5)).epsilon(1e-14));
    CHECK(p[1] == Approx(normal_cdf(0.5) - normal_cdf(-0.5)).epsilon(1e-14));
    CHECK(p[2] == Approx(normal_cdf(1.5) - normal_cdf(0.5)).epsilon(1e-14));
    CHECK(p[3] == Approx(1.0 - normal_cdf(1.5)).epsilon(1e-14));
    CHECK(p[0] + p[1] + p[2] + p[3] == Approx(1.0).epsilon(1e-15));
    CHECK(p[0] == Approx(0.3085).margin(1e-4));
    CHECK(p[1] == Approx(0.3829).margin(1e-4));
}

TEST_CASE("identity channel passes the true state") {
    StateHistory h(state_at(0));
    Observation last;
    Rng rng(1);
    for (long k = 1; k < 50; ++k) {
        h.push(state_at(k));
        const auto o = observe(identity_channel(), no_attack(), h, k, rng, last);
        CHECK(o.state == state_at(k));
        CHECK_FALSE(o.dropped);
        CHECK(o.delay_applied == 0);
        last = o;
    }
}

TEST_CASE("every packet dropped returns the previous delivery") {
    auto cfg = identity_channel();
    BusChannel ch(state_at(0));
    Rng rng(2);
    ch.push(state_at(1));
    const auto first = ch.observe(cfg, no_attack(), 1, rng);
    cfg.p_drop = 1.0;
    for (long k = 2; k < 30; ++k) {
        ch.push(state_at(k));
        const auto o = ch.observe(cfg, no_attack(), k, rng);
        CHECK(o.dropped);
        CHECK(o.state == first.state);
    }
    CHECK(ch.loss_rate() == Approx(28.0 / 29.0));
}

TEST_CASE("forced voltage attack") {
    auto cfg = identity_channel();
    FdiConfig f;
    f.p_fdi = 1.0;
    f.a_v_min = f.a_v_max = 0.03;
    f.a_f_min = f.a_f_max = 0.0;
    f.windows = {{10, 20}};
    StateHistory h(state_at(0));
    Rng rng(3);
    Observation last;
    h.push(state_at(15));
    auto o = observe(cfg, f, h, 15, rng, last);
    CHECK(o.fdi_active);
    CHECK(o.state.v == Approx(state_at(15).v + 0.03).epsilon(1e-15));
    CHECK(o.fdi_severity > 0.0);
    o = observe(cfg, f, h, 25, rng, last);
    CHECK_FALSE(o.fdi_active);
    CHECK(o.state.v == state_at(15).v);
}

TEST_CASE("channel statistics over 1e5 draws") {
    ChannelConfig cfg;
    FdiConfig f;
    f.windows = {{0, 100000}};
    StateHistory h(state_at(0));
    Rng rng(99);
    Observation last;
    const int n = 100000;
    int drops = 0;
    std::array<int, 4> hist{};
    int attacks = 0;
    for (int k = 0; k < n; ++k) {
        const auto o = observe(cfg, f, h, k, rng, last);
        hist[static_cast<std::size_t>(o.delay_applied)]++;
        if (o.dropped) {
            ++drops;
            continue;
        }
        if (o.fdi_active) {
            ++attacks;
            CHECK(o.a_v >= -0.03);
            CHECK(o.a_v <= 0.03);
            CHECK(o.a_f >= -0.15);
            CHECK(o.a_f <= 0.18);
        }
        last = o;
    }
    CHECK(static_cast<double>(drops) / n == Approx(0.05).margin(0.005));
    const auto p = truncated_gaussian_pmf();
    for (std::size_t b = 0; b < 4; ++b) CHECK(static_cast<double>(hist[b]) / n == Approx(p[b]).margin(0.02));
    CHECK(static_cast<double>(attacks) / (n - drops) == Approx(0.04).margin(0.005));
}

TEST_CASE("no attack outside windows") {
    ChannelConfig cfg;
    FdiConfig f;
    f.p_fdi = 1.0;
    f.windows = {{100, 150}, {300, 350}};
    StateHistory h(state_at(0));
    Rng rng(5);
    Observation last;
    for (long k = 0; k < 500; ++k) {
        const auto o = observe(cfg, f, h, k, rng, last);
        if (!o.dropped) {
            CHECK(o.fdi_active == window_active(f, k));
            last = o;
        }
    }
}

TEST_CASE("delays never exceed three steps and pick the lagged state") {
    ChannelConfig cfg;
    cfg.p_drop = 0.0;
    cfg.sigma_v = cfg.sigma_f = 0.0;
    StateHistory h(state_at(0));
    Rng rng(6);
    Observation last;
    for (long k = 1; k < 2000; ++k) {
        h.push(state_at(k));
        const auto o = observe(cfg, no_attack(), h, k, rng, last);
        REQUIRE(o.delay_applied >= 0);
        REQUIRE(o.delay_applied <= 3);
        CHECK(o.state.step == std::max(0L, k - o.delay_applied));
        const double ms = delay_ms(cfg, o.delay_applied);
        CHECK(ms >= 20.0);
        CHECK(ms <= 120.0);
    }
}

TEST_CASE("observation sequence reproducible per seed") {
    ChannelConfig cfg;
    FdiConfig f;
    f.windows = {{0, 1000}};
    auto run = [&] {
        BusChannel ch(state_at(0));
        Rng rng = Rng::stream(7, 12);
        std::vector<double> out;
        for (long k = 1; k < 1000; ++k) {
            ch.push(state_at(k));
            out.push_back(ch.observe(cfg, f, k, rng).state.v);
        }
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("random attack windows") {
    Rng rng(10);
    double total = 0.0;
    for (int t = 0; t < 400; ++t) {
        const auto w = random_attack_windows(6000, 3.0, 50, rng);
        FdiConfig f;
        f.windows = w;
        CHECK_NOTHROW(validate(f));
        for (const auto& x : w) CHECK(x.end - x.start == 50);
        total += static_cast<double>(w.size());
    }
    CHECK(total / 400.0 == Approx(3.0).margin(0.3));
}

TEST_CASE("edge and cloud views") {
    StateHistory h(state_at(0), 4);
    for (long k = 1; k <= 10; ++k) h.push(state_at(k));
    Observation o;
    o.state = state_at(10);
    auto [edge, cloud] = edge_cloud_views(h, o, 2);
    CHECK(cloud.step == 8);
    CHECK(edge == state_at(10));
    auto views0 = edge_cloud_views(h, o, 0);
    CHECK(views0.second == state_at(10));
}

TEST_CASE("actuation lag") {
    ActuationConfig cfg;
    cfg.sigma_edge = 0.0;
    Rng rng(1);
    ControlAction one{{1.0, -0.5, 0.2, 0.0}};
    CHECK(actuate(cfg, one, one, 1.0, rng) == one);

    ControlAction cmd{{1.0, 1.0, 1.0, 1.0}};
    ControlAction zero{};
    auto a = actuate(cfg, cmd, zero, 0.04, rng);
    for (double v : a.values) CHECK(v == 1.0);
    a = actuate(cfg, cmd, zero, 0.01, rng);
    for (double v : a.values) CHECK(v == Approx(0.25).epsilon(1e-15));

    cfg.sigma_edge = 0.01;
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double e = actuate(cfg, zero, zero, 1.0, rng)[0];
        sum += e;
        sq += e * e;
    }
    CHECK(std::sqrt(sq / n) == Approx(0.01).epsilon(0.05));
    CHECK_THROWS_AS(actuate(cfg, zero, zero, 0.0, rng), DomainError);
}
