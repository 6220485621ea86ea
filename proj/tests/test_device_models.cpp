#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "memsim/memristor.hpp"
#include "memsim/opamp.hpp"
#include "support/ode_reference.hpp"

using namespace memsim;

namespace {
MemristorParams table_params() { return MemristorParams{}; } // Ron=100 Roff=16k Rinit=1k D=10n uv=10f p=10
} // namespace

TEST_CASE("memristance endpoints and the 1k operating point") {
    MemristorParams p = table_params();
    CHECK(memristance(0.0, p) == doctest::Approx(16000.0).epsilon(1e-12));
    CHECK(memristance(1.0, p) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(memristance(15000.0 / 15900.0, p) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK_THROWS_AS(memristance(-0.01, p), std::domain_error);
    CHECK_THROWS_AS(memristance(1.01, p), std::domain_error);
}

TEST_CASE("window values at the anchor points") {
    CHECK(window(0.5, 10) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(window(0.0, 10) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(window(1.0, 10) == doctest::Approx(0.0).epsilon(1e-15));
    // 1 - 0.5^20
    CHECK(window(0.25, 10) == doctest::Approx(0.99999904632568359375).epsilon(1e-15));
}

TEST_CASE("window symmetry about x = 1/2") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    std::uniform_int_distribution<int> ps(1, 12);
    for (int k = 0; k < 500; ++k) {
        double x = xs(rng);
        int p = ps(rng);
        CHECK(window(x, p) == doctest::Approx(window(1.0 - x, p)).epsilon(1e-12));
    }
}

TEST_CASE("state derivative constant and anchor values") {
    MemristorParams p = table_params();
    CHECK(p.k() == doctest::Approx(1.0e4).epsilon(1e-12));
    CHECK(state_derivative(0.5, 1e-3, p) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(state_derivative(1.0, 0.5, p) == doctest::Approx(0.0));
    CHECK(state_derivative(0.0, -0.5, p) == doctest::Approx(0.0));
}

TEST_CASE("x_from_resistance inverts the resistance map") {
    MemristorParams p = table_params();
    CHECK(x_from_resistance(1000.0, p) == doctest::Approx(15000.0 / 15900.0).epsilon(1e-12));
    CHECK(x_from_resistance(p.r_off, p) == doctest::Approx(0.0));
    CHECK(x_from_resistance(p.r_on, p) == doctest::Approx(1.0));
    CHECK_THROWS_AS(x_from_resistance(50.0, p), std::range_error);
    CHECK_THROWS_AS(x_from_resistance(20000.0, p), std::range_error);

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> rs(p.r_on, p.r_off);
    for (int k = 0; k < 500; ++k) {
        double r = rs(rng);
        CHECK(memristance(x_from_resistance(r, p), p) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("memristance stays within [r_on, r_off]") {
    MemristorParams p = table_params();
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        double r = memristance(xs(rng), p);
        CHECK(r >= p.r_on);
        CHECK(r <= p.r_off);
    }
}

TEST_CASE("parameter validation") {
    MemristorParams p = table_params();
    CHECK_NOTHROW(p.validate());
    p.r_on = 20000.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = table_params();
    p.r_init = 50.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = table_params();
    p.p = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("opamp output: saturation, zero differential, linear region") {
    OpAmpModel m; // gain 2e5, vsat 5
    CHECK(opamp_output(1.0, 0.0, m) == doctest::Approx(5.0));
    CHECK(opamp_output(0.3, 0.3, m) == doctest::Approx(0.0));
    CHECK(opamp_output(1e-6, 0.0, m) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(opamp_output(-1.0, 0.0, m) == doctest::Approx(-5.0));
}

TEST_CASE("opamp output is odd and monotone in the differential input") {
    OpAmpModel m;
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> vs(-2.0, 2.0);
    double prev_in = -3.0, prev_out = opamp_output(prev_in, 0.0, m);
    for (int k = 0; k < 300; ++k) {
        double v = vs(rng);
        CHECK(opamp_output(v, 0.0, m) == doctest::Approx(-opamp_output(-v, 0.0, m)));
    }
    for (double v = -3.0; v <= 3.0; v += 0.01) {
        double out = opamp_output(v, 0.0, m);
        CHECK(out >= prev_out - 1e-12);
        prev_out = out;
    }
}

TEST_CASE("integrate_state_step anchors") {
    MemristorParams p = table_params();
    CHECK(integrate_state_step(0.37, 0.0, 1e-3, p, StateMethod::ExplicitEuler) ==
          doctest::Approx(0.37));
    CHECK(integrate_state_step(0.37, 0.0, 1e-3, p, StateMethod::Implicit) ==
          doctest::Approx(0.37));
    CHECK(integrate_state_step(0.5, 1e-3, 1e-6, p, StateMethod::ExplicitEuler) ==
          doctest::Approx(0.50001).epsilon(1e-12));
    // boundary clamp under a huge drive
    CHECK(integrate_state_step(0.999999, 10.0, 1.0, p, StateMethod::ExplicitEuler) <= 1.0);
    CHECK(integrate_state_step(0.9, 1.0, 10.0, p, StateMethod::Implicit) <= 1.0);
}

TEST_CASE("implicit step approaches the explicit step as dt shrinks") {
    // |implicit(dt) - explicit(dt)| = O(dt^2): quartering dt divides the
    // gap by about 4 once more
    MemristorParams p = table_params();
    double x = 0.7, i = 2e-3;
    auto gap = [&](double dt) {
        return std::abs(integrate_state_step(x, i, dt, p, StateMethod::Implicit) -
                        integrate_state_step(x, i, dt, p, StateMethod::ExplicitEuler));
    };
    double g1 = gap(1e-4), g2 = gap(5e-5), g4 = gap(2.5e-5);
    CHECK(g1 / g2 == doctest::Approx(4.0).epsilon(0.15));
    CHECK(g2 / g4 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("charge invariance: equal charge, different waveform shape") {
    // dx / window(x) = k dq, so the final state depends on the delivered
    // charge alone while the trajectory stays interior
    MemristorParams p = table_params();
    const double x0 = 0.5;
    const double k = p.k();
    const double q = 1e-6; // 1 uC
    // constant 1 mA over 1 ms
    double x_const = memsim::testing::integrate_scalar(
        [&](double, double x) { return k * 1e-3 * window(x, p.p); }, 0.0, x0, 1e-3);
    // half-sine with the same total charge over 2 ms
    const double T = 2e-3;
    const double ipk = q * M_PI / (2.0 * T);
    double x_sine = memsim::testing::integrate_scalar(
        [&](double t, double x) { return k * ipk * std::sin(M_PI * t / T) * window(x, p.p); },
        0.0, x0, T);
    // two-level burst: 2 mA for 0.25 ms, then 0.5 mA for 1 ms
    double x_burst = memsim::testing::integrate_scalar(
        [&](double t, double x) {
            double i = t < 0.25e-3 ? 2e-3 : 0.5e-3;
            return k * i * window(x, p.p);
        },
        0.0, x0, 0.25e-3 + 1e-3);

    CHECK(x_sine == doctest::Approx(x_const).epsilon(1e-7));
    CHECK(x_burst == doctest::Approx(x_const).epsilon(1e-7));
    CHECK(x_const > 0.5);
    CHECK(x_const < 0.55);
}
