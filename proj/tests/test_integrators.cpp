#include "oracles.hpp"

#include "hjb/integrators.hpp"

#include <doctest.h>

#include <cmath>

using hjb::Vec;

namespace {

Vec v2(double a, double b) { return Vec{{a, b}}; }

const hjb::AffineSystem& dierks() {
    static const hjb::AffineSystem sys = hjb::make_dierks_system();
    return sys;
}

hjb::VectorField decay() {
    return [](const Vec& x) { return Vec(-x); };
}

double endpoint_error(double tol) {
    hjb::IntegratorConfig cfg;
    cfg.rtol = tol;
    cfg.atol = tol;
    const auto traj = hjb::tsit5_integrate(decay(), Vec::Constant(1, 1.0), 0.0, 1.0, cfg);
    return std::abs(traj.states.back()[0] - std::exp(-1.0));
}

} // namespace

TEST_SUITE("integrators") {

TEST_CASE("exponential decay reaches e^-1") {
    const auto traj = hjb::tsit5_integrate(decay(), Vec::Constant(1, 1.0), 0.0, 1.0);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 1.0);
    CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) < 1e-6);
    CHECK(traj.states.back()[0] == doctest::Approx(0.36788).epsilon(1e-5));
    for (std::size_t k = 1; k < traj.size(); ++k) {
        CHECK(traj.times[k] > traj.times[k - 1]);
    }
    CHECK(traj.states.size() == traj.times.size());
}

TEST_CASE("zero field leaves the state exactly constant") {
    const auto traj = hjb::tsit5_integrate([](const Vec& x) { return Vec(Vec::Zero(x.size())); }, v2(3.5, -1.25),
                                           0.0, 10.0);
    CHECK(traj.size() < 20);
    for (const Vec& x : traj.states) {
        CHECK(x == v2(3.5, -1.25));
    }
}

TEST_CASE("tighter tolerances reduce the endpoint error") {
    const double e5 = endpoint_error(1e-5);
    const double e7 = endpoint_error(1e-7);
    const double e9 = endpoint_error(1e-9);
    CHECK(e7 < e5);
    CHECK(e9 < e7);
    CHECK(e9 < 1e-8);
}

TEST_CASE("accepted steps respect the error tolerance on a known solution") {
    // x' = -x has a closed form, so per-step error can be bounded directly.
    hjb::IntegratorConfig cfg;
    const auto traj = hjb::tsit5_integrate(decay(), Vec::Constant(1, 2.0), 0.0, 3.0, cfg);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double exact = 2.0 * std::exp(-traj.times[k]);
        CHECK(std::abs(traj.states[k][0] - exact) < 1e-5);
    }
}

TEST_CASE("hamiltonian vanishes along the analytic closed loop") {
    const auto& s = dierks();
    const auto traj = hjb::tsit5_integrate(hjb::analytic_closed_loop(s), v2(-10, -10), 0.0, 5.0);
    REQUIRE(traj.size() > 10);
    double worst = 0.0;
    for (const Vec& x : traj.states) {
        const auto lam = oracle::lambda_star(x[0], x[1]);
        const double u = oracle::u_star(x[0], x[1]);
        worst = std::max(worst, std::abs(oracle::hamiltonian(x[0], x[1], u, lam[0], lam[1])));
    }
    CHECK(worst < 1e-6);
    CHECK(traj.states.back().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("euler step examples") {
    const auto& s = dierks();
    CHECK(hjb::euler_step(s, v2(1, 0), Vec::Zero(1), 0.01).isApprox(v2(0.99, -0.005), 1e-15));
    CHECK(hjb::euler_step(s, v2(0, 0), Vec::Zero(1), 0.5) == v2(0, 0));

    // u cancelling the second drift component at x = [1, 1] leaves only the first.
    const Vec x = v2(1, 1);
    const auto f = oracle::f1(1, 1);
    const Vec u = Vec::Constant(1, -f[1] / oracle::b(1));
    const Vec next = hjb::euler_step(s, x, u, 0.1);
    CHECK(next[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(next[0] == doctest::Approx(1.0 + 0.1 * f[0]).epsilon(1e-14));

    double prev = 1.0;
    for (const double dt : {1e-1, 1e-2, 1e-3}) {
        const double step = (hjb::euler_step(s, x, Vec::Zero(1), dt) - x).norm();
        CHECK(step < prev);
        CHECK(step / dt == doctest::Approx(s.dynamics(x, Vec::Zero(1)).norm()).epsilon(1e-12));
        prev = step;
    }
    CHECK_THROWS_AS(hjb::euler_step(s, x, Vec::Zero(1), 0.0), std::invalid_argument);
}

TEST_CASE("euler closed loop tracks the adaptive reference") {
    const auto& s = dierks();
    const auto ref = hjb::tsit5_integrate(hjb::analytic_closed_loop(s), v2(10, 10), 0.0, 20.0);
    Vec x = v2(10, 10);
    for (int k = 0; k < 20000; ++k) {
        x = hjb::euler_step(s, x, s.analytic_control(x), 1e-3);
    }
    CHECK((x - ref.states.back()).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("integration is deterministic") {
    const auto a = hjb::tsit5_integrate(hjb::analytic_closed_loop(dierks()), v2(3, -7), 0.0, 4.0);
    const auto b = hjb::tsit5_integrate(hjb::analytic_closed_loop(dierks()), v2(3, -7), 0.0, 4.0);
    CHECK(a.times == b.times);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.states[k] == b.states[k]);
    }
}

TEST_CASE("invalid configurations and step budget") {
    CHECK_THROWS_AS(hjb::tsit5_integrate(decay(), Vec::Constant(1, 1.0), 1.0, 1.0), std::invalid_argument);
    hjb::IntegratorConfig bad;
    bad.rtol = 0.0;
    CHECK_THROWS_AS(hjb::tsit5_integrate(decay(), Vec::Constant(1, 1.0), 0.0, 1.0, bad), std::invalid_argument);

    hjb::IntegratorConfig tiny;
    tiny.max_steps = 3;
    tiny.rtol = 1e-12;
    tiny.atol = 1e-12;
    try {
        hjb::tsit5_integrate(decay(), Vec::Constant(1, 1.0), 0.0, 10.0, tiny);
        FAIL("expected IntegrationError");
    } catch (const hjb::IntegrationError& e) {
        CHECK(e.last_time() > 0.0);
        CHECK(e.last_time() < 10.0);
        CHECK(e.partial().size() >= 1);
    }
}

TEST_CASE("trajectory csv") {
    hjb::Trajectory t;
    t.times = {0.0, 0.5};
    t.states = {v2(1, 2), v2(0.25, -1)};
    CHECK(hjb::trajectory_to_csv(t) == "t,x1,x2\n0,1,2\n0.5,0.25,-1\n");
    t.controls = {Vec::Constant(1, 3.0), Vec::Constant(1, -0.125)};
    CHECK(hjb::trajectory_to_csv(t) == "t,x1,x2,u\n0,1,2,3\n0.5,0.25,-1,-0.125\n");
    t.controls.pop_back();
    CHECK_THROWS(hjb::trajectory_to_csv(t));
}

}
