#include "oracles.hpp"

#include "hjb/evaluation.hpp"

#include <doctest.h>

#include <random>

using hjb::Domain;
using hjb::Vec;

namespace {

const hjb::AffineSystem& dierks() {
    static const hjb::AffineSystem sys = hjb::make_dierks_system();
    return sys;
}

Domain mesh(int res) {
    Domain d;
    d.resolution = res;
    return d;
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("zero network errors at the corner") {
    const auto mse = hjb::mse_surfaces(hjb::NetworkParams{}, dierks(), mesh(3));
    CHECK(mse.lambda1.values(2, 2) == 100.0);
    CHECK(mse.lambda2.values(2, 2) == 400.0);
    const double u_star = oracle::u_star(10, 10);
    CHECK(mse.control.values(2, 2) == doctest::Approx(u_star * u_star).epsilon(1e-14));
    CHECK(mse.lambda2.values(1, 1) == 0.0);

    const auto ham = hjb::hamiltonian_surface(hjb::NetworkParams{}, dierks(), mesh(3));
    CHECK(ham.values(2, 2) == 200.0);
    CHECK(ham.values(1, 1) == 0.0);
    CHECK(ham.values(0, 2) == 200.0);
}

TEST_CASE("analytic costate has zero error and zero hamiltonian") {
    const auto model = hjb::analytic_costate_fn(dierks());
    const auto mse = hjb::mse_surfaces(model, dierks(), mesh(41));
    CHECK(mse.lambda1.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(mse.lambda2.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(mse.control.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(hjb::hamiltonian_surface(model, dierks(), mesh(41)).values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("analytic reconstructions follow the closed forms") {
    const auto rec = hjb::reconstruct_surfaces(hjb::analytic_costate_fn(dierks()), dierks(), mesh(21));
    for (std::size_t i = 0; i < rec.lambda1_analytic.x1.size(); ++i) {
        for (std::size_t j = 0; j < rec.lambda1_analytic.x2.size(); ++j) {
            const double x1 = rec.lambda1_analytic.x1[i];
            const double x2 = rec.lambda1_analytic.x2[j];
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            CHECK(rec.lambda1_analytic.values(ii, jj) == x1);
            CHECK(rec.lambda2_analytic.values(ii, jj) == 2.0 * x2);
            CHECK(rec.control_analytic.values(ii, jj) == doctest::Approx(oracle::u_star(x1, x2)).epsilon(1e-12));
            CHECK(rec.control_learned.values(ii, jj) == rec.control_analytic.values(ii, jj));
            if (x2 == 0.0) {
                CHECK(rec.control_analytic.values(ii, jj) == 0.0);
            }
        }
    }
}

TEST_CASE("network surfaces agree with the chain-rule oracle") {
    std::mt19937_64 rng(17);
    const auto p = oracle::random_params(rng);
    const Domain d = mesh(11);
    const auto mse = hjb::mse_surfaces(p, dierks(), d);
    const auto rec = hjb::reconstruct_surfaces(p, dierks(), d);
    const auto ham = hjb::hamiltonian_surface(p, dierks(), d);
    for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
            const double x1 = d.coordinate(0, i);
            const double x2 = d.coordinate(1, j);
            const auto lam = oracle::net_costate(p, x1, x2);
            const auto star = oracle::lambda_star(x1, x2);
            const double u = oracle::control(x1, lam[1]);
            const double us = oracle::u_star(x1, x2);
            CHECK(rec.lambda1_learned.values(i, j) == doctest::Approx(lam[0]).epsilon(1e-12));
            CHECK(rec.lambda2_learned.values(i, j) == doctest::Approx(lam[1]).epsilon(1e-12));
            CHECK(rec.control_learned.values(i, j) == doctest::Approx(u).epsilon(1e-12));
            CHECK(mse.lambda1.values(i, j) ==
                  doctest::Approx((lam[0] - star[0]) * (lam[0] - star[0])).epsilon(1e-10));
            CHECK(mse.lambda2.values(i, j) ==
                  doctest::Approx((lam[1] - star[1]) * (lam[1] - star[1])).epsilon(1e-10));
            CHECK(mse.control.values(i, j) == doctest::Approx((u - us) * (u - us)).epsilon(1e-10));
            CHECK(ham.values(i, j) ==
                  doctest::Approx(oracle::hamiltonian(x1, x2, u, lam[0], lam[1])).epsilon(1e-10));
            CHECK(mse.lambda1.values(i, j) >= 0.0);
            CHECK(mse.control.values(i, j) >= 0.0);
        }
    }
}

TEST_CASE("grid axes cover the domain") {
    Domain d;
    d.lower = {-1.0, 2.0};
    d.upper = {3.0, 4.0};
    d.resolution = 5;
    const auto g = hjb::hamiltonian_surface(hjb::NetworkParams{}, dierks(), d);
    CHECK(g.quantity == "hamiltonian");
    CHECK(g.x1 == std::vector<double>{-1, 0, 1, 2, 3});
    CHECK(g.x2 == std::vector<double>{2, 2.5, 3, 3.5, 4});
    CHECK(g.values.rows() == 5);
    CHECK(g.values.cols() == 5);
    d.resolution = 1;
    CHECK_THROWS_AS(hjb::hamiltonian_surface(hjb::NetworkParams{}, dierks(), d), std::invalid_argument);
}

TEST_CASE("surface csv") {
    hjb::SurfaceGrid g;
    g.quantity = "u_sq_error";
    g.x1 = {-1.0, 1.0};
    g.x2 = {0.0, 0.5};
    g.values.resize(2, 2);
    g.values << 1, 2, 3, 0.1;
    CHECK(hjb::surface_to_csv(g) == "# quantity=u_sq_error\nx1,x2,value\n-1,0,1\n-1,0.5,2\n1,0,3\n1,0.5,0.1\n");
}

}
