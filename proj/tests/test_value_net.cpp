#include "oracles.hpp"

#include "hjb/value_net.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <random>

using hjb::NetInput;
using hjb::NetworkParams;

namespace {

NetworkParams sparse_chain() {
    NetworkParams p;
    p.w1()(0, 0) = 1.0;
    p.w2()(0, 0) = 1.0;
    p.w3()(0, 0) = 1.0;
    return p;
}

// L(theta) = s * J + c . grad_x J evaluated with the loop oracles.
double sensitivity_objective(const NetworkParams& p, const NetInput& x, const hjb::Sensitivities& s) {
    const auto g = oracle::net_costate(p, x[0], x[1]);
    return s.d_value * oracle::net_value(p, x[0], x[1]) + s.d_costate[0] * g[0] + s.d_costate[1] * g[1];
}

} // namespace

TEST_SUITE("value_net") {

TEST_CASE("zero network evaluates to zero with zero costate") {
    const NetworkParams p;
    for (const NetInput& x : {NetInput(0, 0), NetInput(3, -7), NetInput(-10, 10)}) {
        hjb::ForwardTape tape;
        CHECK(hjb::forward(p, x, tape) == 0.0);
        CHECK(hjb::costate(p, tape).isZero(0.0));
    }
}

TEST_CASE("constant head ignores the input") {
    std::mt19937_64 rng(3);
    NetworkParams p = oracle::random_params(rng);
    p.w3().setZero();
    p.b3() = 2.5;
    CHECK(hjb::forward(p, NetInput(0.3, -4.0)) == 2.5);
    CHECK(hjb::forward(p, NetInput(9.0, 1.0)) == 2.5);
}

TEST_CASE("sparse chain value and costate") {
    const NetworkParams p = sparse_chain();
    hjb::ForwardTape tape;
    const double j = hjb::forward(p, NetInput(0.5, 7.0), tape);
    CHECK(j == doctest::Approx(std::tanh(std::tanh(0.5))).epsilon(1e-15));
    CHECK(j == doctest::Approx(0.4318081805950962).epsilon(1e-14));

    const NetInput lam = hjb::costate(p, tape);
    const double t = std::tanh(0.5);
    const double expected = (1.0 - std::tanh(t) * std::tanh(t)) * (1.0 - t * t);
    CHECK(lam[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(lam[0] == doctest::Approx(0.6398080218406107).epsilon(1e-14));
    CHECK(lam[1] == 0.0);
}

TEST_CASE("forward matches the loop oracle and records the tape") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const NetworkParams p = oracle::random_params(rng);
        const NetInput x(std::uniform_real_distribution<>(-10, 10)(rng), std::uniform_real_distribution<>(-10, 10)(rng));
        hjb::ForwardTape tape;
        const double j = hjb::forward(p, x, tape);
        CHECK(j == doctest::Approx(oracle::net_value(p, x[0], x[1])).epsilon(1e-13));
        CHECK(tape.value == j);
        CHECK(tape.x == x);
        for (int i = 0; i < hjb::kHiddenWidth; ++i) {
            CHECK(tape.a1[i] == std::tanh(tape.z1[i]));
            CHECK(tape.a2[i] == std::tanh(tape.z2[i]));
            CHECK(std::abs(tape.a1[i]) <= 1.0);
        }
    }
}

TEST_CASE("forward is pure") {
    std::mt19937_64 rng(5);
    const NetworkParams p = oracle::random_params(rng);
    const NetInput x(1.25, -3.5);
    const double first = hjb::forward(p, x);
    for (int i = 0; i < 5; ++i) {
        CHECK(hjb::forward(p, x) == first);
    }
}

TEST_CASE("costate agrees with central differences on random instances") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const NetworkParams p = oracle::random_params(rng);
        const NetInput x(ux(rng), ux(rng));
        hjb::ForwardTape tape;
        hjb::forward(p, x, tape);
        const NetInput lam = hjb::costate(p, tape);
        const auto fd = oracle::net_costate_fd(p, x[0], x[1], 1e-4);
        const auto chain = oracle::net_costate(p, x[0], x[1]);
        for (int c = 0; c < 2; ++c) {
            worst = std::max(worst, oracle::rel_err(lam[c], fd[c], 1e-4));
            CHECK(lam[c] == doctest::Approx(chain[c]).epsilon(1e-12).scale(1.0));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("backward with value sensitivity is the plain parameter gradient") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const NetworkParams p = oracle::random_params(rng);
        const NetInput x(std::uniform_real_distribution<>(-2, 2)(rng), std::uniform_real_distribution<>(-2, 2)(rng));
        hjb::ForwardTape tape;
        hjb::forward(p, x, tape);
        NetworkParams grad;
        hjb::backward(p, tape, {1.0, NetInput::Zero()}, grad);
        for (std::size_t k = 0; k < NetworkParams::kSize; ++k) {
            const double fd = oracle::param_fd(p, k, 1e-5, [&](const NetworkParams& q) {
                return oracle::net_value(q, x[0], x[1]);
            });
            CHECK(oracle::rel_err(grad.flat()[k], fd, 1e-3) < 1e-6);
        }
    }
}

TEST_CASE("backward through the costate path agrees with finite differences") {
    std::mt19937_64 rng(909);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const NetworkParams p = oracle::random_params(rng);
        const NetInput x(n(rng), n(rng));
        const hjb::Sensitivities s{n(rng), NetInput(n(rng), n(rng))};
        hjb::ForwardTape tape;
        hjb::forward(p, x, tape);
        NetworkParams grad;
        hjb::backward(p, tape, s, grad);
        // A sample of entries from every layer, including b3.
        for (std::size_t k = trial % 7; k < NetworkParams::kSize; k += 7) {
            const double fd = oracle::param_fd(p, k, 1e-5,
                                               [&](const NetworkParams& q) { return sensitivity_objective(q, x, s); });
            worst = std::max(worst, oracle::rel_err(grad.flat()[k], fd, 1e-3));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("backward accumulates and respects structural zeros") {
    std::mt19937_64 rng(8);
    const NetworkParams p = oracle::random_params(rng);
    hjb::ForwardTape tape;
    hjb::forward(p, NetInput(0.4, -1.1), tape);

    NetworkParams grad;
    grad.flat()[3] = 1.5;
    const NetworkParams before = grad;
    hjb::backward(p, tape, {0.0, NetInput::Zero()}, grad);
    CHECK(grad == before);

    NetworkParams g_cost;
    hjb::backward(p, tape, {0.0, NetInput(1.0, 0.0)}, g_cost);
    CHECK(g_cost.b3() == 0.0);

    NetworkParams once;
    hjb::backward(p, tape, {0.7, NetInput(0.2, -0.3)}, once);
    NetworkParams twice;
    hjb::backward(p, tape, {0.7, NetInput(0.2, -0.3)}, twice);
    hjb::backward(p, tape, {0.7, NetInput(0.2, -0.3)}, twice);
    for (std::size_t k = 0; k < NetworkParams::kSize; ++k) {
        CHECK(twice.flat()[k] == doctest::Approx(2.0 * once.flat()[k]).epsilon(1e-14));
    }
}

TEST_CASE("initialization is seeded and bounded") {
    const NetworkParams a = hjb::init_params(123);
    const NetworkParams b = hjb::init_params(123);
    const NetworkParams c = hjb::init_params(124);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(hjb::init_params(5, hjb::InitScheme::Zeros) == NetworkParams{});

    const double l1 = std::sqrt(6.0 / 12.0);
    const double l2 = std::sqrt(6.0 / 20.0);
    const double l3 = std::sqrt(6.0 / 11.0);
    CHECK(a.w1().cwiseAbs().maxCoeff() <= l1);
    CHECK(a.w2().cwiseAbs().maxCoeff() <= l2);
    CHECK(a.w3().cwiseAbs().maxCoeff() <= l3);
    CHECK(a.b1().isZero(0.0));
    CHECK(a.b2().isZero(0.0));
    CHECK(a.b3() == 0.0);
    CHECK(a.w2().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init scheme names") {
    CHECK(hjb::parse_init_scheme("glorot_uniform") == hjb::InitScheme::GlorotUniform);
    CHECK(hjb::parse_init_scheme("zeros") == hjb::InitScheme::Zeros);
    CHECK(hjb::to_string(hjb::InitScheme::Zeros) == "zeros");
    CHECK_THROWS_AS(hjb::parse_init_scheme("he_normal"), std::invalid_argument);
}

TEST_CASE("weight files round-trip bit-exactly") {
    std::mt19937_64 rng(42);
    hjb::WeightFile file{oracle::random_params(rng, 3.0), 987654321987654321ULL};
    file.params.flat()[7] = 0.1 + 0.2;
    file.params.flat()[8] = -1e-300;
    file.params.flat()[9] = 5e-324;

    const hjb::WeightFile back = hjb::weights_from_json(hjb::weights_to_json(file));
    CHECK(back.params == file.params);
    CHECK(back.seed == file.seed);

    const auto path = std::filesystem::temp_directory_path() / "hjb_test_weights" / "w.json";
    hjb::save_weights(path, file);
    CHECK(hjb::load_weights(path).params == file.params);
    std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("weight files reject malformed documents") {
    const std::string good = hjb::weights_to_json({NetworkParams{}, 1});
    CHECK_THROWS(hjb::weights_from_json("{not json"));
    nlohmann::json doc = nlohmann::json::parse(good);
    doc["architecture"] = {2, 10, 11, 1};
    CHECK_THROWS(hjb::weights_from_json(doc.dump()));
    doc = nlohmann::json::parse(good);
    doc["layers"]["W2"].erase(0);
    CHECK_THROWS(hjb::weights_from_json(doc.dump()));
    doc = nlohmann::json::parse(good);
    doc["format_version"] = 99;
    CHECK_THROWS(hjb::weights_from_json(doc.dump()));
    CHECK_THROWS(hjb::load_weights("/nonexistent/dir/w.json"));
}

TEST_CASE("parameter arithmetic") {
    NetworkParams a;
    a.flat()[0] = 1.0;
    a.b3() = 2.0;
    NetworkParams b = a;
    b += a;
    b *= 0.5;
    CHECK(b == a);
    CHECK(a.all_finite());
    a.flat()[4] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(a.all_finite());
}

}
