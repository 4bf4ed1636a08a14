#include "hjb/system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace hjb {

AffineSystem::AffineSystem(std::string name, int state_dim, int control_dim, DriftFn drift,
                           InputFn input, StateCostFn state_cost, Mat control_weight,
                           std::optional<AnalyticSolution> analytic)
    : name_(std::move(name)), n_(state_dim), m_(control_dim), drift_(std::move(drift)),
      input_(std::move(input)), state_cost_(std::move(state_cost)), r_(std::move(control_weight)),
      analytic_(std::move(analytic)) {
    if (n_ < 1 || n_ > kMaxDim || m_ < 1 || m_ > kMaxDim) {
        throw std::invalid_argument("system dimensions out of range");
    }
    if (r_.rows() != m_ || r_.cols() != m_) {
        throw std::invalid_argument("R must be m x m");
    }
    if ((r_ - r_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, r_.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("R must be symmetric");
    }
    Eigen::LLT<Mat> llt(r_);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("R must be positive definite");
    }
    r_inv_ = llt.solve(Mat::Identity(m_, m_));
    if (state_cost_(Vec::Zero(n_)) != 0.0) {
        throw std::invalid_argument("state cost must vanish at the origin");
    }
}

void AffineSystem::check_state(const Vec& x) const {
    if (x.size() != n_) {
        throw std::invalid_argument("state dimension mismatch: expected " + std::to_string(n_) +
                                    ", got " + std::to_string(x.size()));
    }
}

void AffineSystem::check_control(const Vec& u) const {
    if (u.size() != m_) {
        throw std::invalid_argument("control dimension mismatch: expected " + std::to_string(m_) +
                                    ", got " + std::to_string(u.size()));
    }
}

Vec AffineSystem::drift(const Vec& x) const {
    check_state(x);
    return drift_(x);
}

Mat AffineSystem::input_matrix(const Vec& x) const {
    check_state(x);
    return input_(x);
}

double AffineSystem::state_cost(const Vec& x) const {
    check_state(x);
    return state_cost_(x);
}

Vec AffineSystem::dynamics(const Vec& x, const Vec& u) const {
    check_state(x);
    check_control(u);
    return drift_(x) + input_(x) * u;
}

double AffineSystem::running_cost(const Vec& x, const Vec& u) const {
    check_state(x);
    check_control(u);
    return state_cost_(x) + u.dot(r_ * u);
}

Vec AffineSystem::control_from_costate(const Vec& x, const Vec& lambda) const {
    check_state(x);
    check_state(lambda);
    return -0.5 * (r_inv_ * (input_(x).transpose() * lambda));
}

double AffineSystem::hamiltonian(const Vec& x, const Vec& u, const Vec& lambda) const {
    check_state(lambda);
    return running_cost(x, u) + lambda.dot(drift_(x) + input_(x) * u);
}

double AffineSystem::hjb_residual(const Vec& x, const Vec& lambda) const {
    return hamiltonian(x, control_from_costate(x, lambda), lambda);
}

const AnalyticSolution& AffineSystem::analytic() const {
    if (!analytic_) {
        throw std::logic_error("system '" + name_ + "' has no analytic solution");
    }
    return *analytic_;
}

double AffineSystem::analytic_value(const Vec& x) const {
    check_state(x);
    return analytic().value(x);
}

Vec AffineSystem::analytic_costate(const Vec& x) const {
    check_state(x);
    return analytic().costate(x);
}

Vec AffineSystem::analytic_control(const Vec& x) const {
    return control_from_costate(x, analytic_costate(x));
}

double dierks_b(const Vec& x) { return std::cos(2.0 * x[0]) + 2.0; }

AffineSystem make_dierks_system() {
    auto drift = [](const Vec& x) {
        const double b = dierks_b(x);
        Vec f(2);
        f << -x[0] + x[1], -0.5 * (x[0] + x[1] * (1.0 - b * b));
        return f;
    };
    auto input = [](const Vec& x) {
        Mat g(2, 1);
        g << 0.0, dierks_b(x);
        return g;
    };
    auto state_cost = [](const Vec& x) { return x[0] * x[0] + x[1] * x[1]; };
    AnalyticSolution solution{
        [](const Vec& x) { return 0.5 * x[0] * x[0] + x[1] * x[1]; },
        [](const Vec& x) {
            Vec lambda(2);
            lambda << x[0], 2.0 * x[1];
            return lambda;
        },
    };
    return AffineSystem("dierks", 2, 1, drift, input, state_cost, Mat::Identity(1, 1), solution);
}

AffineSystem make_system(const std::string& name) {
    if (name == "dierks") {
        return make_dierks_system();
    }
    throw std::invalid_argument("unknown system: " + name);
}

} // namespace hjb
