#include "hjb/ensemble_control.hpp"

#include "hjb/csv.hpp"
#include "hjb/integrators.hpp"
#include "hjb/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace hjb {

Ensemble::Ensemble(std::vector<NetworkParams> m) : members(std::move(m)) {
    if (members.empty()) {
        throw std::invalid_argument("ensemble must have at least one member");
    }
}

Policy parse_policy(std::string_view name) {
    if (name == "individual") return Policy::Individual;
    if (name == "mean_inclusive") return Policy::MeanInclusive;
    if (name == "mean_outlier_excluding") return Policy::MeanOutlierExcluding;
    if (name == "analytic") return Policy::Analytic;
    if (name == "zero") return Policy::Zero;
    throw std::invalid_argument("unknown policy: " + std::string(name));
}

std::string_view to_string(Policy policy) {
    switch (policy) {
    case Policy::Individual:
        return "individual";
    case Policy::MeanInclusive:
        return "mean_inclusive";
    case Policy::MeanOutlierExcluding:
        return "mean_outlier_excluding";
    case Policy::Analytic:
        return "analytic";
    case Policy::Zero:
        return "zero";
    }
    return "unknown";
}

bool uses_networks(Policy policy) {
    return policy == Policy::Individual || policy == Policy::MeanInclusive ||
           policy == Policy::MeanOutlierExcluding;
}

Vec member_control(const NetworkParams& params, const AffineSystem& sys, const Vec& x) {
    if (x.size() != kInputDim) {
        throw std::invalid_argument("member_control: state must be 2-dimensional");
    }
    const NetInput xin = x.head<2>();
    ForwardTape tape;
    forward(params, xin, tape);
    const Vec lambda = costate(params, tape);
    return sys.control_from_costate(x, lambda);
}

namespace {

enum class Aggregation { Individual, Mean, OutlierExcluding };

using OwnControl = std::function<Vec(std::size_t, const Vec&)>;

bool is_active(const std::vector<bool>& active, std::size_t j) { return active.empty() || active[j]; }

Vec mean_of(const std::vector<Vec>& controls, const std::vector<std::size_t>& members) {
    Vec sum = Vec::Zero(controls[members.front()].size());
    for (std::size_t j : members) {
        sum += controls[j];
    }
    return sum / static_cast<double>(members.size());
}

PolicyStep aggregate_step(const AffineSystem& sys, const std::vector<Vec>& states, double dt,
                          const std::vector<bool>& active, const OwnControl& own, Aggregation mode) {
    const std::size_t n = states.size();
    if (!active.empty() && active.size() != n) {
        throw std::invalid_argument("policy step: active mask size mismatch");
    }
    PolicyStep out;
    out.states = states;
    out.controls.assign(n, Vec::Zero(sys.control_dim()));
    out.outliers.assign(n, false);

    std::vector<std::size_t> live;
    for (std::size_t j = 0; j < n; ++j) {
        if (is_active(active, j)) {
            live.push_back(j);
            out.controls[j] = own(j, states[j]);
        }
    }
    if (live.empty()) {
        return out;
    }

    std::vector<std::size_t> shared; // members that receive the shared mean control
    if (mode == Aggregation::Mean) {
        shared = live;
    } else if (mode == Aggregation::OutlierExcluding && live.size() >= 2) {
        std::vector<Vec> live_states;
        for (std::size_t j : live) {
            live_states.push_back(states[j]);
        }
        const OutlierStats stats = chauvenet_flags(live_states);
        for (std::size_t k = 0; k < live.size(); ++k) {
            if (stats.flags[k]) {
                out.outliers[live[k]] = true;
            } else {
                shared.push_back(live[k]);
            }
        }
    }
    if (!shared.empty()) {
        const Vec u_bar = mean_of(out.controls, shared);
        for (std::size_t j : shared) {
            out.controls[j] = u_bar;
        }
    }
    for (std::size_t j : live) {
        out.states[j] = euler_step(sys, states[j], out.controls[j], dt);
    }
    return out;
}

OwnControl network_controls(const Ensemble& ensemble, const AffineSystem& sys, std::size_t n) {
    if (ensemble.size() != n) {
        throw std::invalid_argument("policy step: expected " + std::to_string(ensemble.size()) + " states, got " +
                                    std::to_string(n));
    }
    return [&ensemble, &sys](std::size_t j, const Vec& x) { return member_control(ensemble.members[j], sys, x); };
}

} // namespace

PolicyStep individual_policy_step(const Ensemble& ensemble, const AffineSystem& sys,
                                  const std::vector<Vec>& states, double dt, const std::vector<bool>& active) {
    return aggregate_step(sys, states, dt, active, network_controls(ensemble, sys, states.size()),
                          Aggregation::Individual);
}

PolicyStep mean_policy_step(const Ensemble& ensemble, const AffineSystem& sys, const std::vector<Vec>& states,
                            double dt, const std::vector<bool>& active) {
    return aggregate_step(sys, states, dt, active, network_controls(ensemble, sys, states.size()),
                          Aggregation::Mean);
}

PolicyStep outlier_policy_step(const Ensemble& ensemble, const AffineSystem& sys,
                               const std::vector<Vec>& states, double dt, const std::vector<bool>& active) {
    return aggregate_step(sys, states, dt, active, network_controls(ensemble, sys, states.size()),
                          Aggregation::OutlierExcluding);
}

OutlierStats chauvenet_flags(const std::vector<Vec>& states) {
    const std::size_t n_states = states.size();
    if (n_states < 2) {
        throw std::invalid_argument("chauvenet: need at least two states");
    }
    const Eigen::Index dim = states.front().size();
    OutlierStats stats;
    stats.mean = Vec::Zero(dim);
    for (const Vec& x : states) {
        if (x.size() != dim) {
            throw std::invalid_argument("chauvenet: state dimension mismatch");
        }
        stats.mean += x;
    }
    stats.mean /= static_cast<double>(n_states);

    stats.covariance = Eigen::MatrixXd::Zero(dim, dim);
    for (const Vec& x : states) {
        const Eigen::VectorXd d = x - stats.mean;
        stats.covariance += d * d.transpose();
    }
    stats.covariance /= static_cast<double>(n_states - 1);

    Eigen::MatrixXd sigma = stats.covariance;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(min_ev > 1e-12 * max_ev) || !(min_ev > 0.0)) {
        sigma += kCovarianceJitter * Eigen::MatrixXd::Identity(dim, dim);
        stats.regularized = true;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sigma);
    const double det = lu.determinant();
    const double norm = std::pow(2.0 * std::numbers::pi, static_cast<double>(dim) / 2.0) * std::sqrt(det);

    stats.threshold = 1.0 / (2.0 * static_cast<double>(n_states));
    for (const Vec& x : states) {
        const Eigen::VectorXd d = x - stats.mean;
        const double m2 = d.dot(lu.solve(d));
        stats.mahalanobis_sq.push_back(m2);
        stats.densities.push_back(std::exp(-0.5 * m2) / norm);
    }

    const auto [lo, hi] = std::minmax_element(stats.densities.begin(), stats.densities.end());
    const bool all_equal = *hi - *lo <= 1e-12 * std::abs(*hi);
    stats.flags.assign(n_states, false);
    if (!all_equal) {
        for (std::size_t j = 0; j < n_states; ++j) {
            stats.flags[j] = stats.densities[j] < stats.threshold;
        }
    }
    return stats;
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("simulate: dt must be > 0");
    }
    if (!(tf > t0)) {
        throw std::invalid_argument("simulate: tf must be > t0");
    }
    if (!(noise_sigma >= 0.0) || !(ic_perturb_sigma >= 0.0)) {
        throw std::invalid_argument("simulate: sigmas must be >= 0");
    }
    if (!(divergence_bound > 0.0)) {
        throw std::invalid_argument("simulate: divergence bound must be > 0");
    }
}

std::size_t SimConfig::step_count() const {
    return static_cast<std::size_t>(std::llround((tf - t0) / dt));
}

namespace {

constexpr std::uint64_t kIcStream = 0x1c;
constexpr std::uint64_t kNoiseStream = 0x5e;

bool diverged_state(const Vec& x, double bound) {
    return !x.allFinite() || x.cwiseAbs().maxCoeff() > bound;
}

} // namespace

SimRun simulate(const Ensemble& ensemble, const AffineSystem& sys, const SimConfig& cfg) {
    cfg.validate();
    if (cfg.ic_nominal.size() != sys.state_dim()) {
        throw std::invalid_argument("simulate: initial condition dimension mismatch");
    }
    const bool networked = uses_networks(cfg.policy);
    if (networked && ensemble.size() == 0) {
        throw std::invalid_argument("simulate: policy " + std::string(to_string(cfg.policy)) + " needs an ensemble");
    }
    const std::size_t n = networked || ensemble.size() > 0 ? ensemble.size() : cfg.reference_members;
    if (n == 0) {
        throw std::invalid_argument("simulate: no members");
    }
    if (cfg.policy == Policy::MeanOutlierExcluding && n < 2) {
        throw std::invalid_argument("simulate: outlier policy needs at least two members");
    }

    OwnControl own;
    Aggregation mode = Aggregation::Individual;
    switch (cfg.policy) {
    case Policy::Individual:
        own = network_controls(ensemble, sys, n);
        break;
    case Policy::MeanInclusive:
        own = network_controls(ensemble, sys, n);
        mode = Aggregation::Mean;
        break;
    case Policy::MeanOutlierExcluding:
        own = network_controls(ensemble, sys, n);
        mode = Aggregation::OutlierExcluding;
        break;
    case Policy::Analytic:
        own = [&sys](std::size_t, const Vec& x) { return sys.analytic_control(x); };
        break;
    case Policy::Zero:
        own = [&sys](std::size_t, const Vec&) { return Vec::Zero(sys.control_dim()).eval(); };
        break;
    }

    const std::size_t steps = cfg.step_count();
    const Eigen::Index dim = sys.state_dim();
    SimRun run;
    run.policy = cfg.policy;
    run.seed = cfg.seed;
    run.states.assign(n, {});
    run.controls.assign(n, {});
    run.diverged.assign(n, false);
    run.times.push_back(cfg.t0);

    std::vector<Vec> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = cfg.ic_nominal;
        for (Eigen::Index c = 0; c < dim; ++c) {
            x[j][c] += cfg.ic_perturb_sigma * counter_normal(cfg.seed, kIcStream, j, 0, static_cast<std::uint64_t>(c));
        }
    }
    std::vector<bool> active(n, true);

    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!active[j] || cfg.noise_sigma == 0.0) {
                continue;
            }
            for (Eigen::Index c = 0; c < dim; ++c) {
                x[j][c] += cfg.noise_sigma * counter_normal(cfg.seed, kNoiseStream, j, k, static_cast<std::uint64_t>(c));
            }
        }
        PolicyStep step = aggregate_step(sys, x, cfg.dt, active, own, mode);
        for (std::size_t j = 0; j < n; ++j) {
            run.states[j].push_back(x[j]);
            run.controls[j].push_back(step.controls[j]);
            if (active[j] && diverged_state(step.states[j], cfg.divergence_bound)) {
                active[j] = false;
                run.diverged[j] = true;
                step.states[j] = x[j];
            }
        }
        run.outliers.push_back(step.outliers);
        run.times.push_back(cfg.t0 + static_cast<double>(k + 1) * cfg.dt);
        x = std::move(step.states);
        if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
            run.terminated_early = k + 1 < steps;
            break;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        run.states[j].push_back(x[j]);
    }
    return run;
}

std::string simrun_to_csv(const SimRun& run) {
    std::string out(kSimRunHeader);
    out += '\n';
    const std::string policy(to_string(run.policy));
    const std::size_t n = run.members();
    for (std::size_t k = 0; k < run.times.size(); ++k) {
        const std::string t = format_double(run.times[k]);
        const bool has_control = k < run.outliers.size();
        for (std::size_t j = 0; j < n; ++j) {
            const Vec& x = run.states[j][k];
            out += t;
            out += ',';
            out += std::to_string(j);
            out += ',';
            out += format_double(x[0]);
            out += ',';
            out += format_double(x.size() > 1 ? x[1] : 0.0);
            out += ',';
            out += has_control ? format_double(run.controls[j][k][0]) : std::string("nan");
            out += ',';
            out += has_control && run.outliers[k][j] ? '1' : '0';
            out += ',';
            out += policy;
            out += '\n';
        }
    }
    return out;
}

void save_simrun(const std::filesystem::path& path, const SimRun& run) { write_text_file(path, simrun_to_csv(run)); }

} // namespace hjb
