#include "hjb/integrators.hpp"

#include "hjb/csv.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hjb {

namespace {

// Tsitouras 5(4) pair, FSAL. Fields are autonomous so the stage nodes
// (0.161, 0.327, 0.9, 0.9800255409045097, 1, 1) are not needed.
constexpr double a21 = 0.161;
constexpr double a31 = -0.008480655492356989;
constexpr double a32 = 0.335480655492357;
constexpr double a41 = 2.897153057105493;
constexpr double a42 = -6.359448489975075;
constexpr double a43 = 4.3622954328695815;
constexpr double a51 = 5.325864828439257;
constexpr double a52 = -11.748883564062828;
constexpr double a53 = 7.4955393428898365;
constexpr double a54 = -0.09249506636175525;
constexpr double a61 = 5.86145544294642;
constexpr double a62 = -12.92096931784711;
constexpr double a63 = 8.159367898576159;
constexpr double a64 = -0.071584973281401;
constexpr double a65 = -0.028269050394068383;
// 5th order weights; also the last row of the tableau.
constexpr double a71 = 0.09646076681806523;
constexpr double a72 = 0.01;
constexpr double a73 = 0.4798896504144996;
constexpr double a74 = 1.379008574103742;
constexpr double a75 = -3.290069515436081;
constexpr double a76 = 2.324710524099774;

// Difference between the 5th and embedded 4th order weights.
constexpr std::array<double, 7> kErrorWeights = {
    -0.00178001105222577714, -0.0008164344596567469, 0.007880878010261995, -0.1447110071732629,
    0.5823571654525552,      -0.45808210592918697,   0.015151515151515152,
};

} // namespace

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) {
        throw std::invalid_argument("integrator: rtol and atol must be > 0");
    }
    if (max_steps <= 0) {
        throw std::invalid_argument("integrator: max_steps must be > 0");
    }
    if (!(safety_factor > 0.0 && safety_factor <= 1.0) || !(min_growth > 0.0 && min_growth < 1.0) ||
        !(max_growth > 1.0)) {
        throw std::invalid_argument("integrator: invalid step controller settings");
    }
    if (initial_step < 0.0) {
        throw std::invalid_argument("integrator: initial_step must be >= 0");
    }
}

Trajectory tsit5_integrate(const VectorField& field, const Vec& x0, double t0, double tf,
                           const IntegratorConfig& cfg) {
    cfg.validate();
    if (!(tf > t0)) {
        throw std::invalid_argument("integrator: tf must be > t0");
    }
    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(x0);

    double t = t0;
    Vec x = x0;
    double h = cfg.initial_step > 0.0 ? cfg.initial_step : 1e-4 * (tf - t0);
    Vec k1 = field(x);
    long steps = 0;

    while (t < tf) {
        if (steps++ >= cfg.max_steps) {
            throw IntegrationError("integrator: step count exceeded", t, traj);
        }
        const bool last = t + h >= tf;
        if (last) {
            h = tf - t;
        }
        if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
            throw IntegrationError("integrator: step size underflow", t, traj);
        }
        const Vec k2 = field(x + h * (a21 * k1));
        const Vec k3 = field(x + h * (a31 * k1 + a32 * k2));
        const Vec k4 = field(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = field(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = field(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec x_new =
            x + h * (a71 * k1 + a72 * k2 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        const Vec k7 = field(x_new);

        const Vec err = h * (kErrorWeights[0] * k1 + kErrorWeights[1] * k2 + kErrorWeights[2] * k3 +
                             kErrorWeights[3] * k4 + kErrorWeights[4] * k5 + kErrorWeights[5] * k6 +
                             kErrorWeights[6] * k7);
        double err_norm = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double scale = cfg.atol + cfg.rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            err_norm = std::max(err_norm, std::abs(err[i]) / scale);
        }
        if (!std::isfinite(err_norm)) {
            h *= cfg.min_growth;
            continue;
        }

        const double growth =
            err_norm == 0.0
                ? cfg.max_growth
                : std::clamp(cfg.safety_factor * std::pow(err_norm, -0.2), cfg.min_growth, cfg.max_growth);
        if (err_norm <= 1.0) {
            t = last ? tf : t + h;
            x = x_new;
            k1 = k7;
            traj.times.push_back(t);
            traj.states.push_back(x);
        }
        h *= growth;
    }
    return traj;
}

Vec euler_step(const AffineSystem& sys, const Vec& x, const Vec& u, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("euler_step: dt must be > 0");
    }
    return x + dt * sys.dynamics(x, u);
}

VectorField analytic_closed_loop(const AffineSystem& sys) {
    return [&sys](const Vec& x) { return sys.dynamics(x, sys.analytic_control(x)); };
}

std::string trajectory_to_csv(const Trajectory& traj) {
    if (traj.states.size() != traj.times.size() ||
        (!traj.controls.empty() && traj.controls.size() != traj.times.size())) {
        throw std::invalid_argument("trajectory: misaligned arrays");
    }
    std::string out = "t";
    const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
    const Eigen::Index m = traj.controls.empty() ? 0 : traj.controls.front().size();
    for (Eigen::Index i = 0; i < n; ++i) {
        out += ",x" + std::to_string(i + 1);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        out += m == 1 ? std::string(",u") : ",u" + std::to_string(i + 1);
    }
    out += '\n';
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out += format_double(traj.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) {
            out += ',' + format_double(traj.states[k][i]);
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            out += ',' + format_double(traj.controls[k][i]);
        }
        out += '\n';
    }
    return out;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    write_text_file(path, trajectory_to_csv(traj));
}

} // namespace hjb
