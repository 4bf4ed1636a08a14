#pragma once

#include "hjb/system.hpp"

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

struct IntegratorConfig {
    double rtol = 1e-7;
    double atol = 1e-6;
    /// 0 selects 1e-4 * (tf - t0).
    double initial_step = 0.0;
    long max_steps = 1'000'000;
    double safety_factor = 0.9;
    double min_growth = 0.2;
    double max_growth = 5.0;

    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    /// Either empty or aligned with `times`.
    std::vector<Vec> controls;

    std::size_t size() const { return times.size(); }
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double last_time, Trajectory partial)
        : std::runtime_error(what), last_time_(last_time), partial_(std::move(partial)) {}

    double last_time() const { return last_time_; }
    const Trajectory& partial() const { return partial_; }

private:
    double last_time_;
    Trajectory partial_;
};

using VectorField = std::function<Vec(const Vec&)>;

/// Adaptive Tsitouras 5(4) integration of an autonomous field. Every accepted
/// step is recorded; the local error estimate of each satisfies
/// |err_i| <= atol + rtol * max(|x_i|, |x_new_i|).
Trajectory tsit5_integrate(const VectorField& field, const Vec& x0, double t0, double tf,
                           const IntegratorConfig& cfg = {});

/// x + dt * (f1(x) + f2(x) u)
Vec euler_step(const AffineSystem& sys, const Vec& x, const Vec& u, double dt);

/// Closed-loop field x -> f1(x) + f2(x) u*(x) under the analytic control.
VectorField analytic_closed_loop(const AffineSystem& sys);

/// `t,x1,...,xn[,u1..um]` rows. Column names are x1.., u (m=1) or u1.. (m>1).
std::string trajectory_to_csv(const Trajectory& traj);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);

} // namespace hjb
