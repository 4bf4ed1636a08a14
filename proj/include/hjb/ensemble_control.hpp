#pragma once

#include "hjb/system.hpp"
#include "hjb/value_net.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hjb {

struct Ensemble {
    std::vector<NetworkParams> members;

    Ensemble() = default;
    /// Throws std::invalid_argument when `members` is empty.
    explicit Ensemble(std::vector<NetworkParams> members);

    std::size_t size() const { return members.size(); }
};

enum class Policy { Individual, MeanInclusive, MeanOutlierExcluding, Analytic, Zero };

Policy parse_policy(std::string_view name);
std::string_view to_string(Policy policy);
bool uses_networks(Policy policy);

/// forward -> costate -> minimizing control.
Vec member_control(const NetworkParams& params, const AffineSystem& sys, const Vec& x);

/// Result of one closed-loop Euler step over all members. Controls of inactive
/// members are zero and their states are returned unchanged.
struct PolicyStep {
    std::vector<Vec> states;
    std::vector<Vec> controls;
    std::vector<bool> outliers;
};

/// Members with `active[j] == false` (diverged) are frozen and excluded from
/// every mean. An empty `active` means all members are active.
PolicyStep individual_policy_step(const Ensemble& ensemble, const AffineSystem& sys,
                                  const std::vector<Vec>& states, double dt,
                                  const std::vector<bool>& active = {});

/// Every active member is stepped with the mean of the members' own controls.
PolicyStep mean_policy_step(const Ensemble& ensemble, const AffineSystem& sys,
                            const std::vector<Vec>& states, double dt,
                            const std::vector<bool>& active = {});

struct OutlierStats {
    Vec mean;
    Eigen::MatrixXd covariance; // unbiased, before regularization
    bool regularized = false;
    std::vector<double> mahalanobis_sq;
    std::vector<double> densities;
    double threshold = 0.0; // 1 / (2N)
    std::vector<bool> flags;
};

inline constexpr double kCovarianceJitter = 1e-9;

/// Multivariate Chauvenet test: flag j iff the Gaussian density of state j
/// under the sample mean/covariance is below 1/(2N). Singular covariances get
/// kCovarianceJitter on the diagonal; if all densities are equal nothing is
/// flagged. Throws std::invalid_argument for fewer than two states.
OutlierStats chauvenet_flags(const std::vector<Vec>& states);

/// Inliers share the inlier mean control, flagged members use their own
/// control, and if every member is flagged all are stepped individually.
PolicyStep outlier_policy_step(const Ensemble& ensemble, const AffineSystem& sys,
                               const std::vector<Vec>& states, double dt,
                               const std::vector<bool>& active = {});

struct SimConfig {
    double t0 = 0.0;
    double tf = 20.0;
    double dt = 0.01;
    double noise_sigma = 0.01;
    Vec ic_nominal = Vec::Constant(2, 10.0);
    double ic_perturb_sigma = 0.01;
    Policy policy = Policy::MeanOutlierExcluding;
    std::uint64_t seed = 0;
    /// Member count for the analytic/zero reference policies.
    std::size_t reference_members = 20;
    double divergence_bound = 1e6;

    void validate() const;
    /// Number of Euler steps, round((tf - t0) / dt).
    std::size_t step_count() const;
};

struct SimRun {
    Policy policy = Policy::Zero;
    std::uint64_t seed = 0;
    std::vector<double> times;                 // steps + 1 entries
    std::vector<std::vector<Vec>> states;      // [member][k], k = 0..steps
    std::vector<std::vector<Vec>> controls;    // [member][k], k = 0..steps-1
    std::vector<std::vector<bool>> outliers;   // [k][member]
    std::vector<bool> diverged;                // per member, at the end of the run
    bool terminated_early = false;

    std::size_t members() const { return states.size(); }
};

/// Closed-loop ensemble simulation. Each step: add N(0, noise_sigma^2) to
/// every member state, compute controls from the perturbed states per policy,
/// Euler step. Noise draws are addressed by (seed, member, step, component).
SimRun simulate(const Ensemble& ensemble, const AffineSystem& sys, const SimConfig& cfg);

inline constexpr std::string_view kSimRunHeader = "t,member,x1,x2,u,is_outlier,policy";

/// One row per (member, time); the final time has u = nan.
std::string simrun_to_csv(const SimRun& run);
void save_simrun(const std::filesystem::path& path, const SimRun& run);

} // namespace hjb
