#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <functional>
#include <optional>
#include <string>

namespace hjb {

inline constexpr int kMaxDim = 8;

/// Small dynamically sized vector/matrix with inline storage.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Closed-form optimal solution supplied for a particular system.
struct AnalyticSolution {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> costate;
};

/// Control-affine system  x' = f1(x) + f2(x) u  with running cost q(x) + u'Ru.
class AffineSystem {
public:
    using DriftFn = std::function<Vec(const Vec&)>;
    using InputFn = std::function<Mat(const Vec&)>;
    using StateCostFn = std::function<double(const Vec&)>;

    /// Throws std::invalid_argument if R is not symmetric positive definite or
    /// q(0) != 0.
    AffineSystem(std::string name, int state_dim, int control_dim, DriftFn drift, InputFn input,
                 StateCostFn state_cost, Mat control_weight,
                 std::optional<AnalyticSolution> analytic = std::nullopt);

    const std::string& name() const { return name_; }
    int state_dim() const { return n_; }
    int control_dim() const { return m_; }
    const Mat& control_weight() const { return r_; }
    const Mat& control_weight_inverse() const { return r_inv_; }

    Vec drift(const Vec& x) const;
    Mat input_matrix(const Vec& x) const;
    double state_cost(const Vec& x) const;

    Vec dynamics(const Vec& x, const Vec& u) const;
    double running_cost(const Vec& x, const Vec& u) const;
    /// u = -1/2 R^-1 f2(x)' lambda
    Vec control_from_costate(const Vec& x, const Vec& lambda) const;
    double hamiltonian(const Vec& x, const Vec& u, const Vec& lambda) const;
    /// Hamiltonian minimized over u.
    double hjb_residual(const Vec& x, const Vec& lambda) const;

    bool has_analytic() const { return analytic_.has_value(); }
    /// The analytic_* accessors throw std::logic_error without a supplied solution.
    double analytic_value(const Vec& x) const;
    Vec analytic_costate(const Vec& x) const;
    Vec analytic_control(const Vec& x) const;

private:
    void check_state(const Vec& x) const;
    void check_control(const Vec& u) const;
    const AnalyticSolution& analytic() const;

    std::string name_;
    int n_;
    int m_;
    DriftFn drift_;
    InputFn input_;
    StateCostFn state_cost_;
    Mat r_;
    Mat r_inv_;
    std::optional<AnalyticSolution> analytic_;
};

/// b(x) = cos(2 x1) + 2
double dierks_b(const Vec& x);

/// Two-state benchmark with known value function J* = x1^2/2 + x2^2.
AffineSystem make_dierks_system();

AffineSystem make_system(const std::string& name);

} // namespace hjb
