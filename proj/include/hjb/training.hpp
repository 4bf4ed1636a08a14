#pragma once

#include "hjb/dataset.hpp"
#include "hjb/rng.hpp"
#include "hjb/system.hpp"
#include "hjb/value_net.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

// ---------------------------------------------------------------------------
// Optimizer and schedules

struct AdamWState {
    NetworkParams first_moment;
    NetworkParams second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    double lr = 1e-3;

    void validate() const;
};

/// Decoupled weight decay (theta *= 1 - lr * wd) followed by a bias-corrected
/// Adam step. Throws NonFiniteError if a gradient entry is NaN/Inf.
void adamw_step(NetworkParams& params, const NetworkParams& grads, AdamWState& opt);

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Triangular cyclic learning rate, counted in optimizer steps.
struct CyclicSchedule {
    double lr_min = 1e-5;
    double lr_max = 1e-4;
    long step_size = 20;

    void validate() const;
};

double cyclic_lr(long step, const CyclicSchedule& sched);

/// Reduce-on-plateau: after more than `patience` epochs without a relative
/// improvement of `threshold`, the learning rate is multiplied by `factor`.
struct PlateauSchedule {
    double factor = 0.1;
    int patience = 2;
    double threshold = 1e-8;
    double min_lr = 1e-8;
    double current_lr = 1e-2;
    double best_loss = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    void validate() const;
};

/// Feeds one epoch loss; returns the learning rate for the next epoch.
double plateau_step(double epoch_loss, PlateauSchedule& sched);

// ---------------------------------------------------------------------------
// Batches and losses

using Batch = std::vector<GridRecord>;

/// `n` records drawn uniformly with replacement from the dataset (or from its
/// boundary subset). Throws std::invalid_argument on an empty subset.
Batch sample_batch(const GridDataset& dataset, std::size_t n, bool boundary_only, Rng& rng);

struct LossAndGrad {
    double loss = 0.0;
    NetworkParams grads;
};

/// (1/n) sum (J(x_k) - J*(x_k))^2 and its parameter gradient.
LossAndGrad mse_loss_and_grad(const NetworkParams& params, std::span<const GridRecord> batch);

/// How the HJB residual gradient treats u_hat = -1/2 R^-1 f2' grad_x J.
enum class ControlGradient {
    Full,   // u_hat differentiated as a function of theta
    Frozen, // u_hat held constant within the step
};

struct HjbLoss {
    double boundary = 0.0; // sum over boundary batch of (J - J*)^2
    double hjb = 0.0;      // sum over mixed batch of r^2, unweighted
    double total = 0.0;    // boundary + alpha * hjb
    NetworkParams grads;
};

/// Residual r(x) = q(x) + u'Ru + grad_x J . (f1(x) + f2(x) u) with u the
/// minimizing control for the network costate.
double hjb_residual_of(const NetworkParams& params, const AffineSystem& sys, const NetInput& x);

/// Composite boundary + alpha * HJB-residual loss. The batches must have equal
/// size. Throws NonFiniteError naming the first sample whose term is not finite.
HjbLoss hjb_loss_and_grad(const NetworkParams& params, std::span<const GridRecord> mixed,
                          std::span<const GridRecord> boundary, const AffineSystem& sys, double alpha,
                          ControlGradient mode = ControlGradient::Full);

// ---------------------------------------------------------------------------
// Training procedures

struct WarmStartConfig {
    int epochs = 100;
    std::size_t batch_size = 100;
    double lr = 1e-2;
    double epsilon = 1e-4;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double plateau_factor = 0.1;
    int plateau_patience = 2;
    double plateau_threshold = 1e-8;
    double min_lr = 1e-8;
    InitScheme init = InitScheme::GlorotUniform;
    std::uint64_t seed = 0;

    void validate() const;
};

struct WarmStartEpoch {
    double loss = 0.0;
    double lr = 0.0;
};

struct WarmStartResult {
    NetworkParams params;
    std::uint64_t init_seed = 0;
    std::vector<WarmStartEpoch> history;
};

struct HjbConfig {
    int epochs = 60;
    std::size_t batch_size = 400;
    double alpha = 1.0;
    double epsilon = 1e-8;
    double weight_decay = 1e-7;
    double beta1 = 0.9;
    double beta2 = 0.999;
    CyclicSchedule cyclic;
    ControlGradient control_gradient = ControlGradient::Full;
    /// Stop after an epoch whose mean total loss is below this; <= 0 disables.
    double stop_below = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct HjbEpoch {
    double boundary = 0.0;
    double hjb = 0.0;
    double total = 0.0;
};

struct HjbResult {
    NetworkParams params;
    std::vector<HjbEpoch> history;
};

/// Raised when a training loss turns non-finite; carries the history so far.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::vector<double> totals)
        : std::runtime_error(what), totals_(std::move(totals)) {}
    const std::vector<double>& totals() const { return totals_; }

private:
    std::vector<double> totals_;
};

/// Number of optimizer steps in one epoch: dataset size / batch size (>= 1).
std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

/// MSE fit of freshly initialized parameters to the dataset labels.
WarmStartResult train_warm_start(const GridDataset& dataset, const WarmStartConfig& cfg);

/// Refines `initial` with the boundary + HJB residual loss. Each step draws a
/// mixed batch and a boundary-only batch from Rng(cfg.seed).
HjbResult train_hjb(const NetworkParams& initial, const GridDataset& dataset, const AffineSystem& sys,
                    const HjbConfig& cfg);

struct MemberOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    NetworkParams params;
    std::vector<HjbEpoch> history;
};

struct EnsembleTraining {
    std::vector<MemberOutcome> members;
    /// Per-epoch mean of member losses over members that completed.
    std::vector<HjbEpoch> ensemble_curve;

    std::vector<NetworkParams> successful_params() const;
};

/// Trains `n` copies of `base` independently with seeds derive_seed(cfg.seed, j).
/// Diverged members are recorded and skipped; `threads` <= 0 uses hardware
/// concurrency. Results do not depend on the thread count.
EnsembleTraining train_ensemble(const GridDataset& dataset, const AffineSystem& sys, const HjbConfig& cfg,
                                std::size_t n, const NetworkParams& base, int threads = 0);

} // namespace hjb
