#include "hjb/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace hjb {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSampleStream = 2;

AdamWState make_adamw(double beta1, double beta2, double epsilon, double weight_decay, double lr) {
    AdamWState opt;
    opt.beta1 = beta1;
    opt.beta2 = beta2;
    opt.epsilon = epsilon;
    opt.weight_decay = weight_decay;
    opt.lr = lr;
    return opt;
}

std::string describe_record(const GridRecord& r) {
    std::ostringstream os;
    os.precision(17);
    os << "[" << r.x[0] << ", " << r.x[1] << "]";
    return os.str();
}

} // namespace

void AdamWState::validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adamw: betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0) || !(lr >= 0.0) || !(weight_decay >= 0.0)) {
        throw std::invalid_argument("adamw: epsilon > 0, lr >= 0, weight_decay >= 0 required");
    }
}

void adamw_step(NetworkParams& params, const NetworkParams& grads, AdamWState& opt) {
    const auto g = grads.flat();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            std::ostringstream os;
            os << "adamw: non-finite gradient at parameter " << i << " (" << g[i] << ") on step "
               << opt.step_count + 1;
            throw NonFiniteError(os.str());
        }
    }
    ++opt.step_count;
    const double t = static_cast<double>(opt.step_count);
    const double bias1 = 1.0 - std::pow(opt.beta1, t);
    const double bias2 = 1.0 - std::pow(opt.beta2, t);
    const double decay = 1.0 - opt.lr * opt.weight_decay;

    auto p = params.flat();
    auto m = opt.first_moment.flat();
    auto v = opt.second_moment.flat();
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] *= decay;
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
}

void CyclicSchedule::validate() const {
    if (!(lr_min > 0.0) || !(lr_min < lr_max) || step_size <= 0) {
        throw std::invalid_argument("cyclic schedule: need 0 < lr_min < lr_max and step_size > 0");
    }
}

double cyclic_lr(long step, const CyclicSchedule& sched) {
    const long period = 2 * sched.step_size;
    const long phase = ((step % period) + period) % period;
    const long rise = phase <= sched.step_size ? phase : period - phase;
    const double frac = static_cast<double>(rise) / static_cast<double>(sched.step_size);
    return sched.lr_min + (sched.lr_max - sched.lr_min) * frac;
}

void PlateauSchedule::validate() const {
    if (!(factor > 0.0 && factor < 1.0) || patience < 0 || !(threshold >= 0.0) || !(min_lr >= 0.0) ||
        !(current_lr > 0.0)) {
        throw std::invalid_argument("plateau schedule: invalid settings");
    }
}

double plateau_step(double epoch_loss, PlateauSchedule& sched) {
    if (epoch_loss < sched.best_loss * (1.0 - sched.threshold)) {
        sched.best_loss = epoch_loss;
        sched.bad_epochs = 0;
    } else if (++sched.bad_epochs > sched.patience) {
        sched.current_lr = std::max(sched.current_lr * sched.factor, sched.min_lr);
        sched.bad_epochs = 0;
    }
    return sched.current_lr;
}

Batch sample_batch(const GridDataset& dataset, std::size_t n, bool boundary_only, Rng& rng) {
    const std::size_t pool = boundary_only ? dataset.boundary_indices.size() : dataset.size();
    Batch batch;
    if (n == 0) {
        return batch;
    }
    if (pool == 0) {
        throw std::invalid_argument(boundary_only ? "sample_batch: dataset has no boundary points"
                                                  : "sample_batch: dataset is empty");
    }
    batch.reserve(n);
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = pick(rng);
        batch.push_back(dataset.records[boundary_only ? dataset.boundary_indices[i] : i]);
    }
    return batch;
}

LossAndGrad mse_loss_and_grad(const NetworkParams& params, std::span<const GridRecord> batch) {
    LossAndGrad out;
    if (batch.empty()) {
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    ForwardTape tape;
    for (const GridRecord& rec : batch) {
        const double diff = forward(params, rec.x, tape) - rec.value;
        out.loss += diff * diff;
        backward(params, tape, Sensitivities{2.0 * diff * inv_n, NetInput::Zero()}, out.grads);
    }
    out.loss *= inv_n;
    return out;
}

namespace {

struct ResidualTerms {
    double residual = 0.0;
    NetInput d_costate = NetInput::Zero(); // dr / d lambda
};

ResidualTerms residual_terms(const AffineSystem& sys, const NetInput& x2, const NetInput& lambda2,
                             ControlGradient mode) {
    const Vec x = x2;
    const Vec lambda = lambda2;
    const Mat& r = sys.control_weight();
    const Vec u = sys.control_from_costate(x, lambda);
    const Vec f1 = sys.drift(x);
    const Mat f2 = sys.input_matrix(x);
    const Vec xdot = f1 + f2 * u;

    ResidualTerms out;
    out.residual = sys.state_cost(x) + u.dot(r * u) + lambda.dot(xdot);
    Vec grad = xdot;
    if (mode == ControlGradient::Full) {
        // Chain through u(lambda): du/dlambda = -1/2 R^-1 f2', and dr/du = 2Ru + f2' lambda.
        const Vec dr_du = 2.0 * (r * u) + f2.transpose() * lambda;
        grad += -0.5 * (f2 * (sys.control_weight_inverse() * dr_du));
    }
    out.d_costate = grad.head<2>();
    return out;
}

} // namespace

double hjb_residual_of(const NetworkParams& params, const AffineSystem& sys, const NetInput& x) {
    ForwardTape tape;
    forward(params, x, tape);
    return residual_terms(sys, x, costate(params, tape), ControlGradient::Frozen).residual;
}

HjbLoss hjb_loss_and_grad(const NetworkParams& params, std::span<const GridRecord> mixed,
                          std::span<const GridRecord> boundary, const AffineSystem& sys, double alpha,
                          ControlGradient mode) {
    if (mixed.size() != boundary.size()) {
        throw std::invalid_argument("hjb loss: mixed and boundary batches must have equal size");
    }
    if (sys.state_dim() != kInputDim) {
        throw std::invalid_argument("hjb loss: system state dimension must match the network input");
    }
    HjbLoss out;
    ForwardTape tape;
    for (const GridRecord& rec : boundary) {
        const double diff = forward(params, rec.x, tape) - rec.value;
        if (!std::isfinite(diff)) {
            throw NonFiniteError("hjb loss: non-finite boundary term at x = " + describe_record(rec));
        }
        out.boundary += diff * diff;
        backward(params, tape, Sensitivities{2.0 * diff, NetInput::Zero()}, out.grads);
    }
    for (const GridRecord& rec : mixed) {
        forward(params, rec.x, tape);
        const ResidualTerms terms = residual_terms(sys, rec.x, costate(params, tape), mode);
        if (!std::isfinite(terms.residual)) {
            throw NonFiniteError("hjb loss: non-finite residual at x = " + describe_record(rec));
        }
        out.hjb += terms.residual * terms.residual;
        backward(params, tape, Sensitivities{0.0, 2.0 * alpha * terms.residual * terms.d_costate}, out.grads);
    }
    out.total = out.boundary + alpha * out.hjb;
    return out;
}

void WarmStartConfig::validate() const {
    if (epochs < 0 || batch_size == 0) {
        throw std::invalid_argument("warm start: epochs >= 0 and batch_size > 0 required");
    }
    make_adamw(beta1, beta2, epsilon, weight_decay, lr).validate();
    PlateauSchedule{.factor = plateau_factor,
                    .patience = plateau_patience,
                    .threshold = plateau_threshold,
                    .min_lr = min_lr,
                    .current_lr = lr}
        .validate();
}

void HjbConfig::validate() const {
    if (epochs < 0 || batch_size == 0) {
        throw std::invalid_argument("hjb: epochs >= 0 and batch_size > 0 required");
    }
    if (!(alpha >= 0.0)) {
        throw std::invalid_argument("hjb: alpha must be >= 0");
    }
    make_adamw(beta1, beta2, epsilon, weight_decay, 0.0).validate();
    cyclic.validate();
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
    return std::max<std::size_t>(1, dataset_size / batch_size);
}

WarmStartResult train_warm_start(const GridDataset& dataset, const WarmStartConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("warm start: dataset is empty");
    }
    WarmStartResult result;
    result.init_seed = derive_seed(cfg.seed, kInitStream);
    result.params = init_params(result.init_seed, cfg.init);
    Rng rng(derive_seed(cfg.seed, kSampleStream));

    AdamWState opt = make_adamw(cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay, cfg.lr);
    PlateauSchedule plateau{.factor = cfg.plateau_factor,
                            .patience = cfg.plateau_patience,
                            .threshold = cfg.plateau_threshold,
                            .min_lr = cfg.min_lr,
                            .current_lr = cfg.lr};
    const std::size_t steps = steps_per_epoch(dataset.size(), cfg.batch_size);
    std::vector<double> totals;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double sum = 0.0;
        const double lr = plateau.current_lr;
        opt.lr = lr;
        for (std::size_t s = 0; s < steps; ++s) {
            const Batch batch = sample_batch(dataset, cfg.batch_size, false, rng);
            const LossAndGrad lg = mse_loss_and_grad(result.params, batch);
            if (!std::isfinite(lg.loss)) {
                totals.push_back(lg.loss);
                throw TrainingDiverged("warm start diverged in epoch " + std::to_string(epoch), totals);
            }
            adamw_step(result.params, lg.grads, opt);
            sum += lg.loss;
        }
        const double mean = sum / static_cast<double>(steps);
        totals.push_back(mean);
        result.history.push_back({mean, lr});
        plateau_step(mean, plateau);
    }
    return result;
}

HjbResult train_hjb(const NetworkParams& initial, const GridDataset& dataset, const AffineSystem& sys,
                    const HjbConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("hjb: dataset is empty");
    }
    HjbResult result;
    result.params = initial;
    Rng rng(cfg.seed);
    AdamWState opt = make_adamw(cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay, cfg.cyclic.lr_min);
    const std::size_t steps = steps_per_epoch(dataset.size(), cfg.batch_size);
    std::vector<double> totals;
    long global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        HjbEpoch acc;
        for (std::size_t s = 0; s < steps; ++s) {
            const Batch mixed = sample_batch(dataset, cfg.batch_size, false, rng);
            const Batch boundary = sample_batch(dataset, cfg.batch_size, true, rng);
            HjbLoss loss;
            try {
                loss = hjb_loss_and_grad(result.params, mixed, boundary, sys, cfg.alpha, cfg.control_gradient);
            } catch (const NonFiniteError& e) {
                throw TrainingDiverged(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", totals);
            }
            if (!std::isfinite(loss.total)) {
                throw TrainingDiverged("hjb loss overflow in epoch " + std::to_string(epoch), totals);
            }
            opt.lr = cyclic_lr(global_step++, cfg.cyclic);
            try {
                adamw_step(result.params, loss.grads, opt);
            } catch (const NonFiniteError& e) {
                throw TrainingDiverged(e.what(), totals);
            }
            acc.boundary += loss.boundary;
            acc.hjb += loss.hjb;
            acc.total += loss.total;
        }
        const double inv = 1.0 / static_cast<double>(steps);
        acc.boundary *= inv;
        acc.hjb *= inv;
        acc.total *= inv;
        totals.push_back(acc.total);
        result.history.push_back(acc);
        if (cfg.stop_below > 0.0 && acc.total < cfg.stop_below) {
            break;
        }
    }
    return result;
}

std::vector<NetworkParams> EnsembleTraining::successful_params() const {
    std::vector<NetworkParams> out;
    for (const MemberOutcome& m : members) {
        if (m.ok) {
            out.push_back(m.params);
        }
    }
    return out;
}

EnsembleTraining train_ensemble(const GridDataset& dataset, const AffineSystem& sys, const HjbConfig& cfg,
                                std::size_t n, const NetworkParams& base, int threads) {
    if (n == 0) {
        throw std::invalid_argument("train_ensemble: ensemble size must be >= 1");
    }
    cfg.validate();
    EnsembleTraining out;
    out.members.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.members[j].index = j;
        out.members[j].seed = derive_seed(cfg.seed, j);
    }

    auto run_member = [&](std::size_t j) {
        MemberOutcome& member = out.members[j];
        HjbConfig member_cfg = cfg;
        member_cfg.seed = member.seed;
        try {
            HjbResult r = train_hjb(base, dataset, sys, member_cfg);
            member.params = r.params;
            member.history = std::move(r.history);
            member.ok = true;
        } catch (const TrainingDiverged& e) {
            member.error = e.what();
            member.params = base;
            for (double t : e.totals()) {
                member.history.push_back({0.0, 0.0, t});
            }
        }
    };

    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1U, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t j = 0; j < n; ++j) {
            run_member(j);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t j = next++; j < n; j = next++) {
                    run_member(j);
                }
            });
        }
    }

    std::size_t epochs = 0;
    for (const MemberOutcome& m : out.members) {
        if (m.ok) {
            epochs = std::max(epochs, m.history.size());
        }
    }
    for (std::size_t e = 0; e < epochs; ++e) {
        HjbEpoch mean;
        std::size_t count = 0;
        for (const MemberOutcome& m : out.members) {
            if (m.ok && e < m.history.size()) {
                mean.boundary += m.history[e].boundary;
                mean.hjb += m.history[e].hjb;
                mean.total += m.history[e].total;
                ++count;
            }
        }
        const double inv = 1.0 / static_cast<double>(count);
        out.ensemble_curve.push_back({mean.boundary * inv, mean.hjb * inv, mean.total * inv});
    }
    return out;
}

} // namespace hjb
