#include "hjb/pipeline.hpp"

#include "hjb/csv.hpp"
#include "hjb/evaluation.hpp"
#include "hjb/rng.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <functional>
#include <vector>

namespace hjb {

using nlohmann::json;

namespace {

// Stream ids for per-phase seeds derived from the master seed.
constexpr std::uint64_t kWarmStream = 10;
constexpr std::uint64_t kHjbStream = 11;
constexpr std::uint64_t kSimStream = 12;

struct ConfigKey {
    const char* name;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

json vec_json(const Eigen::Vector2d& v) { return json::array({v[0], v[1]}); }

Eigen::Vector2d vec_from(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw std::invalid_argument("expected a 2-element array");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T, typename Member>
ConfigKey plain(const char* name, Member member) {
    return {name, [member](const RunConfig& c) { return json(member(c)); },
            [member](RunConfig& c, const json& j) { member(c) = j.get<T>(); }};
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        plain<std::string>("system", [](auto& c) -> auto& { return c.system; }),
        plain<std::uint64_t>("seed", [](auto& c) -> auto& { return c.seed; }),
        {"out", [](const RunConfig& c) { return json(c.out_dir.string()); },
         [](RunConfig& c, const json& j) { c.out_dir = j.get<std::string>(); }},
        plain<int>("threads", [](auto& c) -> auto& { return c.threads; }),
        {"domain.lower", [](const RunConfig& c) { return vec_json(c.domain.lower); },
         [](RunConfig& c, const json& j) { c.domain.lower = vec_from(j); }},
        {"domain.upper", [](const RunConfig& c) { return vec_json(c.domain.upper); },
         [](RunConfig& c, const json& j) { c.domain.upper = vec_from(j); }},
        plain<int>("domain.resolution", [](auto& c) -> auto& { return c.domain.resolution; }),
        plain<std::size_t>("ensemble.size", [](auto& c) -> auto& { return c.ensemble_size; }),
        plain<int>("warm.epochs", [](auto& c) -> auto& { return c.warm.epochs; }),
        plain<std::size_t>("warm.batch_size", [](auto& c) -> auto& { return c.warm.batch_size; }),
        plain<double>("warm.lr", [](auto& c) -> auto& { return c.warm.lr; }),
        plain<double>("warm.epsilon", [](auto& c) -> auto& { return c.warm.epsilon; }),
        plain<double>("warm.weight_decay", [](auto& c) -> auto& { return c.warm.weight_decay; }),
        plain<double>("warm.beta1", [](auto& c) -> auto& { return c.warm.beta1; }),
        plain<double>("warm.beta2", [](auto& c) -> auto& { return c.warm.beta2; }),
        plain<double>("warm.plateau_factor", [](auto& c) -> auto& { return c.warm.plateau_factor; }),
        plain<int>("warm.plateau_patience", [](auto& c) -> auto& { return c.warm.plateau_patience; }),
        plain<double>("warm.plateau_threshold", [](auto& c) -> auto& { return c.warm.plateau_threshold; }),
        plain<double>("warm.min_lr", [](auto& c) -> auto& { return c.warm.min_lr; }),
        {"warm.init", [](const RunConfig& c) { return json(std::string(to_string(c.warm.init))); },
         [](RunConfig& c, const json& j) { c.warm.init = parse_init_scheme(j.get<std::string>()); }},
        plain<int>("hjb.epochs", [](auto& c) -> auto& { return c.hjb.epochs; }),
        plain<std::size_t>("hjb.batch_size", [](auto& c) -> auto& { return c.hjb.batch_size; }),
        plain<double>("hjb.alpha", [](auto& c) -> auto& { return c.hjb.alpha; }),
        plain<double>("hjb.epsilon", [](auto& c) -> auto& { return c.hjb.epsilon; }),
        plain<double>("hjb.weight_decay", [](auto& c) -> auto& { return c.hjb.weight_decay; }),
        plain<double>("hjb.beta1", [](auto& c) -> auto& { return c.hjb.beta1; }),
        plain<double>("hjb.beta2", [](auto& c) -> auto& { return c.hjb.beta2; }),
        plain<double>("hjb.lr_min", [](auto& c) -> auto& { return c.hjb.cyclic.lr_min; }),
        plain<double>("hjb.lr_max", [](auto& c) -> auto& { return c.hjb.cyclic.lr_max; }),
        plain<long>("hjb.step_size", [](auto& c) -> auto& { return c.hjb.cyclic.step_size; }),
        {"hjb.control_gradient",
         [](const RunConfig& c) {
             return json(c.hjb.control_gradient == ControlGradient::Full ? "full" : "frozen");
         },
         [](RunConfig& c, const json& j) {
             const auto s = j.get<std::string>();
             if (s != "full" && s != "frozen") {
                 throw std::invalid_argument("hjb.control_gradient must be full or frozen");
             }
             c.hjb.control_gradient = s == "full" ? ControlGradient::Full : ControlGradient::Frozen;
         }},
        plain<double>("hjb.stop_below", [](auto& c) -> auto& { return c.hjb.stop_below; }),
        plain<double>("sim.t0", [](auto& c) -> auto& { return c.sim.t0; }),
        plain<double>("sim.tf", [](auto& c) -> auto& { return c.sim.tf; }),
        plain<double>("sim.dt", [](auto& c) -> auto& { return c.sim.dt; }),
        plain<double>("sim.noise_sigma", [](auto& c) -> auto& { return c.sim.noise_sigma; }),
        {"sim.ic", [](const RunConfig& c) { return json::array({c.sim.ic_nominal[0], c.sim.ic_nominal[1]}); },
         [](RunConfig& c, const json& j) { c.sim.ic_nominal = vec_from(j); }},
        plain<double>("sim.ic_perturb_sigma", [](auto& c) -> auto& { return c.sim.ic_perturb_sigma; }),
        {"sim.policy", [](const RunConfig& c) { return json(std::string(to_string(c.sim.policy))); },
         [](RunConfig& c, const json& j) { c.sim.policy = parse_policy(j.get<std::string>()); }},
        plain<double>("sim.divergence_bound", [](auto& c) -> auto& { return c.sim.divergence_bound; }),
        plain<std::size_t>("sim.reference_members", [](auto& c) -> auto& { return c.sim.reference_members; }),
        plain<int>("eval.resolution", [](auto& c) -> auto& { return c.eval_resolution; }),
        plain<std::size_t>("eval.member", [](auto& c) -> auto& { return c.eval_member; }),
    };
    return keys;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json manifest_base(const std::string& command, const RunConfig& cfg) {
    json m;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["config"] = config_to_json(cfg);
    m["created_utc"] = utc_timestamp();
    return m;
}

void write_manifest(const RunPaths& paths, const std::string& command, const json& manifest) {
    write_text_file(paths.manifest(command), manifest.dump(2) + "\n");
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& root) {
    return std::filesystem::relative(p, root).generic_string();
}

GridDataset require_dataset(const RunPaths& paths) {
    if (!std::filesystem::exists(paths.dataset())) {
        throw PipelineError("missing_dataset", "dataset not found: " + paths.dataset().string() + " (run gen-data first)");
    }
    return load_dataset(paths.dataset());
}

NetworkParams require_weights(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw PipelineError("missing_weights", "weight file not found: " + path.string());
    }
    return load_weights(path).params;
}

} // namespace

void RunConfig::validate() const {
    domain.validate();
    warm.validate();
    hjb.validate();
    sim.validate();
    if (ensemble_size == 0) {
        throw std::invalid_argument("ensemble.size must be >= 1");
    }
    if (eval_resolution < 2) {
        throw std::invalid_argument("eval.resolution must be >= 2");
    }
    if (sim.ic_nominal.size() != 2) {
        throw std::invalid_argument("sim.ic must have two components");
    }
}

WarmStartConfig RunConfig::warm_config() const {
    WarmStartConfig c = warm;
    c.seed = derive_seed(seed, kWarmStream);
    return c;
}

HjbConfig RunConfig::hjb_config() const {
    HjbConfig c = hjb;
    c.seed = derive_seed(seed, kHjbStream);
    return c;
}

SimConfig RunConfig::sim_config() const {
    SimConfig c = sim;
    c.seed = derive_seed(seed, kSimStream);
    return c;
}

Domain RunConfig::eval_domain() const {
    Domain d = domain;
    d.resolution = eval_resolution;
    return d;
}

json config_to_json(const RunConfig& cfg) {
    json out = json::object();
    for (const ConfigKey& key : config_keys()) {
        out[key.name] = key.get(cfg);
    }
    return out;
}

void apply_config_json(RunConfig& cfg, const json& doc) {
    if (!doc.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    if (doc.contains("config") && doc.at("config").is_object()) {
        apply_config_json(cfg, doc.at("config"));
        return;
    }
    for (const auto& [name, value] : doc.items()) {
        const auto& keys = config_keys();
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return name == k.name; });
        if (it == keys.end()) {
            throw std::invalid_argument("unknown config key: " + name);
        }
        try {
            it->set(cfg, value);
        } catch (const json::exception& e) {
            throw std::invalid_argument("config key " + name + ": " + e.what());
        }
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw PipelineError("missing_config", "config file not found: " + path.string());
    }
    RunConfig cfg;
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw PipelineError("bad_config", path.string() + ": " + e.what());
    }
    apply_config_json(cfg, doc);
    return cfg;
}

std::filesystem::path RunPaths::member_weights(std::size_t j) const {
    char name[48];
    std::snprintf(name, sizeof(name), "member_%02zu.weights.json", j);
    return root / "members" / name;
}

std::filesystem::path RunPaths::simrun(Policy policy) const {
    return root / ("sim_" + std::string(to_string(policy)) + ".csv");
}

std::filesystem::path RunPaths::surface_dir(std::size_t member) const {
    char name[32];
    std::snprintf(name, sizeof(name), "member_%02zu", member);
    return root / "surfaces" / name;
}

std::filesystem::path RunPaths::manifest(const std::string& command) const {
    return root / (command + ".manifest.json");
}

void cmd_gen_data(const RunConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const RunPaths paths{cfg.out_dir};
    const AffineSystem sys = make_system(cfg.system);
    const GridDataset dataset = generate_grid_dataset(sys, cfg.domain);
    const std::string csv = dataset_to_csv(dataset);
    write_text_file(paths.dataset(), csv);

    json m = manifest_base("gen-data", cfg);
    m["domain"] = {{"lower", vec_json(cfg.domain.lower)},
                   {"upper", vec_json(cfg.domain.upper)},
                   {"resolution", cfg.domain.resolution}};
    m["rows"] = dataset.size();
    m["boundary_rows"] = dataset.boundary_indices.size();
    m["checksum_fnv1a64"] = fnv1a_hex(csv);
    m["dataset"] = relative_to(paths.dataset(), paths.root);
    m["wall_time_s"] = clock.seconds();
    write_manifest(paths, "gen-data", m);
}

void cmd_warm_start(const RunConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const RunPaths paths{cfg.out_dir};
    const GridDataset dataset = require_dataset(paths);
    const WarmStartConfig wcfg = cfg.warm_config();
    WarmStartResult result;
    try {
        result = train_warm_start(dataset, wcfg);
    } catch (const TrainingDiverged& e) {
        json m = manifest_base("warm-start", cfg);
        m["error"] = e.what();
        m["loss_history"] = e.totals();
        write_manifest(paths, "warm-start", m);
        throw PipelineError("diverged", e.what());
    }
    save_weights(paths.warm_weights(), {result.params, result.init_seed});

    std::string loss = "epoch,loss,lr\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        loss += std::to_string(e) + ',' + format_double(result.history[e].loss) + ',' +
                format_double(result.history[e].lr) + '\n';
    }
    write_text_file(paths.warm_loss(), loss);

    json m = manifest_base("warm-start", cfg);
    m["init_seed"] = result.init_seed;
    m["sample_seed_master"] = wcfg.seed;
    m["steps_per_epoch"] = steps_per_epoch(dataset.size(), wcfg.batch_size);
    m["final_loss"] = result.history.empty() ? json(nullptr) : json(result.history.back().loss);
    m["weights"] = relative_to(paths.warm_weights(), paths.root);
    m["loss_history"] = relative_to(paths.warm_loss(), paths.root);
    m["wall_time_s"] = clock.seconds();
    write_manifest(paths, "warm-start", m);
}

void cmd_train_ensemble(const RunConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const RunPaths paths{cfg.out_dir};
    const GridDataset dataset = require_dataset(paths);
    const NetworkParams base = require_weights(paths.warm_weights());
    const AffineSystem sys = make_system(cfg.system);
    const HjbConfig hcfg = cfg.hjb_config();

    const EnsembleTraining trained = train_ensemble(dataset, sys, hcfg, cfg.ensemble_size, base, cfg.threads);

    std::string loss = "epoch,member,boundary_loss,hjb_loss,total\n";
    json members = json::array();
    for (const MemberOutcome& m : trained.members) {
        const std::filesystem::path wpath = paths.member_weights(m.index);
        if (m.ok) {
            save_weights(wpath, {m.params, m.seed});
        }
        for (std::size_t e = 0; e < m.history.size(); ++e) {
            loss += std::to_string(e) + ',' + std::to_string(m.index) + ',' + format_double(m.history[e].boundary) +
                    ',' + format_double(m.history[e].hjb) + ',' + format_double(m.history[e].total) + '\n';
        }
        json entry = {{"index", m.index}, {"seed", m.seed}, {"ok", m.ok}};
        if (m.ok) {
            entry["weights"] = relative_to(wpath, paths.root);
            const HjbEpoch& last = m.history.empty() ? HjbEpoch{} : m.history.back();
            entry["final_loss"] = {{"boundary", last.boundary}, {"hjb", last.hjb}, {"total", last.total}};
        } else {
            entry["error"] = m.error;
        }
        members.push_back(entry);
    }
    for (std::size_t e = 0; e < trained.ensemble_curve.size(); ++e) {
        const HjbEpoch& c = trained.ensemble_curve[e];
        loss += std::to_string(e) + ",ensemble," + format_double(c.boundary) + ',' + format_double(c.hjb) + ',' +
                format_double(c.total) + '\n';
    }
    write_text_file(paths.ensemble_loss(), loss);

    json m = manifest_base("train-ensemble", cfg);
    m["hjb_seed_master"] = hcfg.seed;
    m["alpha"] = hcfg.alpha;
    m["steps_per_epoch"] = steps_per_epoch(dataset.size(), hcfg.batch_size);
    m["base_weights"] = relative_to(paths.warm_weights(), paths.root);
    m["members"] = members;
    json failures = json::array();
    for (const MemberOutcome& mo : trained.members) {
        if (!mo.ok) {
            failures.push_back(mo.index);
        }
    }
    m["failed_members"] = failures;
    m["loss_history"] = relative_to(paths.ensemble_loss(), paths.root);
    m["wall_time_s"] = clock.seconds();
    write_manifest(paths, "train-ensemble", m);
    if (failures.size() == trained.members.size()) {
        throw PipelineError("diverged", "every ensemble member diverged");
    }
}

Ensemble load_ensemble(const RunPaths& paths) {
    if (!std::filesystem::exists(paths.ensemble_manifest())) {
        throw PipelineError("missing_weights", "ensemble manifest not found: " + paths.ensemble_manifest().string() +
                                                   " (run train-ensemble first)");
    }
    const json manifest = json::parse(read_text_file(paths.ensemble_manifest()));
    std::vector<NetworkParams> members;
    for (const json& entry : manifest.at("members")) {
        if (entry.at("ok").get<bool>()) {
            members.push_back(require_weights(paths.root / entry.at("weights").get<std::string>()));
        }
    }
    if (members.empty()) {
        throw PipelineError("missing_weights", "no usable ensemble members");
    }
    return Ensemble(std::move(members));
}

void cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const RunPaths paths{cfg.out_dir};
    const AffineSystem sys = make_system(cfg.system);
    const SimConfig scfg = cfg.sim_config();
    Ensemble ensemble;
    if (uses_networks(scfg.policy)) {
        ensemble = load_ensemble(paths);
    }
    SimConfig run_cfg = scfg;
    if (!uses_networks(scfg.policy)) {
        run_cfg.reference_members = cfg.ensemble_size;
    }
    const SimRun run = simulate(ensemble, sys, run_cfg);
    save_simrun(paths.simrun(scfg.policy), run);

    json m = manifest_base("simulate", cfg);
    m["policy"] = std::string(to_string(scfg.policy));
    m["sim_seed"] = scfg.seed;
    m["members"] = run.members();
    m["steps"] = run.times.size() - 1;
    m["terminated_early"] = run.terminated_early;
    json diverged = json::array();
    json finals = json::array();
    for (std::size_t j = 0; j < run.members(); ++j) {
        if (run.diverged[j]) {
            diverged.push_back(j);
        }
        const Vec& x = run.states[j].back();
        finals.push_back(json::array({x[0], x[1]}));
    }
    m["diverged_members"] = diverged;
    m["final_states"] = finals;
    m["simrun"] = relative_to(paths.simrun(scfg.policy), paths.root);
    m["wall_time_s"] = clock.seconds();
    write_manifest(paths, "simulate_" + std::string(to_string(scfg.policy)), m);
}

void cmd_evaluate(const RunConfig& cfg) {
    cfg.validate();
    Stopwatch clock;
    const RunPaths paths{cfg.out_dir};
    const AffineSystem sys = make_system(cfg.system);
    const NetworkParams params = require_weights(paths.member_weights(cfg.eval_member));
    const Domain domain = cfg.eval_domain();

    const MseSurfaces mse = mse_surfaces(params, sys, domain);
    const Reconstruction rec = reconstruct_surfaces(params, sys, domain);
    const SurfaceGrid ham = hamiltonian_surface(params, sys, domain);

    const std::filesystem::path dir = paths.surface_dir(cfg.eval_member);
    json files = json::array();
    for (const SurfaceGrid* g : {&mse.lambda1, &mse.lambda2, &mse.control, &rec.lambda1_learned,
                                 &rec.lambda2_learned, &rec.control_learned, &rec.lambda1_analytic,
                                 &rec.lambda2_analytic, &rec.control_analytic, &ham}) {
        const std::filesystem::path p = dir / (g->quantity + ".csv");
        save_surface(p, *g);
        files.push_back(relative_to(p, paths.root));
    }

    json m = manifest_base("evaluate", cfg);
    m["member"] = cfg.eval_member;
    m["resolution"] = cfg.eval_resolution;
    m["surfaces"] = files;
    m["mean_abs_hamiltonian"] = ham.values.cwiseAbs().mean();
    m["mean_sq_error"] = {{"lambda1", mse.lambda1.values.mean()},
                          {"lambda2", mse.lambda2.values.mean()},
                          {"u", mse.control.values.mean()}};
    m["wall_time_s"] = clock.seconds();
    write_manifest(paths, "evaluate", m);
}

} // namespace hjb
