#pragma once

#include "hjb/dataset.hpp"
#include "hjb/ensemble_control.hpp"
#include "hjb/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace hjb {

/// Effective configuration of one run. Every random stream is derived from
/// `seed`.
struct RunConfig {
    std::string system = "dierks";
    Domain domain;
    WarmStartConfig warm;
    HjbConfig hjb;
    SimConfig sim;
    std::size_t ensemble_size = 20;
    int eval_resolution = 101;
    std::size_t eval_member = 0;
    std::filesystem::path out_dir = "run";
    std::uint64_t seed = 42;
    int threads = 0;

    void validate() const;

    /// Phase configs with their seeds derived from `seed`.
    WarmStartConfig warm_config() const;
    HjbConfig hjb_config() const;
    SimConfig sim_config() const;
    Domain eval_domain() const;
};

/// Flat dotted-key view, e.g. {"warm.epochs": 100, "sim.ic": [10, 10]}.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Applies the keys present in `doc`; unknown keys throw. A manifest document
/// (one with a "config" object) is accepted and its config is applied.
void apply_config_json(RunConfig& cfg, const nlohmann::json& doc);

RunConfig load_run_config(const std::filesystem::path& path);

/// Output file layout under RunConfig::out_dir.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path dataset() const { return root / "dataset.csv"; }
    std::filesystem::path warm_weights() const { return root / "warm_start.weights.json"; }
    std::filesystem::path warm_loss() const { return root / "warm_start.loss.csv"; }
    std::filesystem::path member_weights(std::size_t j) const;
    std::filesystem::path ensemble_loss() const { return root / "ensemble.loss.csv"; }
    std::filesystem::path ensemble_manifest() const { return manifest("train-ensemble"); }
    std::filesystem::path simrun(Policy policy) const;
    std::filesystem::path surface_dir(std::size_t member) const;
    std::filesystem::path manifest(const std::string& command) const;
};

/// Thrown for user-facing pipeline failures; `code` is a stable identifier.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

void cmd_gen_data(const RunConfig& cfg);
void cmd_warm_start(const RunConfig& cfg);
void cmd_train_ensemble(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);

/// Loads the members recorded as successful in the train-ensemble manifest.
Ensemble load_ensemble(const RunPaths& paths);

} // namespace hjb
