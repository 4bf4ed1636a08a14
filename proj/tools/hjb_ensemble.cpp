// Command-line driver: gen-data -> warm-start -> train-ensemble -> simulate -> evaluate.

#include "hjb/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> policy;
    std::optional<std::size_t> member;
    std::optional<std::string> ic;
    std::optional<double> noise_sigma;
    std::optional<double> alpha;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config with flat dotted keys (or a run manifest)");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--policy", o.policy,
                    "individual | mean_inclusive | mean_outlier_excluding | analytic | zero");
    cmd->add_option("--member", o.member, "Ensemble member to evaluate");
    cmd->add_option("--ic", o.ic, "Nominal initial condition x1,x2");
    cmd->add_option("--noise-sigma", o.noise_sigma, "Per-step state noise standard deviation");
    cmd->add_option("--alpha", o.alpha, "HJB residual weight");
    cmd->add_option("--threads", o.threads, "Worker threads for ensemble training (0 = all cores)");
}

hjb::RunConfig resolve(const Overrides& o) {
    hjb::RunConfig cfg = o.config.empty() ? hjb::RunConfig{} : hjb::load_run_config(o.config);
    nlohmann::json flags = nlohmann::json::object();
    if (o.seed) flags["seed"] = *o.seed;
    if (o.out) flags["out"] = *o.out;
    if (o.policy) flags["sim.policy"] = *o.policy;
    if (o.member) flags["eval.member"] = *o.member;
    if (o.noise_sigma) flags["sim.noise_sigma"] = *o.noise_sigma;
    if (o.alpha) flags["hjb.alpha"] = *o.alpha;
    if (o.threads) flags["threads"] = *o.threads;
    if (o.ic) {
        const auto comma = o.ic->find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("--ic expects x1,x2");
        }
        flags["sim.ic"] = {std::stod(o.ic->substr(0, comma)), std::stod(o.ic->substr(comma + 1))};
    }
    hjb::apply_config_json(cfg, flags);
    return cfg;
}

void print_error(const std::string& command, const std::string& code, const std::string& message) {
    nlohmann::json line = {{"status", "error"}, {"command", command}, {"code", code}, {"message", message}};
    std::cerr << line.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble HJB value-function learning and closed-loop control"};
    app.require_subcommand(1);

    Overrides overrides;
    struct Verb {
        const char* name;
        const char* help;
        void (*run)(const hjb::RunConfig&);
    };
    const Verb verbs[] = {
        {"gen-data", "Write the labelled grid dataset", hjb::cmd_gen_data},
        {"warm-start", "Fit the base network to the value labels", hjb::cmd_warm_start},
        {"train-ensemble", "Refine an ensemble from the base network with the HJB loss", hjb::cmd_train_ensemble},
        {"simulate", "Run the noisy closed-loop ensemble simulation", hjb::cmd_simulate},
        {"evaluate", "Export learned and analytic surfaces for one member", hjb::cmd_evaluate},
    };
    for (const Verb& v : verbs) {
        add_common(app.add_subcommand(v.name, v.help), overrides);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const hjb::RunConfig cfg = resolve(overrides);
        for (const Verb& v : verbs) {
            if (command == v.name) {
                v.run(cfg);
            }
        }
    } catch (const hjb::PipelineError& e) {
        print_error(command, e.code(), e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        print_error(command, "invalid_argument", e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error(command, "failure", e.what());
        return 1;
    }
    std::cout << nlohmann::json({{"status", "ok"}, {"command", command}}).dump() << std::endl;
    return 0;
}
