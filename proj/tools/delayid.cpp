// Experiment runner: data generation, SINDy fits, NDDE training and table output.
#include "delayid/errors.hpp"
#include "delayid/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#ifndef DELAYID_CONFIG_DIR
#define DELAYID_CONFIG_DIR "configs"
#endif

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string config_dir = DELAYID_CONFIG_DIR;
};

int run(delayid::Command command, const Options& opt) {
    std::vector<delayid::Diagnostic> warnings;
    delayid::ExperimentConfig cfg = delayid::load_experiment(opt.config, warnings);
    for (const auto& w : warnings) std::cerr << w.str() << "\n";
    if (command != delayid::Command::simulate && command != cfg.command) {
        std::cerr << opt.config << ": config is for '" << delayid::command_name(cfg.command) << "', not '"
                  << delayid::command_name(command) << "'\n";
        return kConfigError;
    }
    if (opt.seed) cfg.seed = cfg.search.pso.seed = cfg.search.bo.seed = *opt.seed;
    if (opt.threads) cfg.threads = cfg.search.pso.threads = *opt.threads;
    delayid::run_experiment(command, cfg, opt.out, std::cout);
    return kOk;
}

int validate(const Options& opt) {
    std::vector<delayid::Diagnostic> diags;
    const auto cfg = delayid::Config::load(opt.config, diags);
    delayid::read_experiment(cfg, diags);
    for (const auto& d : diags) std::cout << d.str() << "\n";
    if (delayid::has_errors(diags)) return kConfigError;
    std::cout << opt.config << ": ok (" << diags.size() << " warning(s))\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay identification experiments"};
    app.require_subcommand(1);
    Options opt;

    struct Sub {
        const char* name;
        const char* help;
        std::optional<delayid::Command> command;
    };
    const Sub subs[] = {
        {"simulate", "Generate and write the train/test trajectories of a config", delayid::Command::simulate},
        {"fit", "E-SINDy / P-SINDy identification with delay search", delayid::Command::fit},
        {"train-ndde", "Train neural DDEs with trainable delays", delayid::Command::train_ndde},
        {"compare", "SINDy versus NDDE comparison", delayid::Command::compare},
        {"validate", "Check a config without running it", std::nullopt},
    };
    std::vector<std::pair<CLI::App*, std::optional<delayid::Command>>> handlers;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", opt.config, "Experiment config file")->required()->check(CLI::ExistingFile);
        if (s.command) {
            sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
            sub->add_option("--seed", opt.seed, "Seed overriding the config");
            sub->add_option("--threads", opt.threads, "Worker threads for objective evaluation")
                ->check(CLI::PositiveNumber);
        }
        handlers.emplace_back(sub, s.command);
    }
    CLI::App* list = app.add_subcommand("list", "List models and bundled configs");
    list->add_option("--configs", opt.config_dir, "Directory of bundled configs")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (list->parsed()) {
            std::cout << delayid::list_benchmarks(opt.config_dir);
            return kOk;
        }
        for (const auto& [sub, command] : handlers) {
            if (!sub->parsed()) continue;
            return command ? run(*command, opt) : validate(opt);
        }
    } catch (const delayid::ConfigError& e) {
        std::cerr << e.what();
        return kConfigError;
    } catch (const delayid::ParameterError& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return kConfigError;
    } catch (const delayid::DivergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const delayid::TrainingError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const delayid::DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
