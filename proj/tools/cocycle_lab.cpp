#include <clocale>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cocycle/config.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/runner.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_prefix;
    int threads = -1;  // -1 = not given on the command line
};

int run(cocycle::Operation op, const CliOptions& options) {
    using namespace cocycle;
    ConfigMap raw = load_config_file(options.config_path);
    for (const std::string& assignment : options.overrides) {
        apply_override(raw, assignment);
    }
    if (!options.out_prefix.empty()) {
        raw.sections["run"]["out"] = options.out_prefix;
    }
    if (options.threads >= 0) {
        raw.sections["run"]["threads"] = std::to_string(options.threads);
    }
    const ExperimentConfig cfg = build_experiment(raw, op);
    return run_experiment(cfg, std::cout, std::cerr).exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    // All numeric text ('.' decimal point) is locale-independent.
    std::setlocale(LC_ALL, "C");

    CLI::App app{"numerical laboratory for kinetic linear cocycles"};
    app.require_subcommand(1);

    CliOptions options;
    cocycle::Operation op = cocycle::Operation::verify;

    const auto add_subcommand = [&](const std::string& name,
                                    const std::string& description,
                                    cocycle::Operation target) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", options.config_path, "config file path")
            ->required();
        sub->add_option("--set", options.overrides,
                        "override as section.key=value (repeatable)");
        sub->add_option("--out", options.out_prefix,
                        "artifact path prefix (overrides run.out)");
        sub->add_option("--threads", options.threads,
                        "worker threads (0 = auto)");
        sub->callback([&op, target]() { op = target; });
        return sub;
    };

    add_subcommand("integrate", "fundamental solution along one orbit",
                   cocycle::Operation::integrate);
    add_subcommand("spectrum", "Lyapunov spectrum over a sample",
                   cocycle::Operation::spectrum);
    add_subcommand("classify", "splitting classification over a sample",
                   cocycle::Operation::classify);
    add_subcommand("perturb", "direction rotation / swap construction",
                   cocycle::Operation::perturb);
    add_subcommand("mix", "finite-time exponent mixing perturbation",
                   cocycle::Operation::mix);
    add_subcommand("sweep", "energy sweep of the stationary oscillator",
                   cocycle::Operation::sweep);
    add_subcommand("verify", "module invariant self-test battery",
                   cocycle::Operation::verify);

    CLI11_PARSE(app, argc, argv);

    try {
        return run(op, options);
    } catch (const cocycle::invalid_input& err) {
        std::cerr << "validation error: " << err.what() << "\n";
        return 1;
    } catch (const cocycle::rotation_infeasible& err) {
        std::cerr << "infeasible: " << err.what() << "\n";
        return 3;
    } catch (const cocycle::swap_infeasible& err) {
        std::cerr << "infeasible: " << err.what() << "\n";
        return 3;
    } catch (const cocycle::numerical_error& err) {
        std::cerr << "numerical failure: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
}
