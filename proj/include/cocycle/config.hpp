#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cocycle/coefficient_field.hpp"
#include "cocycle/kinetic.hpp"

namespace cocycle {

// Raw section -> key -> value text of a config file, before typing.  Both
// maps are ordered so that iteration (and hence every artifact derived from
// it) is deterministic.
struct ConfigMap {
    std::map<std::string, std::map<std::string, std::string>> sections;
};

// Parses the flat block-sectioned format:
//   [section]
//   key = value        # trailing comments with '#'
// Unknown sections/keys are rejected later, against the allowed-key tables.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

// Applies one "section.key=value" override (the --set flag).
void apply_override(ConfigMap& config, const std::string& assignment);

enum class Operation {
    integrate,
    spectrum,
    classify,
    perturb,
    mix,
    sweep,
    verify
};

const char* to_string(Operation op);

// Fully typed and validated experiment description.
struct ExperimentConfig {
    Operation operation = Operation::verify;

    // [flow]
    std::string flow_kind = "torus_translation";
    std::vector<double> frequencies{0.6180339887498949};
    double period = 1.0;

    // [generator]
    GeneratorClass generator_class = GeneratorClass::general;
    std::string alpha_expr = "0.0";
    std::string beta_expr = "0.0";
    std::string potential_expr;  // used by the energy sweep only

    // [run]
    double step = 1e-3;
    double horizon = 200.0;
    double renorm = 1.0;
    double m = 5.0;
    double tau = 200.0;
    double epsilon = 0.2;
    double energy_min = -4.0;
    double energy_max = 4.0;
    int energy_count = 50;
    std::size_t sample_count = 20;
    std::uint64_t seed = 0x5eedbead;
    std::string out_prefix = "cocycle";
    int threads = 0;  // 0 = auto
    std::string perturb_kind = "rotate";  // rotate | swap
    double u_angle = 0.0;
    double v_angle = 0.1;
    int swap_m = 10;
    std::vector<double> omega;  // start point; empty = first sampled point
};

// Field expression syntax, shared by alpha / beta / potential:
//   "0.25"                               constant
//   "-0.6; (1,0):1.0:0.0; (0,1):0.8:0.0" constant offset plus cosine/sine
//                                        waves, each term
//                                        (wave vector):cos amp:sin amp
CoefficientField parse_field_expr(const std::string& expr);

// Types every key, applies defaults, validates ranges for the requested
// operation, and rejects unknown sections or keys.
ExperimentConfig build_experiment(const ConfigMap& raw, Operation op);

}  // namespace cocycle
