#include "cocycle/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cocycle/errors.hpp"

namespace cocycle {

namespace {

std::string trim(const std::string& s) {
    std::size_t lo = 0;
    std::size_t hi = s.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
    return s.substr(lo, hi - lo);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw invalid_input("key '" + key + "': not a number: '" + text + "'");
    }
    return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw invalid_input("key '" + key + "': not an integer: '" + text + "'");
    }
    return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 0);
    if (t.empty() || end != t.c_str() + t.size()) {
        throw invalid_input("key '" + key + "': not a seed value: '" + text + "'");
    }
    return v;
}

std::vector<double> parse_real_list(const std::string& key,
                                    const std::string& text) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string piece;
    while (std::getline(stream, piece, ',')) {
        values.push_back(parse_double(key, piece));
    }
    if (values.empty()) {
        throw invalid_input("key '" + key + "': empty list");
    }
    return values;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap config;
    std::stringstream stream(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw invalid_input("config line " + std::to_string(line_no) +
                                    ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw invalid_input("config line " + std::to_string(line_no) +
                                    ": empty section name");
            }
            config.sections[section];  // a section may legitimately be empty
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw invalid_input("config line " + std::to_string(line_no) +
                                ": expected key = value");
        }
        if (section.empty()) {
            throw invalid_input("config line " + std::to_string(line_no) +
                                ": key outside any [section]");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw invalid_input("config line " + std::to_string(line_no) +
                                ": empty key");
        }
        auto& sec = config.sections[section];
        if (sec.count(key)) {
            throw invalid_input("config line " + std::to_string(line_no) +
                                ": duplicate key '" + key + "'");
        }
        sec[key] = value;
    }
    return config;
}

ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw invalid_input("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_override(ConfigMap& config, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw invalid_input("override must be section.key=value: '" +
                            assignment + "'");
    }
    const std::string path = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size()) {
        throw invalid_input("override must be section.key=value: '" +
                            assignment + "'");
    }
    config.sections[path.substr(0, dot)][path.substr(dot + 1)] = value;
}

const char* to_string(Operation op) {
    switch (op) {
        case Operation::integrate: return "integrate";
        case Operation::spectrum: return "spectrum";
        case Operation::classify: return "classify";
        case Operation::perturb: return "perturb";
        case Operation::mix: return "mix";
        case Operation::sweep: return "sweep";
        case Operation::verify: return "verify";
    }
    return "unknown";
}

CoefficientField parse_field_expr(const std::string& expr) {
    const std::string text = trim(expr);
    if (text.empty()) throw invalid_input("empty coefficient expression");

    double constant = 0.0;
    bool have_constant = false;
    std::vector<TrigTerm> terms;

    std::stringstream stream(text);
    std::string piece;
    while (std::getline(stream, piece, ';')) {
        piece = trim(piece);
        if (piece.empty()) {
            throw invalid_input("empty term in coefficient expression");
        }
        if (piece.front() != '(') {
            if (have_constant) {
                throw invalid_input(
                    "coefficient expression has two constant terms");
            }
            constant = parse_double("coefficient", piece);
            have_constant = true;
            continue;
        }
        const std::size_t close = piece.find(')');
        if (close == std::string::npos) {
            throw invalid_input("unterminated wave vector in '" + piece + "'");
        }
        TrigTerm term;
        {
            std::stringstream wave(piece.substr(1, close - 1));
            std::string entry;
            while (std::getline(wave, entry, ',')) {
                term.wave.push_back(
                    static_cast<int>(parse_integer("wave", entry)));
            }
            if (term.wave.empty()) {
                throw invalid_input("empty wave vector in '" + piece + "'");
            }
        }
        std::string rest = trim(piece.substr(close + 1));
        if (rest.empty() || rest.front() != ':') {
            throw invalid_input("term '" + piece +
                                "' must be (wave):cos_amp:sin_amp");
        }
        rest.erase(0, 1);
        const std::size_t colon = rest.find(':');
        if (colon == std::string::npos) {
            throw invalid_input("term '" + piece +
                                "' must be (wave):cos_amp:sin_amp");
        }
        term.amp_cos = parse_double("cos amplitude", rest.substr(0, colon));
        term.amp_sin = parse_double("sin amplitude", rest.substr(colon + 1));
        terms.push_back(term);
    }

    if (terms.empty()) return CoefficientField::constant(constant);
    return CoefficientField::trig_polynomial(constant, terms);
}

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> table = {
        {"flow", {"kind", "frequencies", "period"}},
        {"generator", {"class", "alpha", "beta", "potential"}},
        {"run",
         {"step", "horizon", "renorm", "m", "tau", "epsilon", "energy_min",
          "energy_max", "energy_count", "sample_count", "seed", "out",
          "threads", "perturb_kind", "u_angle", "v_angle", "swap_m",
          "omega"}},
    };
    return table;
}

}  // namespace

ExperimentConfig build_experiment(const ConfigMap& raw, Operation op) {
    for (const auto& [section, keys] : raw.sections) {
        const auto allowed = allowed_keys().find(section);
        if (allowed == allowed_keys().end()) {
            throw invalid_input("unknown config section [" + section + "]");
        }
        for (const auto& [key, value] : keys) {
            if (!allowed->second.count(key)) {
                throw invalid_input("unknown key '" + key + "' in section [" +
                                    section + "]");
            }
        }
    }

    ExperimentConfig cfg;
    cfg.operation = op;

    const auto get = [&raw](const std::string& section,
                            const std::string& key) -> const std::string* {
        const auto sec = raw.sections.find(section);
        if (sec == raw.sections.end()) return nullptr;
        const auto entry = sec->second.find(key);
        if (entry == sec->second.end()) return nullptr;
        return &entry->second;
    };

    if (const auto* v = get("flow", "kind")) cfg.flow_kind = trim(*v);
    if (const auto* v = get("flow", "frequencies")) {
        cfg.frequencies = parse_real_list("frequencies", *v);
    }
    if (const auto* v = get("flow", "period")) {
        cfg.period = parse_double("period", *v);
    }

    if (const auto* v = get("generator", "class")) {
        const std::string cls = trim(*v);
        if (cls == "general") cfg.generator_class = GeneratorClass::general;
        else if (cls == "frictionless")
            cfg.generator_class = GeneratorClass::frictionless;
        else if (cls == "dissipative")
            cfg.generator_class = GeneratorClass::dissipative;
        else throw invalid_input("unknown generator class '" + cls + "'");
    }
    if (const auto* v = get("generator", "alpha")) cfg.alpha_expr = *v;
    if (const auto* v = get("generator", "beta")) cfg.beta_expr = *v;
    if (const auto* v = get("generator", "potential")) cfg.potential_expr = *v;

    if (const auto* v = get("run", "step"))
        cfg.step = parse_double("step", *v);
    if (const auto* v = get("run", "horizon"))
        cfg.horizon = parse_double("horizon", *v);
    if (const auto* v = get("run", "renorm"))
        cfg.renorm = parse_double("renorm", *v);
    if (const auto* v = get("run", "m")) cfg.m = parse_double("m", *v);
    if (const auto* v = get("run", "tau")) cfg.tau = parse_double("tau", *v);
    if (const auto* v = get("run", "epsilon"))
        cfg.epsilon = parse_double("epsilon", *v);
    if (const auto* v = get("run", "energy_min"))
        cfg.energy_min = parse_double("energy_min", *v);
    if (const auto* v = get("run", "energy_max"))
        cfg.energy_max = parse_double("energy_max", *v);
    if (const auto* v = get("run", "energy_count")) {
        cfg.energy_count =
            static_cast<int>(parse_integer("energy_count", *v));
    }
    if (const auto* v = get("run", "sample_count")) {
        const long long n = parse_integer("sample_count", *v);
        if (n < 1) throw invalid_input("sample_count must be positive");
        cfg.sample_count = static_cast<std::size_t>(n);
    }
    if (const auto* v = get("run", "seed")) cfg.seed = parse_seed("seed", *v);
    if (const auto* v = get("run", "out")) cfg.out_prefix = trim(*v);
    if (const auto* v = get("run", "threads")) {
        cfg.threads = static_cast<int>(parse_integer("threads", *v));
    }
    if (const auto* v = get("run", "perturb_kind"))
        cfg.perturb_kind = trim(*v);
    if (const auto* v = get("run", "u_angle"))
        cfg.u_angle = parse_double("u_angle", *v);
    if (const auto* v = get("run", "v_angle"))
        cfg.v_angle = parse_double("v_angle", *v);
    if (const auto* v = get("run", "swap_m")) {
        cfg.swap_m = static_cast<int>(parse_integer("swap_m", *v));
    }
    if (const auto* v = get("run", "omega")) {
        cfg.omega = parse_real_list("omega", *v);
    }

    // Range validation for the knobs this operation actually reads.
    if (cfg.flow_kind != "torus_translation" &&
        cfg.flow_kind != "periodic_suspension") {
        throw invalid_input("unknown flow kind '" + cfg.flow_kind + "'");
    }
    if (cfg.flow_kind == "periodic_suspension" && !(cfg.period > 0.0)) {
        throw invalid_input("period must be positive");
    }
    if (!(cfg.step > 0.0)) throw invalid_input("step must be positive");
    if (cfg.threads < 0) throw invalid_input("threads must be >= 0");
    if (cfg.out_prefix.empty()) throw invalid_input("output prefix is empty");

    switch (op) {
        case Operation::integrate:
            if (!(cfg.tau != 0.0)) throw invalid_input("tau must be nonzero");
            break;
        case Operation::spectrum:
        case Operation::classify:
            if (!(cfg.horizon >= 10.0 * cfg.renorm)) {
                throw invalid_input("horizon must be at least 10 renorm legs");
            }
            if (!(cfg.renorm >= 0.1 && cfg.renorm <= 10.0)) {
                throw invalid_input("renorm must lie in [0.1, 10]");
            }
            if (op == Operation::classify && !(cfg.m > 0.0)) {
                throw invalid_input("m must be positive");
            }
            break;
        case Operation::perturb:
            if (cfg.perturb_kind != "rotate" && cfg.perturb_kind != "swap") {
                throw invalid_input("perturb_kind must be rotate or swap");
            }
            if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.5)) {
                throw invalid_input("epsilon must lie in (0, 1/2)");
            }
            if (cfg.perturb_kind == "swap" && cfg.swap_m < 1) {
                throw invalid_input("swap_m must be at least 1");
            }
            break;
        case Operation::mix:
            if (!(cfg.epsilon > 0.0 && cfg.epsilon < 0.5)) {
                throw invalid_input("epsilon must lie in (0, 1/2)");
            }
            if (!(cfg.tau > 20.0)) {
                throw invalid_input("tau must exceed 20 for mixing");
            }
            break;
        case Operation::sweep:
            if (cfg.potential_expr.empty()) {
                throw invalid_input(
                    "sweep needs a [generator] potential expression");
            }
            if (cfg.energy_count < 1) {
                throw invalid_input("energy_count must be positive");
            }
            if (cfg.energy_count > 1 && !(cfg.energy_max > cfg.energy_min)) {
                throw invalid_input("energy_max must exceed energy_min");
            }
            if (!(cfg.m > 0.0)) throw invalid_input("m must be positive");
            if (!(cfg.horizon >= 10.0 * cfg.renorm)) {
                throw invalid_input("horizon must be at least 10 renorm legs");
            }
            break;
        case Operation::verify:
            break;
    }

    if (!cfg.omega.empty() && cfg.flow_kind == "torus_translation" &&
        cfg.omega.size() != cfg.frequencies.size()) {
        throw invalid_input("omega dimension does not match the flow");
    }

    return cfg;
}

}  // namespace cocycle
