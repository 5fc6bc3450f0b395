#include "cocycle/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>

#include "cocycle/csv.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/parallel.hpp"
#include "cocycle/propagator.hpp"
#include "cocycle/rng.hpp"
#include "cocycle/schrodinger.hpp"
#include "cocycle/spectrum.hpp"
#include "cocycle/splitting.hpp"
#include "cocycle/toolbox.hpp"

namespace cocycle {

unsigned resolve_thread_count(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("COCYCLE_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

std::shared_ptr<const BaseFlow> build_flow(const ExperimentConfig& cfg) {
    if (cfg.flow_kind == "torus_translation") {
        return std::make_shared<TorusTranslation>(cfg.frequencies);
    }
    if (cfg.flow_kind == "periodic_suspension") {
        return std::make_shared<PeriodicSuspension>(cfg.period);
    }
    throw invalid_input("unknown flow kind '" + cfg.flow_kind + "'");
}

KineticGenerator build_generator(const ExperimentConfig& cfg) {
    return KineticGenerator(parse_field_expr(cfg.alpha_expr),
                            parse_field_expr(cfg.beta_expr),
                            cfg.generator_class);
}

namespace {

std::string join_reals(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        out += csv_number(values[i]);
    }
    return out;
}

std::string format_seed(std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llu",
                  static_cast<unsigned long long>(seed));
    return buf;
}

// Every knob that can influence a number in any artifact, as sorted
// "knob key = value" lines.  Thread count is deliberately absent: the merge
// is ordered, so it cannot affect output bytes.
std::map<std::string, std::string> knob_table(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> knobs;
    knobs["flow.kind"] = cfg.flow_kind;
    if (cfg.flow_kind == "torus_translation") {
        knobs["flow.frequencies"] = join_reals(cfg.frequencies);
    } else {
        knobs["flow.period"] = csv_number(cfg.period);
    }
    knobs["generator.class"] = to_string(cfg.generator_class);
    knobs["generator.alpha"] = cfg.alpha_expr;
    knobs["generator.beta"] = cfg.beta_expr;
    if (!cfg.potential_expr.empty()) {
        knobs["generator.potential"] = cfg.potential_expr;
    }
    knobs["run.step"] = csv_number(cfg.step);
    knobs["run.seed"] = format_seed(cfg.seed);
    knobs["run.sample_count"] = csv_integer(
        static_cast<long long>(cfg.sample_count));
    if (!cfg.omega.empty()) knobs["run.omega"] = join_reals(cfg.omega);
    switch (cfg.operation) {
        case Operation::integrate:
            knobs["run.tau"] = csv_number(cfg.tau);
            break;
        case Operation::spectrum:
            knobs["run.horizon"] = csv_number(cfg.horizon);
            knobs["run.renorm"] = csv_number(cfg.renorm);
            break;
        case Operation::classify:
            knobs["run.horizon"] = csv_number(cfg.horizon);
            knobs["run.renorm"] = csv_number(cfg.renorm);
            knobs["run.m"] = csv_number(cfg.m);
            break;
        case Operation::perturb:
            knobs["run.epsilon"] = csv_number(cfg.epsilon);
            knobs["run.perturb_kind"] = cfg.perturb_kind;
            if (cfg.perturb_kind == "rotate") {
                knobs["run.u_angle"] = csv_number(cfg.u_angle);
                knobs["run.v_angle"] = csv_number(cfg.v_angle);
            } else {
                knobs["run.swap_m"] = csv_integer(cfg.swap_m);
            }
            break;
        case Operation::mix:
            knobs["run.epsilon"] = csv_number(cfg.epsilon);
            knobs["run.tau"] = csv_number(cfg.tau);
            break;
        case Operation::sweep:
            knobs["run.energy_min"] = csv_number(cfg.energy_min);
            knobs["run.energy_max"] = csv_number(cfg.energy_max);
            knobs["run.energy_count"] = csv_integer(cfg.energy_count);
            knobs["run.horizon"] = csv_number(cfg.horizon);
            knobs["run.renorm"] = csv_number(cfg.renorm);
            knobs["run.m"] = csv_number(cfg.m);
            break;
        case Operation::verify:
            knobs["run.horizon"] = csv_number(cfg.horizon);
            break;
    }
    return knobs;
}

std::string render_manifest(const ExperimentConfig& cfg,
                            const std::vector<std::string>& artifacts) {
    std::string out;
    out += std::string("tool: ") + kToolVersion + "\n";
    out += std::string("operation: ") + to_string(cfg.operation) + "\n";
    for (const std::string& artifact : artifacts) {
        out += "artifact: " + artifact + "\n";
    }
    for (const auto& [key, value] : knob_table(cfg)) {
        out += "knob " + key + " = " + value + "\n";
    }
    return out;
}

BasePoint resolve_omega(const ExperimentConfig& cfg, const BaseFlow& flow) {
    if (!cfg.omega.empty()) {
        if (cfg.omega.size() != flow.dimension()) {
            throw invalid_input("omega dimension does not match the flow");
        }
        return make_point(cfg.omega);
    }
    return flow.sample(1, cfg.seed).front();
}

std::vector<std::string> omega_columns(std::size_t dim) {
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < dim; ++i) {
        cols.push_back("omega_" + std::to_string(i + 1));
    }
    return cols;
}

// ----- Operation bodies ---------------------------------------------------

CsvTable run_integrate(const ExperimentConfig& cfg, const BaseFlow& flow,
                       const KineticGenerator& a) {
    const BasePoint omega = resolve_omega(cfg, flow);
    CsvTable table;
    table.header = {"t", "u11", "u12", "u21", "u22", "det", "error_bound"};
    const int checkpoints = 100;
    Matrix2 u = Matrix2::identity();
    double bound = 0.0;
    const auto push_row = [&](double t) {
        table.rows.push_back({csv_number(t), csv_number(u.a), csv_number(u.b),
                              csv_number(u.c), csv_number(u.d),
                              csv_number(u.det()), csv_number(bound)});
    };
    push_row(0.0);
    for (int i = 1; i <= checkpoints; ++i) {
        const double t0 = cfg.tau * (i - 1) / checkpoints;
        const double t1 = cfg.tau * i / checkpoints;
        const Propagator2 leg = segment(a, flow, omega, t0, t1, cfg.step);
        u = leg.matrix * u;
        bound += leg.error_bound;
        push_row(t1);
    }
    return table;
}

struct SpectrumArtifacts {
    CsvTable per_point;
    CsvTable history;
};

SpectrumArtifacts run_spectrum(const ExperimentConfig& cfg,
                               const BaseFlow& flow,
                               const KineticGenerator& a, unsigned threads) {
    const SampleSet sample =
        SampleSet{flow.sample(cfg.sample_count, cfg.seed), cfg.seed};
    std::vector<LyapunovEstimate> estimates =
        ordered_parallel_map<LyapunovEstimate>(
            sample.points.size(), threads, [&](std::size_t i) {
                return full_spectrum(a, flow, sample.points[i], cfg.horizon,
                                     cfg.renorm, cfg.step,
                                     derive_seed(sample.seed, i));
            });

    SpectrumArtifacts out;
    out.per_point.header = {"index"};
    for (const std::string& col : omega_columns(flow.dimension())) {
        out.per_point.header.push_back(col);
    }
    for (const char* col : {"lambda1", "lambda2", "trace_average", "converged"}) {
        out.per_point.header.push_back(col);
    }
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        std::vector<std::string> row{csv_integer(static_cast<long long>(i))};
        for (std::size_t d = 0; d < flow.dimension(); ++d) {
            row.push_back(csv_number(sample.points[i][d]));
        }
        row.push_back(csv_number(estimates[i].lambda1));
        row.push_back(csv_number(estimates[i].lambda2));
        row.push_back(csv_number(estimates[i].trace_average));
        row.push_back(csv_integer(estimates[i].converged ? 1 : 0));
        out.per_point.rows.push_back(std::move(row));
    }

    out.history.header = {"t", "running_lambda1"};
    if (!estimates.empty()) {
        for (const auto& [t, running] : estimates.front().history) {
            out.history.rows.push_back({csv_number(t), csv_number(running)});
        }
    }
    return out;
}

CsvTable run_classify(const ExperimentConfig& cfg, const BaseFlow& flow,
                      const KineticGenerator& a) {
    const SampleSet sample =
        SampleSet{flow.sample(cfg.sample_count, cfg.seed), cfg.seed};
    CsvTable table;
    table.header = {"index"};
    for (const std::string& col : omega_columns(flow.dimension())) {
        table.header.push_back(col);
    }
    for (const char* col : {"lambda1", "lambda2", "ratio", "verdict"}) {
        table.header.push_back(col);
    }
    const auto fill = [&](const auto& classification) {
        for (std::size_t i = 0; i < classification.points.size(); ++i) {
            const auto& point = classification.points[i];
            std::vector<std::string> row{
                csv_integer(static_cast<long long>(i))};
            for (std::size_t d = 0; d < flow.dimension(); ++d) {
                row.push_back(csv_number(point.omega[d]));
            }
            row.push_back(csv_number(point.lambda1));
            row.push_back(csv_number(point.lambda2));
            row.push_back(csv_number(point.ratio));
            row.push_back(to_string(point.verdict));
            table.rows.push_back(std::move(row));
        }
    };
    switch (a.generator_class()) {
        case GeneratorClass::frictionless:
            fill(classify_frictionless(a, flow, sample, cfg.m, cfg.horizon,
                                       cfg.step));
            break;
        case GeneratorClass::dissipative:
            fill(classify_dissipative(a, flow, sample, cfg.m, cfg.horizon,
                                      cfg.step));
            break;
        case GeneratorClass::general:
            fill(classify_sample(a, flow, sample, cfg.m, cfg.horizon,
                                 cfg.step));
            break;
    }
    return table;
}

struct PerturbArtifacts {
    CsvTable summary;
    std::string plan_text;
};

PerturbArtifacts run_perturb(const ExperimentConfig& cfg,
                             std::shared_ptr<const BaseFlow> flow,
                             const KineticGenerator& a) {
    const BasePoint omega = resolve_omega(cfg, *flow);
    PerturbArtifacts out;
    out.summary.header = {"quantity", "value"};
    PerturbationPlan plan;
    if (cfg.perturb_kind == "rotate") {
        const RotationOutcome rotated = rotate_direction(
            a, flow, omega, unit_vector(cfg.u_angle), unit_vector(cfg.v_angle),
            cfg.epsilon, cfg.step);
        plan = rotated.plan;
        out.summary.rows.push_back(
            {"residual", csv_number(rotated.residual)});
        out.summary.rows.push_back(
            {"theta_budget", csv_number(rotated.theta_budget)});
    } else {
        const SwapOutcome swapped = swap_oseledets(a, flow, omega, cfg.swap_m,
                                                   cfg.epsilon, cfg.step);
        plan = swapped.plan;
        out.summary.rows.push_back(
            {"residual", csv_number(swapped.residual)});
        out.summary.rows.push_back(
            {"theta_budget", csv_number(plan.theta_budget)});
    }
    out.summary.rows.push_back({"plan_size", csv_number(plan.size())});
    out.summary.rows.push_back(
        {"segments", csv_integer(static_cast<long long>(plan.segments.size()))});
    std::ostringstream plan_stream;
    plan.serialize(plan_stream);
    out.plan_text = plan_stream.str();
    return out;
}

struct MixArtifacts {
    CsvTable summary;
    std::string plan_text;
};

MixArtifacts run_mix(const ExperimentConfig& cfg,
                     std::shared_ptr<const BaseFlow> flow,
                     const KineticGenerator& a) {
    const BasePoint omega = resolve_omega(cfg, *flow);
    const MixingOutcome mixed =
        mixing_perturbation(a, flow, omega, cfg.tau, cfg.epsilon, cfg.step);
    MixArtifacts out;
    out.summary.header = {"lambda1_before", "lambda2_before",
                          "exponent_after", "target_mean", "converged"};
    out.summary.rows.push_back(
        {csv_number(mixed.lambda1), csv_number(mixed.lambda2),
         csv_number(mixed.finite_time_exponent),
         csv_number(0.5 * (mixed.lambda1 + mixed.lambda2)),
         csv_integer(mixed.converged ? 1 : 0)});
    std::ostringstream plan_stream;
    mixed.plan.serialize(plan_stream);
    out.plan_text = plan_stream.str();
    return out;
}

CsvTable run_sweep(const ExperimentConfig& cfg, const BaseFlow& flow,
                   unsigned threads) {
    const CoefficientField potential = parse_field_expr(cfg.potential_expr);
    std::vector<double> energies(cfg.energy_count);
    for (int i = 0; i < cfg.energy_count; ++i) {
        energies[i] =
            cfg.energy_count == 1
                ? cfg.energy_min
                : cfg.energy_min + (cfg.energy_max - cfg.energy_min) * i /
                                       (cfg.energy_count - 1);
    }
    const SampleSet sample =
        SampleSet{flow.sample(cfg.sample_count, cfg.seed), cfg.seed};

    // Per-energy work is independent; each call carries the same sample, so
    // the merged table is thread-count invariant.
    std::vector<EnergyReport> reports = ordered_parallel_map<EnergyReport>(
        energies.size(), threads, [&](std::size_t i) {
            const EnergySweep one =
                energy_sweep(potential, flow, {energies[i]}, sample,
                             cfg.horizon, cfg.m, cfg.step);
            return one.per_energy.front();
        });

    CsvTable table;
    table.header = {"E", "mean_lambda1", "hyperbolic_fraction",
                    "zero_fraction", "unresolved_fraction"};
    for (const EnergyReport& report : reports) {
        table.rows.push_back({csv_number(report.energy),
                              csv_number(report.mean_lambda1),
                              csv_number(report.hyperbolic_fraction),
                              csv_number(report.zero_fraction),
                              csv_number(report.unresolved_fraction)});
    }
    return table;
}

}  // namespace

// ----- Self-test battery ----------------------------------------------------

std::vector<std::pair<std::string, bool>> verify_battery(
    const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, bool>> results;
    const auto check = [&](const std::string& name, auto&& body) {
        bool ok = false;
        try {
            ok = body();
        } catch (const std::exception&) {
            ok = false;
        }
        results.emplace_back(name, ok);
    };

    const auto flow = build_flow(cfg);
    const KineticGenerator configured = build_generator(cfg);
    const double step = std::clamp(cfg.step, 1e-4, 1e-2);

    check("torus round trip", [&]() {
        const BasePoint p = flow->sample(1, 7).front();
        const BasePoint q = flow->advance(flow->advance(p, 17.25), -17.25);
        return torus_distance(p, q) < 1e-9;
    });

    check("translation periodicity", [&]() {
        const TorusTranslation circle({0.4});
        const auto period = circle.period();
        if (!period) return false;
        const BasePoint p = make_point({0.3});
        return torus_distance(p, circle.advance(p, *period)) < 1e-9;
    });

    check("cocycle composition law", [&]() {
        const BasePoint omega = flow->sample(1, 11).front();
        SplitMix64 rng(23);
        for (int i = 0; i < 5; ++i) {
            const double s = rng.next_double(-2.0, 2.0);
            const double t = rng.next_double(-2.0, 2.0);
            const Matrix2 whole =
                propagate(configured, *flow, omega, s + t, step).matrix;
            const Matrix2 first =
                propagate(configured, *flow, omega, s, step).matrix;
            const Matrix2 second =
                propagate(configured, *flow, flow->advance(omega, s), t, step)
                    .matrix;
            if ((whole - second * first).max_abs_entry() > 1e-6) return false;
        }
        return true;
    });

    check("volume defect against damping trace", [&]() {
        const BasePoint omega = flow->sample(1, 13).front();
        return liouville_check(configured, *flow, omega, 2.0, step) < 1e-6;
    });

    check("frictionless unit determinant", [&]() {
        const KineticGenerator fless(
            CoefficientField::constant(0.0),
            parse_field_expr("1.0; (1):0.5:0.0"),
            GeneratorClass::frictionless);
        const TorusTranslation line({0.6180339887498949});
        const Matrix2 u =
            propagate(fless, line, make_point({0.2}), 3.0, step).matrix;
        return std::abs(u.det() - 1.0) < 1e-8;
    });

    check("constant system closed forms", [&]() {
        const TorusTranslation line({0.5});
        const BasePoint p = make_point({0.1});
        const double t = 1.5;
        // Restoring coefficient -1: hyperbolic block cosh/sinh.
        const KineticGenerator hyper(CoefficientField::constant(0.0),
                                     CoefficientField::constant(-1.0),
                                     GeneratorClass::frictionless);
        const Matrix2 uh = propagate(hyper, line, p, t, step).matrix;
        const Matrix2 ch{std::cosh(t), std::sinh(t), std::sinh(t),
                         std::cosh(t)};
        // Restoring coefficient +1: rotation block cos/sin.
        const KineticGenerator rot(CoefficientField::constant(0.0),
                                   CoefficientField::constant(1.0),
                                   GeneratorClass::frictionless);
        const Matrix2 ur = propagate(rot, line, p, t, step).matrix;
        const Matrix2 cr{std::cos(t), std::sin(t), -std::sin(t), std::cos(t)};
        return (uh - ch).max_abs_entry() < 1e-8 &&
               (ur - cr).max_abs_entry() < 1e-8;
    });

    check("short-time bracket inequality", [&]() {
        const double a_hat = configured.hat_bound();
        const double tau = small_time_bracket(a_hat, 0.1);
        if (!(tau > 0.0 && tau < 0.5)) return false;
        return tau * tau * a_hat * std::exp(a_hat * tau) < 0.1;
    });

    check("constant-coefficient exponents", [&]() {
        const KineticGenerator hyperbolic(CoefficientField::constant(0.0),
                                          CoefficientField::constant(-1.0),
                                          GeneratorClass::frictionless);
        const TorusTranslation line({0.6180339887498949});
        const LyapunovEstimate est = full_spectrum(
            hyperbolic, line, make_point({0.0}), 100.0, 1.0, step);
        return std::abs(est.lambda1 - 1.0) < 5e-3 &&
               std::abs(est.lambda2 + 1.0) < 5e-3;
    });

    check("cone escape certificate", [&]() {
        const ConeChoice cone = choose_cone_gamma(configured, 0.1);
        const std::vector<BasePoint> points = flow->sample(4, 31);
        SplitMix64 rng(37);
        for (const BasePoint& p : points) {
            for (int rep = 0; rep < 5; ++rep) {
                const double slope =
                    rng.next_double(-cone.gamma, cone.gamma);
                const Vec2 v = Vec2{slope, 1.0}.normalized();
                if (!cone_escape(configured, *flow, p, cone.gamma, v,
                                 cone.tau_hat, step)
                         .escaped) {
                    return false;
                }
            }
        }
        return true;
    });

    check("shear factorisation residual", [&]() {
        const auto line = std::make_shared<TorusTranslation>(
            std::vector<double>{0.6180339887498949});
        const KineticGenerator damped(CoefficientField::constant(0.2),
                                      parse_field_expr("0.5; (1):0.4:0.0"),
                                      GeneratorClass::general);
        return composed_propagator(damped, line, make_point({0.15}), 0.1, 0.5,
                                   1e-3) < 1e-6;
    });

    check("domination flip threshold", [&]() {
        const KineticGenerator hyperbolic(CoefficientField::constant(0.0),
                                          CoefficientField::constant(-1.0),
                                          GeneratorClass::frictionless);
        const TorusTranslation line({0.6180339887498949});
        const BasePoint p = make_point({0.0});
        const DominationReport below =
            is_m_dominated(hyperbolic, line, p, 0.2, step);
        const DominationReport above =
            is_m_dominated(hyperbolic, line, p, 0.5, step);
        return !below.dominated && above.dominated && above.resolved;
    });

    check("artifact rendering determinism", [&]() {
        CsvTable table;
        table.header = {"x", "y"};
        table.rows.push_back({csv_number(1.0 / 3.0), csv_number(-0.1)});
        table.rows.push_back({csv_number(1e-17), csv_number(12345.678)});
        const std::string once = render_csv(table);
        const std::string twice = render_csv(table);
        if (once != twice) return false;
        const double parsed = std::strtod(csv_number(1.0 / 3.0).c_str(), nullptr);
        return parsed == 1.0 / 3.0;
    });

    return results;
}

// ----- Dispatcher -----------------------------------------------------------

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& out,
                         std::ostream& err) {
    const unsigned threads = resolve_thread_count(cfg.threads);
    const auto flow = build_flow(cfg);

    RunResult result;
    const std::string base =
        cfg.out_prefix + "_" + to_string(cfg.operation) + ".csv";
    const auto emit = [&](const std::string& name, const std::string& text) {
        write_text_file(name, text);
        result.artifacts.push_back(name);
    };

    switch (cfg.operation) {
        case Operation::integrate: {
            const KineticGenerator a = build_generator(cfg);
            emit(base, render_csv(run_integrate(cfg, *flow, a)));
            break;
        }
        case Operation::spectrum: {
            const KineticGenerator a = build_generator(cfg);
            const SpectrumArtifacts artifacts =
                run_spectrum(cfg, *flow, a, threads);
            emit(base, render_csv(artifacts.per_point));
            emit(cfg.out_prefix + "_history.csv",
                 render_csv(artifacts.history));
            break;
        }
        case Operation::classify: {
            const KineticGenerator a = build_generator(cfg);
            emit(base, render_csv(run_classify(cfg, *flow, a)));
            break;
        }
        case Operation::perturb: {
            const KineticGenerator a = build_generator(cfg);
            const PerturbArtifacts artifacts = run_perturb(cfg, flow, a);
            emit(base, render_csv(artifacts.summary));
            emit(cfg.out_prefix + "_plan.txt", artifacts.plan_text);
            break;
        }
        case Operation::mix: {
            const KineticGenerator a = build_generator(cfg);
            const MixArtifacts artifacts = run_mix(cfg, flow, a);
            emit(base, render_csv(artifacts.summary));
            emit(cfg.out_prefix + "_plan.txt", artifacts.plan_text);
            break;
        }
        case Operation::sweep: {
            emit(base, render_csv(run_sweep(cfg, *flow, threads)));
            break;
        }
        case Operation::verify: {
            const auto checks = verify_battery(cfg);
            CsvTable table;
            table.header = {"check", "status"};
            bool all_ok = true;
            for (const auto& [name, ok] : checks) {
                table.rows.push_back({name, ok ? "pass" : "FAIL"});
                all_ok = all_ok && ok;
                out << (ok ? "  pass  " : "  FAIL  ") << name << "\n";
            }
            emit(base, render_csv(table));
            if (!all_ok) {
                err << "self-test failures detected\n";
                result.exit_code = 2;
            }
            break;
        }
    }

    emit(cfg.out_prefix + "_manifest",
         render_manifest(cfg, result.artifacts));

    out << "wrote " << result.artifacts.size() << " artifact(s):\n";
    for (const std::string& artifact : result.artifacts) {
        out << "  " << artifact << "\n";
    }
    return result;
}

}  // namespace cocycle
