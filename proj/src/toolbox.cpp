#include "cocycle/toolbox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "cocycle/errors.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

// ----- Elementary building blocks ---------------------------------------

Matrix2 shear_solution(const ShearSpec& spec, double t) {
    return Matrix2{1.0, 0.0, spec.xi * t, 1.0};
}

double angle_theta(double t, double gamma, double xi) {
    if (!(gamma > 0.0)) throw invalid_input("cone slope must be positive");
    const double x = t * xi * gamma;
    const double g2 = gamma * gamma;
    const double numerator = 1.0 + g2 + x;
    const double denominator =
        std::sqrt(g2 + 1.0) * std::sqrt(g2 + 1.0 + 2.0 * x + x * x);
    double operand = numerator / denominator;
    if (operand > 1.0 + 1e-12 || operand < -1.0 - 1e-12) {
        throw numerical_domain("rotation-angle operand left [-1, 1]");
    }
    operand = std::clamp(operand, -1.0, 1.0);
    return std::acos(operand);
}

Matrix2 conjugated_generator(const KineticGenerator& a, const BaseFlow& flow,
                             const BasePoint& omega, double xi, double t,
                             double step) {
    const Matrix2 u = propagate(a, flow, omega, t, step).matrix;
    const Matrix2 shear{0.0, 0.0, xi, 0.0};
    return u.inverse() * shear * u;
}

namespace {

// The time-dependent coefficient of the relative-rotation equation with the
// shear strength factored out: R' = xi * M(t) * R, M(t) = U(t)^-1 E21 U(t).
// Sampled once on a half-step grid so root finding in xi can reuse it.
struct RotationCoefficientPath {
    double tau = 0.0;
    double h = 0.0;                 // full step
    std::vector<Matrix2> m_nodes;   // M at 0, h/2, h, 3h/2, ..., tau
};

RotationCoefficientPath sample_rotation_path(const KineticGenerator& a,
                                             const BaseFlow& flow,
                                             const BasePoint& omega, double tau,
                                             double step) {
    RotationCoefficientPath path;
    path.tau = tau;
    const std::size_t n =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::ceil(tau / step - 1e-12)));
    path.h = tau / static_cast<double>(n);
    path.m_nodes.reserve(2 * n + 1);
    // March U at half steps so every node value is a converged fourth-order
    // solution, not an internal stage prediction.
    const Matrix2 e21{0.0, 0.0, 1.0, 0.0};
    Matrix2 u = Matrix2::identity();
    double t = 0.0;
    auto record = [&]() { path.m_nodes.push_back(u.inverse() * e21 * u); };
    record();
    for (std::size_t node = 0; node < 2 * n; ++node) {
        const double hh = 0.5 * path.h;
        const Matrix2 g0 = a.evaluate(flow.advance(omega, t));
        const Matrix2 gm = a.evaluate(flow.advance(omega, t + 0.5 * hh));
        const Matrix2 g1 = a.evaluate(flow.advance(omega, t + hh));
        const Matrix2 k1 = g0 * u;
        const Matrix2 k2 = gm * (u + k1 * (0.5 * hh));
        const Matrix2 k3 = gm * (u + k2 * (0.5 * hh));
        const Matrix2 k4 = g1 * (u + k3 * hh);
        u = u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hh / 6.0);
        t += hh;
        if (!u.finite()) {
            throw numerical_blowup("rotation path integration failed", t);
        }
        record();
    }
    return path;
}

// Relative rotation over the sampled window for one shear strength.
Matrix2 integrate_rotation(const RotationCoefficientPath& path, double xi) {
    Matrix2 r = Matrix2::identity();
    const std::size_t n = (path.m_nodes.size() - 1) / 2;
    for (std::size_t s = 0; s < n; ++s) {
        const Matrix2 g0 = path.m_nodes[2 * s] * xi;
        const Matrix2 gm = path.m_nodes[2 * s + 1] * xi;
        const Matrix2 g1 = path.m_nodes[2 * s + 2] * xi;
        const Matrix2 k1 = g0 * r;
        const Matrix2 k2 = gm * (r + k1 * (0.5 * path.h));
        const Matrix2 k3 = gm * (r + k2 * (0.5 * path.h));
        const Matrix2 k4 = g1 * (r + k3 * path.h);
        r = r + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (path.h / 6.0);
    }
    return r;
}

}  // namespace

Propagator2 rotation_solution(const KineticGenerator& a, const BaseFlow& flow,
                              const BasePoint& omega, double xi, double tau,
                              double step) {
    if (!(tau > 0.0) || !(tau <= 1.0)) {
        throw invalid_input("rotation window must satisfy 0 < tau <= 1");
    }
    const RotationCoefficientPath path =
        sample_rotation_path(a, flow, omega, tau, step);
    Propagator2 r;
    r.matrix = integrate_rotation(path, xi);
    r.t_start = 0.0;
    r.t_end = tau;
    r.base_point = omega;
    r.end_point = flow.advance(omega, tau);
    const double a_hat = a.hat_bound() + std::abs(xi) + 1.0;
    r.error_bound = std::pow(a_hat, 5) * std::exp(a_hat) * std::pow(step, 4) * tau;
    if (std::abs(r.matrix.det() - 1.0) > 1e-8) {
        throw invariant_violation(
            "relative rotation lost unimodularity beyond 1e-8");
    }
    return r;
}

double composed_propagator(const KineticGenerator& a,
                           std::shared_ptr<const BaseFlow> flow,
                           const BasePoint& omega, double xi, double tau,
                           double step) {
    const Propagator2 rot = rotation_solution(a, *flow, omega, xi, tau, step);
    const Propagator2 plain = propagate(a, *flow, omega, tau, step);

    BottomRowPerturbation shear_mod{
        CoefficientField::constant(-xi),  // bottom-left entry + xi
        CoefficientField::constant(0.0),
        SupportSegment(flow, omega, 0.0, tau)};
    const KineticGenerator b = apply_perturbation(a, shear_mod);
    const Propagator2 direct = propagate(b, *flow, omega, tau, step);

    const Matrix2 diff = direct.matrix - plain.matrix * rot.matrix;
    return std::sqrt(diff.a * diff.a + diff.b * diff.b + diff.c * diff.c +
                     diff.d * diff.d);
}

// ----- Vertical cones and escape ----------------------------------------

bool ConeSpec::contains(Vec2 v) const {
    return std::abs(v.x) < gamma * std::abs(v.y);
}

EscapeResult cone_escape(const KineticGenerator& a, const BaseFlow& flow,
                         const BasePoint& omega, double gamma, Vec2 v,
                         double tau_hat, double step) {
    const ConeSpec cone{gamma};
    if (!cone.contains(v)) {
        throw invalid_input("escape probe must start inside the cone");
    }
    if (!(tau_hat > 0.0) || !(tau_hat < 0.5)) {
        throw invalid_input("observation time must lie in (0, 1/2)");
    }
    const std::size_t n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tau_hat / step - 1e-12)));
    const double h = tau_hat / static_cast<double>(n);
    Vec2 w = v;
    double t = 0.0;
    EscapeResult result;
    for (std::size_t s = 0; s < n; ++s) {
        const Vec2 k1 = a.evaluate(flow.advance(omega, t)) * w;
        const Vec2 k2 =
            a.evaluate(flow.advance(omega, t + 0.5 * h)) * (w + 0.5 * h * k1);
        const Vec2 k3 =
            a.evaluate(flow.advance(omega, t + 0.5 * h)) * (w + 0.5 * h * k2);
        const Vec2 k4 = a.evaluate(flow.advance(omega, t + h)) * (w + h * k3);
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        if (!result.exit_time && !cone.contains(w)) {
            result.exit_time = t;
        }
    }
    result.escaped = !cone.contains(w);
    return result;
}

ConeChoice choose_cone_gamma(const KineticGenerator& a, double eps) {
    if (!(eps > 0.0) || !(eps < 0.5)) {
        throw invalid_input("tolerance must lie in (0, 1/2)");
    }
    const double tau_hat = small_time_bracket(a, eps);
    const double ell =
        std::max(a.alpha().sup_abs_bound(), a.beta().sup_abs_bound()) + 1.0;
    // Worst case over the cone of the escape-ratio certificate: the image's
    // horizontal/vertical ratio is at least
    //   [(1-eps) tau - g (1 + tau eps)] / [1 + tau l (2 g eps + 2 eps + g + 1 + eps)]
    // for every starting slope of magnitude below g; admissible g make that
    // ratio exceed g itself.
    const auto admissible = [&](double g) {
        const double numerator = (1.0 - eps) * tau_hat - g * (1.0 + tau_hat * eps);
        const double denominator =
            1.0 + tau_hat * ell *
                      (2.0 * g * eps + 2.0 * eps + g + 1.0 + eps);
        return numerator / denominator > g;
    };
    if (!admissible(1e-6)) {
        throw construction_failure(
            "no usable cone parameter above 1e-6; the generator bound is too "
            "large for this tolerance");
    }
    if (admissible(0.5)) return ConeChoice{0.5, tau_hat};
    double lo = 1e-6;
    double hi = 0.5;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (admissible(mid) ? lo : hi) = mid;
    }
    return ConeChoice{lo, tau_hat};
}

// ----- Certified rotation context ----------------------------------------

double ToolboxContext::theta2_at(double kappa) const {
    if (!(kappa >= 1.0)) return 0.0;
    const double s = std::min(1.0, std::sin(theta1) / kappa);
    return 0.9 * std::asin(s);
}

double ToolboxContext::budget_at(double kappa) const {
    return std::min({theta0, theta1, theta2_at(kappa)});
}

ToolboxContext make_toolbox_context(const KineticGenerator& a,
                                    const BaseFlow& flow, double eps,
                                    double step, std::uint64_t trial_seed) {
    ToolboxContext ctx;
    ctx.epsilon = eps;
    const ConeChoice cone = choose_cone_gamma(a, eps);
    ctx.gamma = cone.gamma;
    ctx.tau_hat = cone.tau_hat;
    // The rotation window wants the solution merely near the identity, not
    // as tight as the cone certificate; a quarter-size bracket keeps the
    // window long enough that usable rotation angles are reachable.
    ctx.tau_tilde = std::min(0.45, small_time_bracket(a.hat_bound(), 0.25));
    ctx.ell = std::max(a.alpha().sup_abs_bound(), a.beta().sup_abs_bound()) + 1.0;
    ctx.theta1 = angle_theta(ctx.tau_tilde, ctx.gamma, eps / 2.0);

    // Empirical both-escape half-angle: the largest trial angle for which
    // 100/100 seeded in-cone vectors and their rotations both leave the cone
    // by tau_hat, halved.
    const std::vector<BasePoint> points = flow.sample(20, trial_seed);
    const auto trials_pass = [&](double theta) {
        SplitMix64 rng(trial_seed ^ 0x9e3779b97f4a7c15ull);
        for (const BasePoint& p : points) {
            for (int rep = 0; rep < 5; ++rep) {
                const double slope = rng.next_double(-ctx.gamma, ctx.gamma);
                const Vec2 u = Vec2{slope, 1.0}.normalized();
                const double sign = (rep % 2 == 0) ? 1.0 : -1.0;
                const Vec2 v = rotation_matrix(sign * theta) * u;
                try {
                    if (!cone_escape(a, flow, p, ctx.gamma, u, ctx.tau_hat, step)
                             .escaped) {
                        return false;
                    }
                    // The rotated mate may start outside the cone; outside
                    // vectors only need to stay/estimate outside, which the
                    // escape run reports directly when startable.
                    const ConeSpec spec{ctx.gamma};
                    if (spec.contains(v)) {
                        if (!cone_escape(a, flow, p, ctx.gamma, v, ctx.tau_hat,
                                         step)
                                 .escaped) {
                            return false;
                        }
                    }
                } catch (const numerical_error&) {
                    return false;
                }
            }
        }
        return true;
    };
    double passing = 0.0;
    double candidate = 0.4;
    while (candidate > 1e-7) {
        if (trials_pass(candidate)) {
            passing = candidate;
            break;
        }
        candidate *= 0.7;
    }
    if (passing > 0.0 && passing < 0.4) {
        // Sharpen the boundary a little between the last failing and the
        // first passing candidate.
        double lo = passing;
        double hi = passing / 0.7;
        for (int i = 0; i < 6; ++i) {
            const double mid = 0.5 * (lo + hi);
            (trials_pass(mid) ? lo : hi) = mid;
        }
        passing = lo;
    }
    ctx.theta0 = 0.5 * passing;
    return ctx;
}

// ----- Perturbation plans -------------------------------------------------

double PerturbationPlan::size() const {
    double worst = 0.0;
    for (const PlanSegment& seg : segments) {
        worst = std::max(worst, std::abs(seg.xi));
    }
    return worst;
}

void PerturbationPlan::serialize(std::ostream& out) const {
    out << "plan target: " << target << "\n";
    out << "anchor:";
    for (std::size_t i = 0; i < anchor.dim; ++i) out << " " << anchor[i];
    out << "\n";
    out << "size: " << size() << "\n";
    out << "residual: " << residual << "\n";
    out << "theta_budget: " << theta_budget << "\n";
    out << "segments: " << segments.size() << "\n";
    for (const PlanSegment& seg : segments) {
        out << "  window t_start=" << seg.t_start
            << " duration=" << seg.duration << " xi=" << seg.xi << "\n";
    }
    for (const std::string& line : audit) {
        out << "note: " << line << "\n";
    }
}

KineticGenerator apply_plan(const KineticGenerator& a,
                            std::shared_ptr<const BaseFlow> flow,
                            const PerturbationPlan& plan) {
    KineticGenerator b = a;
    for (const PlanSegment& seg : plan.segments) {
        if (seg.xi == 0.0) continue;
        BottomRowPerturbation mod{
            CoefficientField::constant(-seg.xi),
            CoefficientField::constant(0.0),
            SupportSegment(flow, plan.anchor, seg.t_start,
                           seg.t_start + seg.duration)};
        b = apply_perturbation(b, mod);
    }
    return b;
}

// ----- Direction steering -------------------------------------------------

namespace {

struct WindowRotation {
    double window_start = 0.0;  // relative to the step's base point
    double xi = 0.0;
    Vec2 achieved;              // image direction after one unit of time
    double residual = 0.0;      // line angle between images of u and v
};

// One unit of steering at base point x: find a shear window making the
// time-1 image line of u coincide with the unperturbed image line of v.
// Returns the realised window (xi = 0 when u and v already share a line).
WindowRotation rotate_core(const KineticGenerator& a,
                           const std::shared_ptr<const BaseFlow>& flow,
                           const BasePoint& x, Vec2 u, Vec2 v, double eps,
                           double step, const ToolboxContext& ctx) {
    u = u.normalized();
    v = v.normalized();
    WindowRotation out;

    const ConeSpec cone{ctx.gamma};
    const bool needs_coast = cone.contains(u) || cone.contains(v);
    Vec2 u_w = u;
    Vec2 v_w = v;
    if (needs_coast) {
        out.window_start = ctx.tau_hat;
        const Matrix2 coast = propagate(a, *flow, x, ctx.tau_hat, step).matrix;
        u_w = (coast * u).normalized();
        v_w = (coast * v).normalized();
        if (cone.contains(u_w) || cone.contains(v_w)) {
            throw construction_failure(
                "cone escape failed at the certified observation time; the "
                "cone parameter does not hold at this point");
        }
    }

    const double needed = signed_line_angle(u_w, v_w);
    if (std::abs(needed) < 1e-13) {
        out.xi = 0.0;
        out.achieved = (propagate(a, *flow, x, 1.0, step).matrix * u).normalized();
        out.residual = 0.0;
        return out;
    }

    const BasePoint window_base = flow->advance(x, out.window_start);
    const RotationCoefficientPath path =
        sample_rotation_path(a, *flow, window_base, ctx.tau_tilde, step);
    const auto angle_of = [&](double xi) {
        const Vec2 image = integrate_rotation(path, xi) * u_w;
        return signed_line_angle(image, v_w);
    };

    const double xi_max = eps / 2.0;
    double g_lo = angle_of(-xi_max);
    double g_hi = angle_of(+xi_max);
    if (g_lo == 0.0 || g_hi == 0.0) {
        out.xi = g_lo == 0.0 ? -xi_max : xi_max;
    } else if (g_lo * g_hi > 0.0) {
        std::ostringstream msg;
        msg << "no shear strength in [-" << xi_max << ", " << xi_max
            << "] reaches the target line: the remaining angle stays in ["
            << std::min(g_lo, g_hi) << ", " << std::max(g_lo, g_hi)
            << "] rad over the whole budget (required rotation " << needed
            << " rad)";
        throw rotation_infeasible(msg.str());
    } else {
        double lo = -xi_max;
        double hi = +xi_max;
        double f_lo = g_lo;
        double best = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double f_mid = angle_of(mid);
            best = mid;
            if (std::abs(f_mid) < 1e-10) break;
            if ((f_mid > 0.0) == (f_lo > 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        out.xi = best;
    }

    // Realise the window and verify the unit-time identity honestly.
    PerturbationPlan unit_plan;
    unit_plan.anchor = x;
    unit_plan.segments.push_back(
        PlanSegment{out.window_start, ctx.tau_tilde, out.xi});
    const KineticGenerator b = apply_plan(a, flow, unit_plan);
    const Matrix2 image_b = propagate(b, *flow, x, 1.0, step).matrix;
    const Matrix2 image_a = propagate(a, *flow, x, 1.0, step).matrix;
    out.achieved = (image_b * u).normalized();
    out.residual = line_angle(image_b * u, image_a * v);
    return out;
}

}  // namespace

RotationOutcome rotate_direction(const KineticGenerator& a,
                                 std::shared_ptr<const BaseFlow> flow,
                                 const BasePoint& omega, Vec2 u, Vec2 v,
                                 double eps, double step,
                                 const ToolboxContext* ctx) {
    if (!(eps > 0.0) || !(eps < 0.5)) {
        throw invalid_input("perturbation budget must lie in (0, 1/2)");
    }
    ToolboxContext local;
    if (!ctx) {
        local = make_toolbox_context(a, *flow, eps, step);
        ctx = &local;
    }

    const double kappa =
        condition_number(propagate(a, *flow, omega, ctx->tau_hat, step).matrix);
    const double budget = ctx->budget_at(kappa);

    RotationOutcome out{a, PerturbationPlan{}, budget, 0.0};
    out.plan.anchor = omega;
    {
        std::ostringstream target;
        target << "rotate the line of (" << u.x << ", " << u.y
               << ") to follow the line of (" << v.x << ", " << v.y
               << ") after one unit of time";
        out.plan.target = target.str();
    }
    out.plan.theta_budget = budget;
    {
        std::ostringstream note;
        note << "certified budgets: theta0=" << ctx->theta0
             << " theta1=" << ctx->theta1
             << " theta2=" << ctx->theta2_at(kappa)
             << " (kappa=" << kappa << ")";
        out.plan.audit.push_back(note.str());
    }

    if (line_angle(u, v) < 1e-13) {
        out.residual = 0.0;
        out.plan.residual = 0.0;
        return out;  // plan with no windows: B = A
    }

    const WindowRotation window =
        rotate_core(a, flow, omega, u, v, eps, step, *ctx);
    if (window.xi != 0.0) {
        out.plan.segments.push_back(
            PlanSegment{window.window_start, ctx->tau_tilde, window.xi});
    }
    out.plan.residual = window.residual;
    out.residual = window.residual;
    if (window.window_start > 0.0) {
        std::ostringstream note;
        note << "coast for " << ctx->tau_hat
             << " before the shear window (cone escape)";
        out.plan.audit.push_back(note.str());
    }
    if (!(window.residual < 1e-6)) {
        std::ostringstream msg;
        msg << "realised rotation missed its target by " << window.residual
            << " rad (tolerance 1e-6)";
        throw construction_failure(msg.str());
    }
    out.b = apply_plan(a, flow, out.plan);
    return out;
}

namespace {

// The probe leg for one steering window: the unit-time propagator at the
// given fiber with a constant shear of strength xi on [fiber, fiber + 1].
// The zero-strength case uses the cached unperturbed leg, which matches the
// perturbed integration exactly because inactive windows contribute nothing
// to the coefficient evaluation.
Matrix2 sheared_leg(const KineticGenerator& a,
                    const std::shared_ptr<const BaseFlow>& flow,
                    OrbitCache& cache, long long fiber, double xi,
                    double step) {
    if (xi == 0.0) return cache.unit_forward(fiber);
    PerturbationPlan probe;
    probe.anchor = cache.origin();
    probe.segments.push_back(PlanSegment{static_cast<double>(fiber), 1.0, xi});
    const KineticGenerator b = apply_plan(a, flow, probe);
    return detail::integrate_core(b, *flow,
                                  cache.at(static_cast<double>(fiber)), 1.0,
                                  step)
        .matrix;
}

struct ChainOutcome {
    std::vector<PlanSegment> segments;  // one window per unit of the chain
    double residual = 0.0;  // final line angle to the contracting direction
    bool landed = false;
    int landing_window = -1;
    std::vector<std::string> audit;
};

// Steer the expanding direction at fiber k0 onto the contracting one at
// fiber k0 + m with per-window shear strengths bounded by xi_max.  Each
// window greedily reduces the angle between the carried line and the
// contracting line; once the remaining angle is bracketed by the available
// strengths, a bisection lands the carried line on it.  Landing is not a
// one-off: the angle to the contracting line regrows with the local
// expansion gap on every unperturbed unit, so each later window re-lands
// with a fresh (tiny) kick instead of coasting, and the final residual
// stays at the landing tolerance instead of the regrown angle.
ChainOutcome steer_chain(const KineticGenerator& a,
                         const std::shared_ptr<const BaseFlow>& flow,
                         OrbitCache& cache, long long k0, int m,
                         double xi_max, double land_tol, double step) {
    Vec2 w;
    try {
        w = cache.direction_fast(k0);
    } catch (const numerical_error& err) {
        throw degenerate_frame(
            std::string("expanding direction unavailable at the steering "
                        "window start: ") +
            err.what());
    }

    ChainOutcome out;
    double after = 0.0;
    for (int k = 0; k < m; ++k) {
        const long long fiber = k0 + k;
        Vec2 goal;
        try {
            goal = cache.direction_slow(fiber + 1);
        } catch (const numerical_error& err) {
            throw degenerate_frame(
                std::string("contracting direction unavailable inside the "
                            "steering window: ") +
                err.what());
        }

        double chosen = 0.0;
        Matrix2 leg = cache.unit_forward(fiber);
        after = signed_line_angle(leg * w, goal);
        const double h0 = after;
        if (std::abs(h0) > land_tol) {
            Matrix2 leg_plus =
                sheared_leg(a, flow, cache, fiber, +xi_max, step);
            Matrix2 leg_minus =
                sheared_leg(a, flow, cache, fiber, -xi_max, step);
            const double h_plus = signed_line_angle(leg_plus * w, goal);
            const double h_minus = signed_line_angle(leg_minus * w, goal);

            double lo = 0.0, hi = 0.0;
            bool bracket = false;
            if ((h0 < 0.0) != (h_plus < 0.0)) {
                lo = 0.0;
                hi = xi_max;
                bracket = true;
            } else if ((h_minus < 0.0) != (h0 < 0.0)) {
                lo = -xi_max;
                hi = 0.0;
                bracket = true;
            }

            if (bracket) {
                // The remaining rotation is within reach: land on it.
                double h_lo = (lo == 0.0) ? h0 : h_minus;
                double best_xi = lo;
                double best_h = h_lo;
                Matrix2 best_leg = (lo == 0.0) ? leg : leg_minus;
                const double h_hi = (hi == 0.0) ? h0 : h_plus;
                if (std::abs(h_hi) < std::abs(best_h)) {
                    best_xi = hi;
                    best_h = h_hi;
                    best_leg = (hi == 0.0) ? leg : leg_plus;
                }
                for (int it = 0; it < 200 && std::abs(best_h) > land_tol;
                     ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid == lo || mid == hi) break;
                    const Matrix2 leg_mid =
                        sheared_leg(a, flow, cache, fiber, mid, step);
                    const double h_mid = signed_line_angle(leg_mid * w, goal);
                    if (std::abs(h_mid) < std::abs(best_h)) {
                        best_xi = mid;
                        best_h = h_mid;
                        best_leg = leg_mid;
                    }
                    if ((h_mid < 0.0) == (h_lo < 0.0)) {
                        lo = mid;
                        h_lo = h_mid;
                    } else {
                        hi = mid;
                    }
                }
                chosen = best_xi;
                leg = best_leg;
                after = best_h;
            } else {
                // Out of reach this window: take the strength that makes
                // the most progress, or coast when neither helps.
                if (std::abs(h_plus) < std::abs(after)) {
                    chosen = +xi_max;
                    leg = leg_plus;
                    after = h_plus;
                }
                if (std::abs(h_minus) < std::abs(after)) {
                    chosen = -xi_max;
                    leg = leg_minus;
                    after = h_minus;
                }
            }
        }
        if (out.landing_window < 0 && std::abs(after) <= 10.0 * land_tol) {
            out.landing_window = k;
        }
        {
            std::ostringstream note;
            note << "window " << k << " (fiber " << fiber << "): strength "
                 << chosen << ", angle to the contracting line " << h0
                 << " -> " << after << " rad"
                 << (out.landing_window == k ? " (landed)" : "");
            out.audit.push_back(note.str());
        }
        out.segments.push_back(
            PlanSegment{static_cast<double>(fiber), 1.0, chosen});
        w = (leg * w).normalized();
    }
    out.residual = std::abs(after);
    out.landed = out.residual <= 10.0 * land_tol;
    std::ostringstream note;
    note << "steering chain at fiber " << k0 << " over " << m << " units: "
         << (out.landed ? "landed" : "stalled") << " at residual "
         << out.residual << " rad";
    out.audit.push_back(note.str());
    return out;
}

// Ratio of the contracting line's growth to the expanding line's growth
// over [l, l + m] along the cached orbit; the steering only works on
// windows where this stays above 1/2 (no effective domination).
std::optional<double> window_growth_ratio(OrbitCache& cache, long long l,
                                          int m) {
    const std::optional<OseledetsFrame> frame =
        cache.frame_at(static_cast<double>(l));
    if (!frame) return std::nullopt;
    const ScaledMatrix fwd =
        cache.product_forward(l, static_cast<double>(m));
    return std::exp(fwd.log_norm_applied(frame->e2.normalized()) -
                    fwd.log_norm_applied(frame->e1.normalized()));
}

}  // namespace

SwapOutcome swap_oseledets(const KineticGenerator& a,
                           std::shared_ptr<const BaseFlow> flow,
                           const BasePoint& omega, int m, double eps,
                           double step, const ToolboxContext* ctx) {
    if (m < 1) throw invalid_input("swap needs at least one unit of time");
    if (!(eps > 0.0) || !(eps < 0.5)) {
        throw invalid_input("perturbation budget must lie in (0, 1/2)");
    }
    ToolboxContext local;
    if (!ctx) {
        local = make_toolbox_context(a, *flow, eps, step);
        ctx = &local;
    }
    OrbitCache cache(a, *flow, omega, step, /*frame_tail=*/80.0);

    const std::optional<double> ratio = window_growth_ratio(cache, 0, m);
    if (!ratio) {
        throw degenerate_frame(
            "invariant directions collapse at the swap anchor");
    }
    if (!(*ratio >= 0.5)) {
        std::ostringstream msg;
        msg << "the swap window is dominated: over " << m
            << " units the contracting line falls behind the expanding one "
               "by factor "
            << *ratio
            << " (threshold 1/2), so per-window rotations are pulled back "
               "toward the expanding line faster than the strength budget "
               "pushes them away";
        throw swap_infeasible(msg.str());
    }

    ChainOutcome chain =
        steer_chain(a, flow, cache, 0, m, eps / 2.0, 1e-13, step);
    if (!(chain.residual <= 1e-5)) {
        std::ostringstream msg;
        msg << "steering exhausted the window: after " << m
            << " unit rotations at strength " << eps / 2.0
            << " the carried line still sits " << chain.residual
            << " rad from the contracting line";
        throw swap_infeasible(msg.str());
    }

    SwapOutcome out{a, PerturbationPlan{}, 0.0};
    out.plan.anchor = omega;
    out.plan.segments = chain.segments;
    out.plan.target =
        "carry the expanding invariant line onto the contracting one";
    out.plan.theta_budget = ctx->budget_at(1.0);
    out.plan.audit = chain.audit;
    out.b = apply_plan(a, flow, out.plan);

    // End-to-end verification with a fresh integration of the perturbed
    // generator over the whole window.
    Vec2 carried = cache.direction_fast(0);
    for (int k = 0; k < m; ++k) {
        const Matrix2 leg = detail::integrate_core(
                                out.b, *flow,
                                cache.at(static_cast<double>(k)), 1.0, step)
                                .matrix;
        carried = (leg * carried).normalized();
    }
    out.residual = line_angle(carried, cache.direction_slow(m));
    out.plan.residual = out.residual;
    if (!(out.residual <= 1e-4)) {
        std::ostringstream msg;
        msg << "steered image lands " << out.residual
            << " rad from the contracting line (tolerance 1e-4)";
        throw construction_failure(msg.str());
    }
    return out;
}

MixingOutcome mixing_perturbation(const KineticGenerator& a,
                                  std::shared_ptr<const BaseFlow> flow,
                                  const BasePoint& omega, double tau,
                                  double eps, double step,
                                  const ToolboxContext* ctx) {
    if (!(tau > 20.0)) {
        throw invalid_input("mixing horizon must exceed 20 time units");
    }
    if (!(eps > 0.0) || !(eps < 0.5)) {
        throw invalid_input("perturbation budget must lie in (0, 1/2)");
    }
    const double horizon = std::clamp(tau, 20.0, 200.0);
    const LyapunovEstimate est =
        full_spectrum(a, *flow, omega, horizon, 1.0, step);
    const double gap = est.lambda1 - est.lambda2;
    if (!(gap > 5e-2)) {
        throw invalid_input(
            "mixing requires a simple spectrum (measured gap too small)");
    }

    ToolboxContext local;
    if (!ctx) {
        local = make_toolbox_context(a, *flow, eps, step);
        ctx = &local;
    }
    OrbitCache cache(a, *flow, omega, step, /*frame_tail=*/80.0);

    MixingOutcome out{a, PerturbationPlan{}, 0.0, est.lambda1, est.lambda2,
                      est.converged && tau >= 100.0};
    out.plan.anchor = omega;
    out.plan.target =
        "exchange the invariant lines near the orbit midpoint so neither "
        "half of the horizon compounds the fast growth";
    out.plan.theta_budget = ctx->budget_at(1.0);

    // Candidate exchange windows [l, l + m]: starts scanned across the
    // middle band of the horizon, lengths from longest to shortest.  A long
    // window both eases the steering (more units to spread the rotation
    // over) and shortens the stretch on which the landing error can regrow
    // into a fresh fast component.
    const long long band_lo = static_cast<long long>(std::ceil(0.4 * tau));
    const long long band_hi = static_cast<long long>(std::floor(0.6 * tau));
    std::vector<int> lengths;
    for (int cand : {64, 56, 48, 40, 32, 24, 16, 12, 8}) {
        if (cand <= static_cast<int>(0.32 * tau) &&
            static_cast<double>(band_hi + cand) <= tau - 1.0) {
            lengths.push_back(cand);
        }
    }
    if (lengths.empty()) {
        lengths.push_back(std::max(
            2, static_cast<int>(std::min(0.2 * tau, tau - band_hi - 1.0))));
    }

    std::vector<std::string> audit;
    std::optional<ChainOutcome> chain;
    long long chosen_start = -1;
    int chosen_len = 0;
    double best_ratio = 0.0;
    for (int mlen : lengths) {
        struct Candidate {
            long long start;
            double ratio;
            double centre_distance;
        };
        std::vector<Candidate> candidates;
        for (long long l = band_lo; l <= band_hi; ++l) {
            const std::optional<double> ratio =
                window_growth_ratio(cache, l, mlen);
            if (!ratio) continue;
            best_ratio = std::max(best_ratio, *ratio);
            if (*ratio >= 0.5) {
                const double centre = 0.5 * (tau - mlen);
                candidates.push_back(Candidate{
                    l, *ratio, std::abs(static_cast<double>(l) - centre)});
            }
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& x, const Candidate& y) {
                      return x.centre_distance < y.centre_distance;
                  });
        {
            std::ostringstream note;
            note << "window length " << mlen << ": " << candidates.size()
                 << " non-dominated starts in [" << band_lo << ", " << band_hi
                 << "]";
            audit.push_back(note.str());
        }
        int attempts = 0;
        for (const Candidate& cand : candidates) {
            if (++attempts > 6) break;
            try {
                ChainOutcome attempt = steer_chain(a, flow, cache, cand.start,
                                                   mlen, eps / 2.0, 2e-15,
                                                   step);
                if (attempt.residual <= 1e-11) {
                    chain = std::move(attempt);
                    chosen_start = cand.start;
                    chosen_len = mlen;
                    break;
                }
                std::ostringstream note;
                note << "start " << cand.start << " (ratio " << cand.ratio
                     << "): steering stalled " << attempt.residual
                     << " rad short";
                audit.push_back(note.str());
            } catch (const degenerate_frame& err) {
                std::ostringstream note;
                note << "start " << cand.start << ": " << err.what();
                audit.push_back(note.str());
            }
        }
        if (chain) break;
    }
    if (!chain) {
        std::ostringstream msg;
        msg << "no exchange window near the orbit midpoint: scanned starts "
               "in ["
            << band_lo << ", " << band_hi
            << "], best contraction-keeping ratio " << best_ratio;
        if (best_ratio < 0.5) {
            msg << " (every candidate window is dominated)";
        } else {
            msg << " (steering stalled within the strength budget)";
        }
        throw swap_infeasible(msg.str());
    }

    {
        std::ostringstream note;
        note << "exchange window [" << chosen_start << ", "
             << (chosen_start + chosen_len) << "], landing residual "
             << chain->residual << " rad, measured spectrum ("
             << est.lambda1 << ", " << est.lambda2 << ")";
        audit.push_back(note.str());
    }
    for (const std::string& line : chain->audit) audit.push_back(line);

    out.plan.segments = chain->segments;
    out.plan.residual = chain->residual;
    out.plan.audit = audit;
    out.b = apply_plan(a, flow, out.plan);

    // Finite-time exponent of the perturbed propagator over [0, tau], from
    // unit legs in scaled form.
    ScaledMatrix product;
    double t = 0.0;
    while (t < tau - 1e-9) {
        const double len = std::min(1.0, tau - t);
        const Matrix2 leg =
            detail::integrate_core(out.b, *flow, flow->advance(omega, t), len,
                                   step)
                .matrix;
        product = ScaledMatrix(leg) * product;
        t += len;
    }
    out.finite_time_exponent = product.log_operator_norm() / tau;
    return out;
}

GlobalSweepOutcome global_mixing_sweep(const KineticGenerator& a,
                                       std::shared_ptr<const BaseFlow> flow,
                                       const SampleSet& sample, double m,
                                       double tau, double eps, double step) {
    GlobalSweepOutcome out;
    const double horizon = std::clamp(tau, 20.0, 200.0);
    out.classification =
        classify_sample(a, *flow, sample, m, horizon, step);

    const ToolboxContext ctx = make_toolbox_context(a, *flow, eps, step);

    out.plans.resize(sample.points.size());
    out.exponent_after.resize(sample.points.size());
    double sum_before = 0.0;
    double sum_after = 0.0;
    for (std::size_t i = 0; i < sample.points.size(); ++i) {
        const auto& point = out.classification.points[i];
        sum_before += point.lambda1;
        double after = point.lambda1;
        if (point.verdict == SampleVerdict::undominated_simple) {
            ++out.eligible;
            try {
                MixingOutcome mixed = mixing_perturbation(
                    a, flow, point.omega, tau, eps, step, &ctx);
                after = mixed.finite_time_exponent;
                out.plans[i] = std::move(mixed.plan);
            } catch (const numerical_error&) {
                ++out.infeasible;
            } catch (const invalid_input&) {
                // The point passed classification but its measured gap sits
                // below the mixing precondition; count it as unperturbable.
                ++out.infeasible;
            }
        }
        out.exponent_after[i] = after;
        sum_after += after;
    }
    out.le_before = sum_before / static_cast<double>(sample.points.size());
    out.le_after = sum_after / static_cast<double>(sample.points.size());
    if (out.eligible > 0 && out.infeasible * 5 > out.eligible) {
        std::ostringstream msg;
        msg << out.infeasible << " of " << out.eligible
            << " eligible points could not be perturbed (more than 20%)";
        throw construction_failure(msg.str());
    }
    return out;
}

}  // namespace cocycle
