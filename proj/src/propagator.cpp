#include "cocycle/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cocycle/errors.hpp"

namespace cocycle {

namespace detail {

namespace {

constexpr double kBlowupThreshold = 1e12;

void check_state(const Matrix2& u, double t_fail) {
    if (!u.finite() || u.max_abs_entry() > kBlowupThreshold) {
        throw numerical_blowup("propagator state left the trusted range",
                               t_fail);
    }
}

}  // namespace

CoreResult integrate_core(const KineticGenerator& a, const BaseFlow& flow,
                          const BasePoint& start, double t, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw invalid_input("integration step must be positive and finite");
    }
    if (!std::isfinite(t)) {
        throw invalid_input("integration horizon must be finite");
    }
    const double dir = t < 0.0 ? -1.0 : 1.0;
    const double span = std::abs(t);

    // Reversed-or-forward generator in the integration clock u in [0, span]:
    // G(u) = dir * A(advance(start, dir * u)).
    const std::vector<BottomRowPerturbation>& mods = a.modifications();
    std::vector<char> mask(mods.size(), 0);

    // Piece boundaries at support crossings, in integration-clock units.
    std::vector<double> cuts{0.0, span};
    for (const BottomRowPerturbation& mod : mods) {
        if (!mod.support) continue;
        for (double s : mod.support->crossing_times(start, std::min(0.0, t),
                                                    std::max(0.0, t))) {
            const double u = dir * s;
            if (u > 1e-12 && u < span - 1e-12) cuts.push_back(u);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double x, double y) {
                               return std::abs(x - y) < 1e-12;
                           }),
               cuts.end());

    Matrix2 u_mat = Matrix2::identity();
    double trace_integral = 0.0;

    auto rhs = [&](double u_clock) {
        const BasePoint p = flow.advance(start, dir * u_clock);
        return (mods.empty() ? a.evaluate(p) : a.evaluate_masked(p, mask)) *
               dir;
    };

    for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
        const double lo = cuts[piece];
        const double hi = cuts[piece + 1];
        const double len = hi - lo;
        if (len <= 0.0) continue;

        // Freeze modification activity for the whole piece.
        const double mid = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < mods.size(); ++i) {
            mask[i] = !mods[i].support ||
                              mods[i].support->active_at(start, dir * mid)
                          ? 1
                          : 0;
        }

        const std::size_t n_steps =
            std::max<std::size_t>(1, static_cast<std::size_t>(
                                         std::ceil(len / step - 1e-12)));
        double u_clock = lo;
        for (std::size_t s = 0; s < n_steps; ++s) {
            const double h =
                (s + 1 == n_steps) ? hi - u_clock
                                   : std::min(step, hi - u_clock);
            const Matrix2 g0 = rhs(u_clock);
            const Matrix2 gm = rhs(u_clock + 0.5 * h);
            const Matrix2 g1 = rhs(u_clock + h);

            const Matrix2 k1 = g0 * u_mat;
            const Matrix2 k2 = gm * (u_mat + k1 * (0.5 * h));
            const Matrix2 k3 = gm * (u_mat + k2 * (0.5 * h));
            const Matrix2 k4 = g1 * (u_mat + k3 * h);
            u_mat = u_mat + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

            trace_integral +=
                h / 6.0 * (g0.trace() + 4.0 * gm.trace() + g1.trace());
            u_clock += h;
            check_state(u_mat, dir * u_clock);
        }
    }
    return CoreResult{u_mat, trace_integral};
}

}  // namespace detail

namespace {

double certified_error_bound(const KineticGenerator& a, double span,
                             double step) {
    const double a_hat = a.hat_bound();
    const double c = std::pow(a_hat, 5) * std::exp(a_hat);
    return c * std::pow(step, 4) * std::abs(span);
}

}  // namespace

Propagator2 propagate(const KineticGenerator& a, const BaseFlow& flow,
                      const BasePoint& omega, double t, double step) {
    const detail::CoreResult core =
        detail::integrate_core(a, flow, omega, t, step);
    Propagator2 p;
    p.matrix = core.matrix;
    p.t_start = 0.0;
    p.t_end = t;
    p.base_point = omega;
    p.end_point = flow.advance(omega, t);
    p.error_bound = certified_error_bound(a, t, step);
    if (!(p.matrix.det() > 0.0)) {
        throw invariant_violation(
            "propagator determinant lost positivity; integration is not "
            "trustworthy at this step size");
    }
    return p;
}

Propagator2 segment(const KineticGenerator& a, const BaseFlow& flow,
                    const BasePoint& omega, double t0, double t1, double step) {
    const BasePoint start = flow.advance(omega, t0);
    Propagator2 p = propagate(a, flow, start, t1 - t0, step);
    p.t_start = t0;
    p.t_end = t1;
    return p;
}

Propagator2 cocycle_compose(const Propagator2& left, const Propagator2& right) {
    if (std::abs(left.t_start - right.t_end) > 1e-9) {
        throw composition_mismatch(
            "legs do not abut in time: left starts at a different stamp than "
            "right ends");
    }
    if (left.base_point.dim != right.end_point.dim ||
        torus_distance(left.base_point, right.end_point) > 1e-9) {
        throw composition_mismatch(
            "legs do not abut on the orbit: left is anchored away from "
            "right's end point");
    }
    Propagator2 out;
    out.matrix = left.matrix * right.matrix;
    out.t_start = right.t_start;
    out.t_end = left.t_end;
    out.base_point = right.base_point;
    out.end_point = left.end_point;
    out.error_bound = left.error_bound + right.error_bound;
    return out;
}

double liouville_check(const KineticGenerator& a, const BaseFlow& flow,
                       const BasePoint& omega, double t, double step) {
    const detail::CoreResult core =
        detail::integrate_core(a, flow, omega, t, step);
    const double det = core.matrix.det();
    if (!(det > 0.0)) {
        throw invariant_violation(
            "determinant lost positivity during volume check");
    }
    return std::abs(std::log(det) - core.trace_integral);
}

double small_time_bracket(double a_hat, double eps) {
    if (!(eps > 0.0) || !(eps < 0.5)) {
        throw invalid_input("tolerance must lie in (0, 1/2)");
    }
    if (!(a_hat > 0.0) || !std::isfinite(a_hat)) {
        throw invalid_input("growth constant must be positive and finite");
    }
    const auto value = [a_hat](double tau) {
        return tau * tau * a_hat * std::exp(a_hat * tau);
    };
    const double cap = 0.5 - 1e-9;
    if (value(cap) < eps) return cap;
    double lo = 0.0;
    double hi = cap;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (value(mid) < eps ? lo : hi) = mid;
    }
    return lo;
}

double small_time_bracket(const KineticGenerator& a, double eps) {
    return small_time_bracket(a.hat_bound(), eps);
}

}  // namespace cocycle
