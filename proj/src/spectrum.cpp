#include "cocycle/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cocycle/errors.hpp"
#include "cocycle/propagator.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

SampleSet sample_measure(const BaseFlow& flow, std::size_t count,
                         std::uint64_t seed) {
    if (count == 0) throw invalid_input("sample needs at least one point");
    return SampleSet{flow.sample(count, seed), seed};
}

Vec2 sign_normalized(Vec2 v) {
    const Vec2 u = v.normalized();
    if (std::abs(u.x) > 1e-14) return u.x > 0.0 ? u : Vec2{-u.x, -u.y};
    return u.y > 0.0 ? u : Vec2{-u.x, -u.y};
}

namespace {

Vec2 random_unit(std::uint64_t seed) {
    SplitMix64 rng(seed);
    // Rejection-free: a uniform angle gives a uniform direction.
    const double angle = rng.next_double(0.0, 2.0 * 3.14159265358979323846);
    return unit_vector(angle);
}

LyapunovEstimate exponent_walk(const KineticGenerator& a, const BaseFlow& flow,
                               const BasePoint& omega, double horizon,
                               double renorm, double step, std::uint64_t seed) {
    if (!(renorm >= 0.1 && renorm <= 10.0)) {
        throw invalid_input("renormalisation interval must lie in [0.1, 10]");
    }
    if (!(horizon >= 10.0 * renorm)) {
        throw invalid_input(
            "horizon must cover at least ten renormalisation intervals");
    }
    const std::size_t n_legs =
        static_cast<std::size_t>(std::ceil(horizon / renorm - 1e-12));
    // Burn-in: a quarter of the horizon, aligned to leg boundaries, during
    // which growth is not counted while the vector locks onto the fast
    // direction.
    const std::size_t burn_legs = n_legs / 4;

    LyapunovEstimate est;
    est.horizon = horizon;
    est.renorm_interval = renorm;
    est.lambda2 = std::numeric_limits<double>::quiet_NaN();

    Vec2 v = random_unit(seed);
    double log_growth = 0.0;
    double trace_integral = 0.0;
    double t = 0.0;
    double burn_time = 0.0;
    for (std::size_t leg = 0; leg < n_legs; ++leg) {
        const double t_next = std::min(horizon, (leg + 1) * renorm);
        const detail::CoreResult core = detail::integrate_core(
            a, flow, flow.advance(omega, t), t_next - t, step);
        trace_integral += core.trace_integral;
        const Vec2 w = core.matrix * v;
        const double n = w.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw numerical_blowup("growth vector degenerated", t_next);
        }
        v = w / n;
        t = t_next;
        if (leg < burn_legs) {
            burn_time = t_next;
        } else {
            log_growth += std::log(n);
            est.history.emplace_back(t, log_growth / (t - burn_time));
        }
    }
    est.lambda1 = log_growth / (horizon - burn_time);
    est.trace_average = trace_integral / horizon;

    // Converged when the running estimate drifts less than 1e-3 over the
    // final quarter of the horizon.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [time, running] : est.history) {
        if (time >= 0.75 * horizon) {
            lo = std::min(lo, running);
            hi = std::max(hi, running);
        }
    }
    est.converged = std::isfinite(lo) && hi - lo < 1e-3;
    return est;
}

}  // namespace

LyapunovEstimate top_exponent(const KineticGenerator& a, const BaseFlow& flow,
                              const BasePoint& omega, double horizon,
                              double renorm, double step, std::uint64_t seed) {
    return exponent_walk(a, flow, omega, horizon, renorm, step, seed);
}

LyapunovEstimate full_spectrum(const KineticGenerator& a, const BaseFlow& flow,
                               const BasePoint& omega, double horizon,
                               double renorm, double step, std::uint64_t seed) {
    LyapunovEstimate est = exponent_walk(a, flow, omega, horizon, renorm, step, seed);
    const double companion = est.trace_average - est.lambda1;
    est.lambda2 = std::min(est.lambda1, companion);
    est.lambda1 = std::max(est.lambda1, companion);
    return est;
}

namespace {

// Push a fixed generic direction through n unit-time legs starting at
// advance(omega, t_from), renormalising after each leg.  direction = +1
// walks forward; -1 walks backward (legs of length -1).
Vec2 pushed_direction(const KineticGenerator& a, const BaseFlow& flow,
                      const BasePoint& omega, double t_from, int n_legs,
                      double direction, double step) {
    Vec2 v = unit_vector(0.876);  // fixed generic seed direction
    double t = t_from;
    for (int leg = 0; leg < n_legs; ++leg) {
        const detail::CoreResult core = detail::integrate_core(
            a, flow, flow.advance(omega, t), direction, step);
        v = (core.matrix * v).normalized();
        t += direction;
    }
    return v;
}

}  // namespace

std::optional<OseledetsFrame> oseledets_directions(const KineticGenerator& a,
                                                   const BaseFlow& flow,
                                                   const BasePoint& omega,
                                                   double horizon, double step) {
    const LyapunovEstimate est =
        full_spectrum(a, flow, omega, horizon, 1.0, step);
    const double gap = est.lambda1 - est.lambda2;
    if (!(gap > 1e-2)) return std::nullopt;

    // Push length: enough that the transverse component decays below 1e-8,
    // capped to the horizon and to a sane range.
    const double wanted = 18.5 / gap;
    const int legs = static_cast<int>(
        std::ceil(std::clamp(std::min(wanted, horizon), 20.0, 60.0)));

    OseledetsFrame frame;
    frame.e1 = sign_normalized(
        pushed_direction(a, flow, omega, -static_cast<double>(legs), legs,
                         +1.0, step));
    frame.e2 = sign_normalized(
        pushed_direction(a, flow, omega, +static_cast<double>(legs), legs,
                         -1.0, step));
    frame.angle = line_angle(frame.e1, frame.e2);
    if (!(frame.angle > 1e-3)) return std::nullopt;
    return frame;
}

LEFunctionalEstimate le_functional(const KineticGenerator& a,
                                   const BaseFlow& flow, const SampleSet& sample,
                                   double horizon, double renorm, double step) {
    if (sample.points.empty()) throw invalid_input("empty sample");
    LEFunctionalEstimate out;
    out.per_point.assign(sample.points.size(),
                         std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    std::size_t included = 0;
    for (std::size_t i = 0; i < sample.points.size(); ++i) {
        try {
            const LyapunovEstimate est =
                top_exponent(a, flow, sample.points[i], horizon, renorm, step,
                             derive_seed(sample.seed, i));
            out.per_point[i] = est.lambda1;
            sum += est.lambda1;
            ++included;
        } catch (const numerical_error&) {
            ++out.excluded_count;
        }
    }
    if (out.excluded_count * 10 > sample.points.size()) {
        throw numerical_error(
            "more than 10% of sample points failed; the average is not "
            "trustworthy");
    }
    if (included == 0) throw numerical_error("every sample point failed");
    out.value = sum / static_cast<double>(included);
    return out;
}

FeketeSequence fekete_sequence(const KineticGenerator& a, const BaseFlow& flow,
                               const SampleSet& sample, int n_max, double step) {
    if (n_max < 2) throw invalid_input("sequence needs n_max >= 2");
    if (sample.points.empty()) throw invalid_input("empty sample");
    FeketeSequence out;
    out.per_point_log_norms.assign(
        n_max, std::vector<double>(sample.points.size(),
                                   std::numeric_limits<double>::quiet_NaN()));
    std::vector<char> excluded(sample.points.size(), 0);
    for (std::size_t i = 0; i < sample.points.size(); ++i) {
        try {
            ScaledMatrix product;
            for (int n = 1; n <= n_max; ++n) {
                const detail::CoreResult core = detail::integrate_core(
                    a, flow,
                    flow.advance(sample.points[i], static_cast<double>(n - 1)),
                    1.0, step);
                product = ScaledMatrix(core.matrix) * product;
                out.per_point_log_norms[n - 1][i] = product.log_operator_norm();
            }
        } catch (const numerical_error&) {
            excluded[i] = 1;
            ++out.excluded_count;
            for (int n = 1; n <= n_max; ++n) {
                out.per_point_log_norms[n - 1][i] =
                    std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    if (out.excluded_count * 10 > sample.points.size()) {
        throw numerical_error(
            "more than 10% of sample points failed; the sequence is not "
            "trustworthy");
    }
    const std::size_t included = sample.points.size() - out.excluded_count;
    if (included == 0) throw numerical_error("every sample point failed");
    for (int n = 1; n <= n_max; ++n) {
        double sum = 0.0;
        for (std::size_t i = 0; i < sample.points.size(); ++i) {
            if (!excluded[i]) sum += out.per_point_log_norms[n - 1][i];
        }
        out.sequence.emplace_back(n, sum / static_cast<double>(included));
    }
    return out;
}

}  // namespace cocycle
