#include "cocycle/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cocycle/errors.hpp"
#include "cocycle/propagator.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

namespace {

constexpr double kFrameSeedAngle = 0.876;  // fixed generic seed direction
constexpr double kGapTolerance = 2e-2;     // trivial-spectrum resolution

// Fractional parts are keyed in integer "ticks" so map lookups never suffer
// from floating noise; one tick is 2^-40 of a unit interval.
long long frac_ticks(double frac) {
    return static_cast<long long>(std::llround(frac * 1099511627776.0));
}

}  // namespace

OrbitCache::OrbitCache(const KineticGenerator& a, const BaseFlow& flow,
                       const BasePoint& omega, double step, double frame_tail)
    : a_(a),
      flow_(flow),
      omega_(omega),
      step_(step),
      tail_(static_cast<long long>(std::ceil(frame_tail))) {
    if (tail_ < 5) throw invalid_input("frame tail must cover at least 5 units");
}

BasePoint OrbitCache::at(double s) const { return flow_.advance(omega_, s); }

Matrix2 OrbitCache::integrate_leg(double t_from, double t_len) {
    return detail::integrate_core(a_, flow_, at(t_from), t_len, step_).matrix;
}

const Matrix2& OrbitCache::unit_forward(long long j) {
    auto it = fwd_.find(j);
    if (it == fwd_.end()) {
        it = fwd_.emplace(j, integrate_leg(static_cast<double>(j), 1.0)).first;
    }
    return it->second;
}

const Matrix2& OrbitCache::unit_backward(long long j) {
    auto it = bwd_.find(j);
    if (it == bwd_.end()) {
        it = bwd_.emplace(j, integrate_leg(static_cast<double>(j + 1), -1.0))
                 .first;
    }
    return it->second;
}

Matrix2 OrbitCache::fractional_forward(long long j, double frac) {
    if (frac <= 0.0) return Matrix2::identity();
    const auto key = std::make_pair(j, frac_ticks(frac));
    auto it = frac_fwd_.find(key);
    if (it == frac_fwd_.end()) {
        it = frac_fwd_.emplace(key, integrate_leg(static_cast<double>(j), frac))
                 .first;
    }
    return it->second;
}

Matrix2 OrbitCache::fractional_backward(long long j, double frac) {
    if (frac <= 0.0) return Matrix2::identity();
    const auto key = std::make_pair(j, frac_ticks(frac));
    auto it = frac_bwd_.find(key);
    if (it == frac_bwd_.end()) {
        it = frac_bwd_.emplace(key, integrate_leg(static_cast<double>(j), -frac))
                 .first;
    }
    return it->second;
}

ScaledMatrix OrbitCache::product_forward(long long s0, double m) {
    if (m < 0.0) throw invalid_input("product length must be nonnegative");
    long long whole = static_cast<long long>(std::floor(m + 1e-12));
    double frac = m - static_cast<double>(whole);
    if (frac < 1e-12) frac = 0.0;
    ScaledMatrix product;
    for (long long j = 0; j < whole; ++j) {
        product = ScaledMatrix(unit_forward(s0 + j)) * product;
    }
    if (frac > 0.0) {
        product = ScaledMatrix(fractional_forward(s0 + whole, frac)) * product;
    }
    return product;
}

ScaledMatrix OrbitCache::product_backward(long long k, double m) {
    if (m < 0.0) throw invalid_input("product length must be nonnegative");
    long long whole = static_cast<long long>(std::floor(m + 1e-12));
    double frac = m - static_cast<double>(whole);
    if (frac < 1e-12) frac = 0.0;
    // Route from fiber k + m down to fiber k: first the fractional head
    // (k + m -> k + whole), then whole backward unit legs.
    ScaledMatrix product;
    if (frac > 0.0) {
        // Backward leg anchored at k + whole + frac... integrate from the
        // fractional point: U(-frac) at advance(omega, k + whole + frac).
        const Matrix2 head = detail::integrate_core(
                                 a_, flow_, at(static_cast<double>(k + whole) + frac),
                                 -frac, step_)
                                 .matrix;
        product = ScaledMatrix(head);
    }
    for (long long j = whole - 1; j >= 0; --j) {
        product = ScaledMatrix(unit_backward(k + j)) * product;
    }
    return product;
}

Vec2 OrbitCache::direction_fast(long long k) {
    auto it = dir_fast_.find(k);
    if (it != dir_fast_.end()) return it->second;
    // Extend from the highest memoised index below k (whose push window is
    // already long enough), or seed a fresh push tail_ units into the orbit
    // past.  Intermediate directions from a fresh seed are NOT memoised:
    // they have short push windows and are not converged.
    long long start;
    Vec2 v;
    bool converged_from_start;
    auto below = dir_fast_.lower_bound(k);
    if (below != dir_fast_.begin()) {
        --below;
        start = below->first;
        v = below->second;
        converged_from_start = true;
    } else {
        start = k - tail_;
        v = unit_vector(kFrameSeedAngle);
        converged_from_start = false;
    }
    for (long long j = start; j < k; ++j) {
        v = (unit_forward(j) * v).normalized();
        if (converged_from_start || j + 1 >= start + tail_) {
            dir_fast_.emplace(j + 1, v);
        }
    }
    return v;
}

Vec2 OrbitCache::direction_slow(long long k) {
    auto it = dir_slow_.find(k);
    if (it != dir_slow_.end()) return it->second;
    // Mirror image of direction_fast: extend downward from the lowest
    // memoised index above k, or pull a fresh seed back from tail_ units
    // into the orbit future, memoising only converged entries.
    long long start;
    Vec2 v;
    bool converged_from_start;
    auto above = dir_slow_.upper_bound(k);
    if (above != dir_slow_.end()) {
        start = above->first;
        v = above->second;
        converged_from_start = true;
    } else {
        start = k + tail_;
        v = unit_vector(kFrameSeedAngle);
        converged_from_start = false;
    }
    for (long long j = start - 1; j >= k; --j) {
        v = (unit_backward(j) * v).normalized();
        if (converged_from_start || j <= start - tail_) {
            dir_slow_.emplace(j, v);
        }
    }
    return v;
}

std::optional<OseledetsFrame> OrbitCache::frame_at(double s, double min_angle) {
    const long long whole = static_cast<long long>(std::floor(s + 1e-12));
    double frac = s - static_cast<double>(whole);
    if (frac < 1e-12) frac = 0.0;
    Vec2 fast, slow;
    try {
        if (frac == 0.0) {
            fast = direction_fast(whole);
            slow = direction_slow(whole);
        } else {
            fast = (fractional_forward(whole, frac) * direction_fast(whole))
                       .normalized();
            // Pull the slow direction back from the next integer point:
            // the backward leg anchored there, of length 1 - frac, lands
            // exactly on the fractional fiber.
            slow = (fractional_backward(whole + 1, 1.0 - frac) *
                    direction_slow(whole + 1))
                       .normalized();
        }
    } catch (const numerical_error&) {
        return std::nullopt;
    }
    OseledetsFrame frame;
    frame.e1 = sign_normalized(fast);
    frame.e2 = sign_normalized(slow);
    frame.angle = line_angle(frame.e1, frame.e2);
    if (!(frame.angle > min_angle)) return std::nullopt;
    return frame;
}

double domination_ratio(const KineticGenerator& a, const BaseFlow& flow,
                        const BasePoint& omega, double m,
                        const OseledetsFrame& frame, double step) {
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw invalid_input("window length must be positive and finite");
    }
    if (!std::isfinite(frame.e1.x) || !std::isfinite(frame.e1.y) ||
        !std::isfinite(frame.e2.x) || !std::isfinite(frame.e2.y) ||
        !(line_angle(frame.e1, frame.e2) > 1e-3)) {
        throw degenerate_frame("frame directions are too close to measure a "
                               "contraction ratio");
    }
    OrbitCache cache(a, flow, omega, step);
    const ScaledMatrix u = cache.product_forward(0, m);
    const double log_ratio = u.log_norm_applied(frame.e2.normalized()) -
                             u.log_norm_applied(frame.e1.normalized());
    return std::exp(log_ratio);
}

namespace {

DominationReport splitting_scan(const KineticGenerator& a, const BaseFlow& flow,
                                const BasePoint& omega, double m, double step) {
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw invalid_input("window length must be positive and finite");
    }
    DominationReport report;
    report.m = m;
    report.omega = omega;
    report.ratio_max = 0.0;

    const double window = std::max(4.0 * m, 20.0);
    const long long k_max = static_cast<long long>(std::floor(window - m));

    OrbitCache cache(a, flow, omega, step);
    const double log_half = std::log(0.5);
    bool all_dominated = true;
    bool all_hyperbolic = true;
    int usable = 0;
    for (long long k = 0; k <= k_max; ++k) {
        ++report.window_points;
        const std::optional<OseledetsFrame> frame =
            cache.frame_at(static_cast<double>(k));
        const std::optional<OseledetsFrame> frame_ahead =
            cache.frame_at(static_cast<double>(k) + m);
        if (!frame || !frame_ahead) {
            ++report.degenerate_points;
            continue;
        }
        ++usable;
        if (k == 0) report.frame = frame;

        const ScaledMatrix fwd = cache.product_forward(k, m);
        const double log_slow = fwd.log_norm_applied(frame->e2);
        const double log_fast = fwd.log_norm_applied(frame->e1);
        const double ratio = std::exp(log_slow - log_fast);
        report.ratio_max = std::max(report.ratio_max, ratio);
        if (!(ratio <= 0.5)) all_dominated = false;

        const ScaledMatrix bwd = cache.product_backward(k, m);
        const double log_contract = log_slow;  // forward leg on the slow line
        const double log_expand_inverse =
            bwd.log_norm_applied(frame_ahead->e1);
        if (!(log_contract <= log_half) || !(log_expand_inverse <= log_half)) {
            all_hyperbolic = false;
        }
    }
    report.resolved = usable * 2 >= report.window_points && usable > 0;
    report.dominated = report.resolved && all_dominated;
    report.hyperbolic = report.resolved && all_hyperbolic;
    return report;
}

}  // namespace

DominationReport is_m_dominated(const KineticGenerator& a, const BaseFlow& flow,
                                const BasePoint& omega, double m, double step) {
    return splitting_scan(a, flow, omega, m, step);
}

DominationReport is_m_hyperbolic(const KineticGenerator& a, const BaseFlow& flow,
                                 const BasePoint& omega, double m, double step) {
    return splitting_scan(a, flow, omega, m, step);
}

const char* to_string(SampleVerdict v) {
    switch (v) {
        case SampleVerdict::trivial_spectrum: return "trivial_spectrum";
        case SampleVerdict::dominated: return "dominated";
        case SampleVerdict::undominated_simple: return "undominated_simple";
        case SampleVerdict::unresolved: return "unresolved";
    }
    return "unknown";
}

const char* to_string(FrictionlessVerdict v) {
    switch (v) {
        case FrictionlessVerdict::zero_spectrum: return "zero_spectrum";
        case FrictionlessVerdict::hyperbolic: return "hyperbolic";
        case FrictionlessVerdict::neither: return "neither";
    }
    return "unknown";
}

const char* to_string(DissipativeVerdict v) {
    switch (v) {
        case DissipativeVerdict::stable_trivial: return "stable_trivial";
        case DissipativeVerdict::stable_dominated: return "stable_dominated";
        case DissipativeVerdict::unstable_dominated: return "unstable_dominated";
        case DissipativeVerdict::unresolved: return "unresolved";
    }
    return "unknown";
}

namespace {

template <typename VerdictT, typename PerPoint>
Classification<VerdictT> classify_core(const KineticGenerator& a,
                                       const BaseFlow& flow,
                                       const SampleSet& sample, double m,
                                       double horizon, double step,
                                       std::size_t verdict_count,
                                       PerPoint per_point) {
    if (sample.points.empty()) throw invalid_input("empty sample");
    Classification<VerdictT> out;
    out.m = m;
    std::vector<std::size_t> counts(verdict_count, 0);
    for (std::size_t i = 0; i < sample.points.size(); ++i) {
        const LyapunovEstimate est =
            full_spectrum(a, flow, sample.points[i], horizon, 1.0, step,
                          derive_seed(sample.seed, i));
        ClassifiedPoint<VerdictT> point;
        point.omega = sample.points[i];
        point.lambda1 = est.lambda1;
        point.lambda2 = est.lambda2;
        point.ratio = std::numeric_limits<double>::quiet_NaN();
        point.verdict = per_point(sample.points[i], est, point.ratio);
        ++counts[static_cast<std::size_t>(point.verdict)];
        out.points.push_back(point);
    }
    out.fractions.resize(verdict_count);
    for (std::size_t v = 0; v < verdict_count; ++v) {
        out.fractions[v] = static_cast<double>(counts[v]) /
                           static_cast<double>(sample.points.size());
    }
    return out;
}

}  // namespace

Classification<SampleVerdict> classify_sample(const KineticGenerator& a,
                                              const BaseFlow& flow,
                                              const SampleSet& sample, double m,
                                              double horizon, double step) {
    return classify_core<SampleVerdict>(
        a, flow, sample, m, horizon, step, 4,
        [&](const BasePoint& omega, const LyapunovEstimate& est,
            double& ratio) {
            if (est.lambda1 - est.lambda2 < kGapTolerance) {
                return SampleVerdict::trivial_spectrum;
            }
            const DominationReport report =
                is_m_dominated(a, flow, omega, m, step);
            ratio = report.ratio_max;
            if (!report.resolved) return SampleVerdict::unresolved;
            return report.dominated ? SampleVerdict::dominated
                                    : SampleVerdict::undominated_simple;
        });
}

Classification<FrictionlessVerdict> classify_frictionless(
    const KineticGenerator& a, const BaseFlow& flow, const SampleSet& sample,
    double m, double horizon, double step) {
    if (a.generator_class() != GeneratorClass::frictionless) {
        throw invalid_input("generator is not frictionless");
    }
    return classify_core<FrictionlessVerdict>(
        a, flow, sample, m, horizon, step, 3,
        [&](const BasePoint& omega, const LyapunovEstimate& est,
            double& ratio) {
            if (std::abs(est.lambda1) < kGapTolerance) {
                return FrictionlessVerdict::zero_spectrum;
            }
            const DominationReport report =
                is_m_hyperbolic(a, flow, omega, m, step);
            ratio = report.ratio_max;
            return report.hyperbolic ? FrictionlessVerdict::hyperbolic
                                     : FrictionlessVerdict::neither;
        });
}

Classification<DissipativeVerdict> classify_dissipative(
    const KineticGenerator& a, const BaseFlow& flow, const SampleSet& sample,
    double m, double horizon, double step) {
    if (a.generator_class() != GeneratorClass::dissipative) {
        throw invalid_input("generator is not dissipative");
    }
    const double damping_floor = a.alpha().inf_bound();
    return classify_core<DissipativeVerdict>(
        a, flow, sample, m, horizon, step, 4,
        [&](const BasePoint& omega, const LyapunovEstimate& est,
            double& ratio) {
            if (est.lambda1 + est.lambda2 > -damping_floor + kGapTolerance) {
                throw invariant_violation(
                    "exponent sum exceeds the certified damping bound; the "
                    "integration is not trustworthy");
            }
            if (est.lambda1 - est.lambda2 < kGapTolerance) {
                return est.lambda1 < 0.0 ? DissipativeVerdict::stable_trivial
                                         : DissipativeVerdict::unresolved;
            }
            const DominationReport report =
                is_m_dominated(a, flow, omega, m, step);
            ratio = report.ratio_max;
            if (!report.dominated) return DissipativeVerdict::unresolved;
            return est.lambda1 < 0.0 ? DissipativeVerdict::stable_dominated
                                     : DissipativeVerdict::unstable_dominated;
        });
}

}  // namespace cocycle
