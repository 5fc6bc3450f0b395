#pragma once

#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/matrix2.hpp"
#include "cocycle/spectrum.hpp"

namespace cocycle {

// Memoised propagators and invariant directions along one orbit, on the
// integer grid.  All long products are assembled from unit-time legs in
// scaled form, so window scans never overflow no matter the exponents.
// Directions are grown incrementally: each additional request extends the
// push window, never shrinks it.
class OrbitCache {
public:
    OrbitCache(const KineticGenerator& a, const BaseFlow& flow,
               const BasePoint& omega, double step, double frame_tail = 40.0);

    const BasePoint& origin() const { return omega_; }
    BasePoint at(double s) const;

    // Unit legs: forward maps the fiber at s = j to s = j + 1; backward maps
    // s = j + 1 to s = j (integrated in reversed time, never inverted).
    const Matrix2& unit_forward(long long j);
    const Matrix2& unit_backward(long long j);

    // Fractional legs anchored at integer points.
    Matrix2 fractional_forward(long long j, double frac);   // fiber j -> j+frac
    Matrix2 fractional_backward(long long j, double frac);  // fiber j -> j-frac

    // Scaled propagator over [s0, s0 + m] (m >= 0) with s0 integer.
    ScaledMatrix product_forward(long long s0, double m);
    // Scaled propagator over [s1, s1 - m] (m >= 0) with s1 = k + m for
    // integer k: the inverse route of product_forward(k, m), integrated
    // backward.
    ScaledMatrix product_backward(long long k, double m);

    // Fast / slow invariant directions at integer or fractional orbit times.
    Vec2 direction_fast(long long k);
    Vec2 direction_slow(long long k);
    std::optional<OseledetsFrame> frame_at(double s, double min_angle = 1e-3);

private:
    const KineticGenerator& a_;
    const BaseFlow& flow_;
    BasePoint omega_;
    double step_;
    long long tail_;

    std::map<long long, Matrix2> fwd_;
    std::map<long long, Matrix2> bwd_;
    std::map<std::pair<long long, long long>, Matrix2> frac_fwd_;  // (j, frac ticks)
    std::map<std::pair<long long, long long>, Matrix2> frac_bwd_;
    std::map<long long, Vec2> dir_fast_;
    std::map<long long, Vec2> dir_slow_;

    Matrix2 integrate_leg(double t_from, double t_len);
};

// Largest over-the-window contraction ratio ||U(m) e_slow|| / ||U(m) e_fast||
// at one point, for a caller-supplied frame.  Throws when the frame is
// degenerate (angle below 1e-3 or non-finite directions).
double domination_ratio(const KineticGenerator& a, const BaseFlow& flow,
                        const BasePoint& omega, double m,
                        const OseledetsFrame& frame, double step);

// One splitting scan along a window of the orbit of omega.
struct DominationReport {
    double m = 0.0;
    double ratio_max = 0.0;   // largest slow/fast ratio seen in the window
    bool dominated = false;   // every ratio <= 1/2
    bool hyperbolic = false;  // slow contracts and fast inverse-contracts by 1/2
    bool resolved = false;    // at least half the window had usable frames
    std::optional<OseledetsFrame> frame;  // frame at the window start
    BasePoint omega;
    int window_points = 0;
    int degenerate_points = 0;
};

// Window scan deciding m-step domination: at integer window offsets k in
// [0, W - m], W = max(4m, 20), the slow direction's growth under U(m, x_k)
// must fall to at most half the fast direction's.  m may be any positive
// real.
DominationReport is_m_dominated(const KineticGenerator& a, const BaseFlow& flow,
                                const BasePoint& omega, double m, double step);

// Window scan deciding m-step uniform hyperbolicity: along the same window,
// ||U(m, x_k) e_slow(x_k)|| <= 1/2 and ||U(-m, x_{k+m}) e_fast(x_{k+m})|| <=
// 1/2 (the inverse leg integrated backward).
DominationReport is_m_hyperbolic(const KineticGenerator& a, const BaseFlow& flow,
                                 const BasePoint& omega, double m, double step);

// Per-point verdicts over a sample, with the exponent estimates that led to
// them.
enum class SampleVerdict { trivial_spectrum, dominated, undominated_simple, unresolved };
enum class FrictionlessVerdict { zero_spectrum, hyperbolic, neither };
enum class DissipativeVerdict {
    stable_trivial,
    stable_dominated,
    unstable_dominated,
    unresolved
};

const char* to_string(SampleVerdict v);
const char* to_string(FrictionlessVerdict v);
const char* to_string(DissipativeVerdict v);

template <typename VerdictT>
struct ClassifiedPoint {
    BasePoint omega;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double ratio = 0.0;  // worst window ratio (NaN when no scan ran)
    VerdictT verdict{};
};

template <typename VerdictT>
struct Classification {
    std::vector<ClassifiedPoint<VerdictT>> points;
    double m = 0.0;
    // Fraction of the sample per verdict, in enum declaration order.
    std::vector<double> fractions;
};

// General classification: trivial spectrum when the measured gap is below
// 2e-2, else dominated / undominated_simple by the window scan, with
// unresolved reserved for windows whose frames mostly degenerate.
Classification<SampleVerdict> classify_sample(const KineticGenerator& a,
                                              const BaseFlow& flow,
                                              const SampleSet& sample, double m,
                                              double horizon, double step);

// Frictionless generators: symmetric spectrum, so the verdict is zero
// spectrum versus uniform hyperbolicity, with a catch-all for points fitting
// neither at this resolution.
Classification<FrictionlessVerdict> classify_frictionless(
    const KineticGenerator& a, const BaseFlow& flow, const SampleSet& sample,
    double m, double horizon, double step);

// Dissipative generators: the exponent sum must stay below the certified
// damping bound (violations abort — they signal integrator failure, not
// dynamics), and verdicts split by the sign of the top exponent.
Classification<DissipativeVerdict> classify_dissipative(
    const KineticGenerator& a, const BaseFlow& flow, const SampleSet& sample,
    double m, double horizon, double step);

}  // namespace cocycle
