#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/matrix2.hpp"

namespace cocycle {

// A reproducible batch of base points drawn from the invariant measure.
struct SampleSet {
    std::vector<BasePoint> points;
    std::uint64_t seed = 0;
};

SampleSet sample_measure(const BaseFlow& flow, std::size_t count,
                         std::uint64_t seed);

// One Lyapunov estimation run.  history holds (time, running top exponent)
// after each renormalisation past the burn-in; trace_average is the
// time-average of the generator trace over the full horizon, which equals
// lambda1 + lambda2 up to integration error.
struct LyapunovEstimate {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double horizon = 0.0;
    double renorm_interval = 0.0;
    double trace_average = 0.0;
    bool converged = false;
    std::vector<std::pair<double, double>> history;
};

// Top exponent by the standard push-and-renormalise walk: a seeded random
// unit vector is propagated in legs of length renorm, renormalised after
// each leg, with log-growth accumulated only after a burn-in of a quarter
// horizon so the vector first aligns with the fastest direction.
// lambda2 is left unset (NaN).  Requires horizon >= 10 * renorm and
// renorm in [0.1, 10].
LyapunovEstimate top_exponent(const KineticGenerator& a, const BaseFlow& flow,
                              const BasePoint& omega, double horizon,
                              double renorm, double step,
                              std::uint64_t seed = 0x5eedbead);

// Both exponents: the top one as above, the second from the volume identity
// lambda1 + lambda2 = time-average of the generator trace.  Results are
// ordered lambda1 >= lambda2.
LyapunovEstimate full_spectrum(const KineticGenerator& a, const BaseFlow& flow,
                               const BasePoint& omega, double horizon,
                               double renorm, double step,
                               std::uint64_t seed = 0x5eedbead);

// Sign-normalised unit directions of the fast (e1) and slow (e2) invariant
// lines at one base point, with the angle between them in (0, pi/2].
struct OseledetsFrame {
    Vec2 e1;
    Vec2 e2;
    double angle = 0.0;
};

// Invariant directions at omega: e1 as the image direction of a generic
// vector pushed forward from a point far in the orbit past, e2 as the image
// of one pulled backward from far in the orbit future.  Returns nullopt when
// the measured spectrum gap is below 1e-2 or the two directions are closer
// than 1e-3, i.e. when no trustworthy splitting exists at this resolution.
std::optional<OseledetsFrame> oseledets_directions(const KineticGenerator& a,
                                                   const BaseFlow& flow,
                                                   const BasePoint& omega,
                                                   double horizon, double step);

// Top exponent averaged over a sample of base points (the integrated
// functional whose value upper-semicontinuity arguments bound).  Points
// whose run fails numerically are excluded; more than 10% exclusions is an
// error.
struct LEFunctionalEstimate {
    double value = 0.0;
    std::vector<double> per_point;       // NaN at excluded points
    std::size_t excluded_count = 0;
};

LEFunctionalEstimate le_functional(const KineticGenerator& a,
                                   const BaseFlow& flow, const SampleSet& sample,
                                   double horizon, double renorm, double step);

// The subadditive sequence a_n = mean over the sample of log ||U(n, omega)||
// for n = 1..n_max, built from unit-time legs so that long products cannot
// overflow.  per_point_log_norms[n-1][i] is point i's log norm at time n.
struct FeketeSequence {
    std::vector<std::pair<int, double>> sequence;  // (n, a_n)
    std::vector<std::vector<double>> per_point_log_norms;
    std::size_t excluded_count = 0;
};

FeketeSequence fekete_sequence(const KineticGenerator& a, const BaseFlow& flow,
                               const SampleSet& sample, int n_max, double step);

// Shared helper: sign normalisation makes the first component of magnitude
// above 1e-14 positive, fixing one representative per line.
Vec2 sign_normalized(Vec2 v);

}  // namespace cocycle
