#pragma once

#include "cocycle/baseflow.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/matrix2.hpp"

namespace cocycle {

// Fundamental solution over one time interval along one orbit, with a
// certified worst-case integration error bound.  base_point is the orbit
// point at t_start and end_point the one at t_end; t_end < t_start encodes a
// backward leg.
struct Propagator2 {
    Matrix2 matrix = Matrix2::identity();
    double t_start = 0.0;
    double t_end = 0.0;
    BasePoint base_point;
    BasePoint end_point;
    double error_bound = 0.0;

    double duration() const { return t_end - t_start; }
};

// Matrix solution over [0, t] (t of either sign) of U' = A(orbit(u)) U with
// U(0) = I, by fixed-step classical fourth-order integration; the last step
// is shortened to land exactly on t.  Supported modifications of A are
// resolved into integration pieces split at support crossings.  Any state
// entry exceeding 1e12 in magnitude, or losing finiteness, aborts the run
// with the failure time attached.
Propagator2 propagate(const KineticGenerator& a, const BaseFlow& flow,
                      const BasePoint& omega, double t, double step);

// Same solution over [t0, t1] along the orbit of omega (stamps kept in
// orbit time, base point advance(omega, t0)), for building abutting legs.
Propagator2 segment(const KineticGenerator& a, const BaseFlow& flow,
                    const BasePoint& omega, double t0, double t1, double step);

// Chain rule for abutting legs: left must start where right ends, in both
// time stamp (within 1e-9) and orbit position (within 1e-9).  Error bounds
// add.
Propagator2 cocycle_compose(const Propagator2& left, const Propagator2& right);

// |log det U(t) - integral of the generator trace along the orbit|, the
// volume-change defect of one integration run.  The trace integral uses the
// same evaluation grid as the integrator.
double liouville_check(const KineticGenerator& a, const BaseFlow& flow,
                       const BasePoint& omega, double t, double step);

// Largest tau in (0, 1/2) with tau^2 * a_hat * exp(a_hat * tau) < eps,
// located by bisection; requires 0 < eps < 1/2.  Used to pick observation
// windows short enough that the solution stays near the identity.
double small_time_bracket(double a_hat, double eps);
double small_time_bracket(const KineticGenerator& a, double eps);

namespace detail {

// Shared integration core: U over [0, |t|] in reversed-or-forward clock,
// with the trace of the evaluated right-hand side accumulated by Simpson's
// rule on the stage grid.  log det U(t) equals trace_integral exactly in
// exact arithmetic, for either sign of t.
struct CoreResult {
    Matrix2 matrix;
    double trace_integral;
};

CoreResult integrate_core(const KineticGenerator& a, const BaseFlow& flow,
                          const BasePoint& start, double t, double step);

}  // namespace detail

}  // namespace cocycle
