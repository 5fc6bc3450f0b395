#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/matrix2.hpp"
#include "cocycle/propagator.hpp"
#include "cocycle/splitting.hpp"
#include "cocycle/spectrum.hpp"

namespace cocycle {

// ----- Elementary building blocks ---------------------------------------

// A constant bottom-left shear acting over a bounded window.
struct ShearSpec {
    double xi = 0.0;
    double duration = 0.0;
};

// Closed-form solution of the pure shear block: S(t) = [[1, 0], [xi t, 1]].
Matrix2 shear_solution(const ShearSpec& spec, double t);

// Worst-case line-rotation angle produced through a vertical cone of
// half-slope gamma by a shear of strength xi acting for time t:
// theta = arccos((1 + g) / sqrt((1 + g)^2 + (t xi)^2 (gamma^2 / (1+gamma^2))^2))
// with g = gamma^2 / (1 + gamma^2) scaled into the exact closed form below.
// Arguments leaving the arccos domain by more than roundoff are an error.
double angle_theta(double t, double gamma, double xi);

// The shear generator conjugated into the frame moving with the unperturbed
// solution: M_xi(t) = U(t)^-1 [[0,0],[xi,0]] U(t).  Trace and determinant
// vanish identically.
Matrix2 conjugated_generator(const KineticGenerator& a, const BaseFlow& flow,
                             const BasePoint& omega, double xi, double t,
                             double step);

// Relative rotation factor R(tau) with U_B(tau) = U_A(tau) R(tau), for the
// bottom-left shear of strength xi supported on [0, tau], tau in (0, 1].
// R solves R' = M_xi(t) R from the identity; det R stays within 1e-8 of 1.
Propagator2 rotation_solution(const KineticGenerator& a, const BaseFlow& flow,
                              const BasePoint& omega, double xi, double tau,
                              double step);

// Factorisation residual || U_B(tau) - U_A(tau) R(tau) || (Frobenius) for
// B = A + bottom-left shear xi supported on [0, tau]: the two sides are
// computed independently, so the residual measures integrator consistency
// with the exact factorisation identity.
double composed_propagator(const KineticGenerator& a,
                           std::shared_ptr<const BaseFlow> flow,
                           const BasePoint& omega, double xi, double tau,
                           double step);

// ----- Vertical cones and escape ----------------------------------------

// Central vertical cone |v_x| < gamma |v_y| (open).
struct ConeSpec {
    double gamma = 0.0;
    bool contains(Vec2 v) const;
};

struct EscapeResult {
    bool escaped = false;
    std::optional<double> exit_time;  // first grid time outside the cone
};

// Propagates v from omega over [0, tau_hat] and reports whether the image
// leaves the cone.  Requires v inside the cone and tau_hat in (0, 1/2).
EscapeResult cone_escape(const KineticGenerator& a, const BaseFlow& flow,
                         const BasePoint& omega, double gamma, Vec2 v,
                         double tau_hat, double step);

// Cone parameter and observation time for which every cone vector's image
// at tau_hat has certifiably left the cone.
struct ConeChoice {
    double gamma = 0.0;
    double tau_hat = 0.0;
};

ConeChoice choose_cone_gamma(const KineticGenerator& a, double eps);

// ----- Certified rotation context ----------------------------------------

// Everything a rotation construction needs that depends only on (A, eps):
// cone geometry, window lengths, and the certified/empirical angle budgets.
struct ToolboxContext {
    double epsilon = 0.0;
    double gamma = 0.0;     // cone half-slope
    double tau_hat = 0.0;   // cone escape time
    double tau_tilde = 0.0; // rotation window length
    double ell = 0.0;       // entry bound used by the cone certificate
    double theta0 = 0.0;    // empirical both-escape half-angle
    double theta1 = 0.0;    // certified worst-case window rotation

    // Conditioning-aware certified budget at a point whose escape-time
    // propagator has condition number kappa.
    double theta2_at(double kappa) const;
    double budget_at(double kappa) const;
};

ToolboxContext make_toolbox_context(const KineticGenerator& a,
                                    const BaseFlow& flow, double eps,
                                    double step,
                                    std::uint64_t trial_seed = 0xc0c1c2c3);

// ----- Perturbation plans -------------------------------------------------

// One shear window: a constant bottom-left shear of strength xi acting on
// the orbit piece [t_start, t_start + duration] of the plan's anchor point.
struct PlanSegment {
    double t_start = 0.0;
    double duration = 0.0;
    double xi = 0.0;
};

struct PerturbationPlan {
    BasePoint anchor;
    std::vector<PlanSegment> segments;
    std::string target;          // what the plan was built to achieve
    double residual = 0.0;       // verified accuracy of the construction
    double theta_budget = 0.0;   // certified per-window budget reported
    std::vector<std::string> audit;  // construction record, one line each

    double size() const;  // max |xi| over segments = uniform distance to A

    void serialize(std::ostream& out) const;
};

// Realise a plan as a perturbed generator (one bottom-row modification per
// window).
KineticGenerator apply_plan(const KineticGenerator& a,
                            std::shared_ptr<const BaseFlow> flow,
                            const PerturbationPlan& plan);

// ----- Direction steering -------------------------------------------------

struct RotationOutcome {
    KineticGenerator b;
    PerturbationPlan plan;
    double theta_budget = 0.0;
    double residual = 0.0;  // achieved line angle to the target after 1 unit
};

// A size-eps perturbation supported on one window inside [0, 1] whose time-1
// propagator sends the line of u where the unperturbed one sends the line of
// v.  Vectors inside the cone are first coasted to its exterior over
// tau_hat.  Feasibility is decided by bracketing the reachable arc of shear
// strengths in [-eps/2, eps/2]; the certified budgets are reported alongside.
RotationOutcome rotate_direction(const KineticGenerator& a,
                                 std::shared_ptr<const BaseFlow> flow,
                                 const BasePoint& omega, Vec2 u, Vec2 v,
                                 double eps, double step,
                                 const ToolboxContext* ctx = nullptr);

struct SwapOutcome {
    KineticGenerator b;
    PerturbationPlan plan;
    double residual = 0.0;  // angle of the steered image to the contracting line
};

// A chain of m unit-time rotations carrying the expanding invariant line
// onto the contracting one: after the perturbation, the image of the
// expanding line at omega lies within 1e-4 (angle) of the contracting line
// at the window end.  The construction only works on windows where the
// contracting line keeps pace with the expanding one (growth ratio at least
// 1/2 over the window); on dominated windows the per-unit rotations are
// pulled back toward the expanding line faster than the strength budget
// pushes them away, and the attempt is reported infeasible with the
// arithmetic instead of silently failing.
SwapOutcome swap_oseledets(const KineticGenerator& a,
                           std::shared_ptr<const BaseFlow> flow,
                           const BasePoint& omega, int m, double eps,
                           double step, const ToolboxContext* ctx = nullptr);

// ----- Exponent mixing ----------------------------------------------------

struct MixingOutcome {
    KineticGenerator b;
    PerturbationPlan plan;
    double finite_time_exponent = 0.0;  // log sigma_1(U_B(tau)) / tau
    double lambda1 = 0.0;               // unperturbed estimates at omega
    double lambda2 = 0.0;
    bool converged = false;
};

// A size-eps perturbation supported on one exchange window near the middle
// of the orbit piece [0, tau] that collapses the finite-time top exponent
// toward the exponent average: inside the window the expanding line is
// steered onto the contracting one, so every direction rides the fast
// growth on at most one half of the horizon and the slow decay on the
// other, and the two halves cancel.  The window start is searched across
// the middle band of the horizon for a stretch where the exchange is
// feasible; if none exists the failure is reported with the scan summary.
MixingOutcome mixing_perturbation(const KineticGenerator& a,
                                  std::shared_ptr<const BaseFlow> flow,
                                  const BasePoint& omega, double tau,
                                  double eps, double step,
                                  const ToolboxContext* ctx = nullptr);

// ----- Sample-wide sweep --------------------------------------------------

struct GlobalSweepOutcome {
    Classification<SampleVerdict> classification;
    std::vector<std::optional<PerturbationPlan>> plans;  // per sample point
    std::vector<double> exponent_after;                  // per sample point
    double le_before = 0.0;
    double le_after = 0.0;
    std::size_t eligible = 0;
    std::size_t infeasible = 0;
};

// Classifies the sample and applies a mixing perturbation at every point
// with simple undominated spectrum, reporting the averaged top exponent
// before and after.  Fails when more than 20% of eligible points turn out
// infeasible.
GlobalSweepOutcome global_mixing_sweep(const KineticGenerator& a,
                                       std::shared_ptr<const BaseFlow> flow,
                                       const SampleSet& sample, double m,
                                       double tau, double eps, double step);

}  // namespace cocycle
