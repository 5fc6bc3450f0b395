#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/coefficient_field.hpp"
#include "cocycle/matrix2.hpp"

namespace cocycle {

// Structural family of a damping/restoring coefficient pair.
//  - general:      no constraint.
//  - frictionless: damping identically zero, so every propagator has unit
//    determinant.
//  - dissipative:  damping certifiably bounded below by a positive constant,
//    so volume contracts along every orbit and the exponent sum is negative.
enum class GeneratorClass { general, frictionless, dissipative };

std::string to_string(GeneratorClass cls);

// A finite piece of a single orbit: { advance(anchor, t) : t in
// [t_begin, t_end] }.  Keeps a handle to its flow so that membership and
// boundary-crossing queries are self-contained.
struct SupportSegment {
    std::shared_ptr<const BaseFlow> flow;
    BasePoint anchor;
    double t_begin = 0.0;
    double t_end = 0.0;

    SupportSegment(std::shared_ptr<const BaseFlow> flow_in, BasePoint anchor_in,
                   double t_begin_in, double t_end_in);

    double duration() const { return t_end - t_begin; }

    // Orbit time u in [t_begin, t_end] with advance(anchor, u) == p within
    // tol in every coordinate, when such a time exists.
    std::optional<double> orbit_time(const BasePoint& p, double tol = 1e-9) const;

    // Times s in [span_lo, span_hi] at which the orbit of `start` crosses a
    // boundary of this segment, i.e. endpoints of the activity intervals of
    // s -> advance(start, s).  Sorted ascending, deduplicated.
    std::vector<double> crossing_times(const BasePoint& start, double span_lo,
                                       double span_hi) const;

    // Activity of the segment at advance(start, s_probe); used to freeze the
    // active-term set on each integration piece between crossings.
    bool active_at(const BasePoint& start, double s_probe) const;
};

// An additive modification of the bottom row of a kinetic generator:
// delta_beta and delta_alpha are added to the restoring and damping
// coefficient fields, either everywhere (no support) or on one orbit
// segment.  As a matrix field the top row is identically zero.
struct BottomRowPerturbation {
    CoefficientField delta_beta;
    CoefficientField delta_alpha;
    std::optional<SupportSegment> support;

    std::string describe() const;
};

// The coefficient matrix A(p) = [[0, 1], [-beta(p), -alpha(p)]] of a damped
// oscillator with base-point-dependent coefficients, together with any
// applied bottom-row modifications.
class KineticGenerator {
public:
    KineticGenerator(CoefficientField alpha, CoefficientField beta,
                     GeneratorClass cls);

    const CoefficientField& alpha() const { return alpha_; }
    const CoefficientField& beta() const { return beta_; }
    GeneratorClass generator_class() const { return cls_; }
    const std::vector<BottomRowPerturbation>& modifications() const {
        return mods_;
    }
    bool has_modifications() const { return !mods_.empty(); }

    // Effective coefficients with all active modifications applied.
    double alpha_value(const BasePoint& p) const;
    double beta_value(const BasePoint& p) const;

    Matrix2 evaluate(const BasePoint& p) const;

    // Same, but with modification activity frozen by the caller (one flag
    // per modification).  Integrators decide activity once per piece between
    // support crossings, so single steps never straddle a boundary test.
    Matrix2 evaluate_masked(const BasePoint& p,
                            const std::vector<char>& active) const;

    // Certified growth constant: sqrt(1 + sup|alpha|^2 + sup|beta|^2) + 1,
    // an upper bound (with margin 1) for the operator norm of the generator
    // anywhere on the torus, modifications included.
    double hat_bound() const;

    // Torus dimension required by the coefficient fields, when any field
    // pins one down.
    std::optional<std::size_t> dimension() const;

    std::string describe() const;

private:
    friend KineticGenerator apply_perturbation(const KineticGenerator&,
                                               const BottomRowPerturbation&);

    CoefficientField alpha_;
    CoefficientField beta_;
    GeneratorClass cls_;
    std::vector<BottomRowPerturbation> mods_;
};

// Uniform distance between two generators: the maximum Frobenius norm of
// A(p) - B(p) over a regular torus grid (resolution points per dimension,
// at least 2) plus probe points along every modification's support segment,
// so that perturbations carried by measure-zero orbit pieces are seen.
// The two named norms coincide for bottom-row differences.
enum class MetricNorm { rho_zero, rho_inf };

double metric_distance(const KineticGenerator& a, const KineticGenerator& b,
                       MetricNorm norm, std::size_t resolution);

// B = A + H.  Preserves A's class tag and rejects modifications that would
// leave the class: any damping change on a frictionless generator, or a
// damping change that destroys a dissipative generator's certified positive
// lower bound.  A supported modification on a periodic flow must be shorter
// than the period, so the segment cannot overlap itself.
KineticGenerator apply_perturbation(const KineticGenerator& a,
                                    const BottomRowPerturbation& h);

// H with B = A + H everywhere (no support).  Defined for modification-free
// generators whose coefficient fields combine exactly.
BottomRowPerturbation generator_difference(const KineticGenerator& b,
                                           const KineticGenerator& a);

}  // namespace cocycle
