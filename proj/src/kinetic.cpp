#include "cocycle/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cocycle/errors.hpp"

namespace cocycle {

std::string to_string(GeneratorClass cls) {
    switch (cls) {
        case GeneratorClass::general: return "general";
        case GeneratorClass::frictionless: return "frictionless";
        case GeneratorClass::dissipative: return "dissipative";
    }
    return "unknown";
}

namespace {

// Index of the fastest coordinate; candidate orbit times come from solving
// that coordinate and are then verified in all of them.
std::size_t pivot_coordinate(const std::vector<double>& v) {
    std::size_t best = 0;
    double best_abs = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > best_abs) {
            best_abs = std::abs(v[i]);
            best = i;
        }
    }
    if (best_abs == 0.0) {
        throw invalid_input("flow velocity vanishes; orbit queries undefined");
    }
    return best;
}

// All times u in [lo - tol, hi + tol] with advance(anchor, u) == p.  The
// orbit is a straight line, so solutions of the pivot coordinate are
// (p_k - anchor_k + n) / v_k over integers n; each candidate is verified in
// every coordinate.
std::vector<double> orbit_times_in(const BaseFlow& flow, const BasePoint& anchor,
                                   const BasePoint& p, double lo, double hi,
                                   double tol) {
    const std::vector<double> v = flow.velocity();
    const std::size_t k = pivot_coordinate(v);
    const double vk = v[k];
    const double d0 = p[k] - anchor[k];
    // u = (d0 + n) / vk in [lo - tol, hi + tol]
    double n_min = std::min((lo - tol) * vk - d0, (hi + tol) * vk - d0);
    double n_max = std::max((lo - tol) * vk - d0, (hi + tol) * vk - d0);
    std::vector<double> found;
    for (long long n = static_cast<long long>(std::ceil(n_min - 1e-9));
         n <= static_cast<long long>(std::floor(n_max + 1e-9)); ++n) {
        const double u = (d0 + static_cast<double>(n)) / vk;
        if (u < lo - tol || u > hi + tol) continue;
        if (torus_distance(flow.advance(anchor, u), p) <= tol) {
            found.push_back(u);
        }
    }
    std::sort(found.begin(), found.end());
    return found;
}

}  // namespace

SupportSegment::SupportSegment(std::shared_ptr<const BaseFlow> flow_in,
                               BasePoint anchor_in, double t_begin_in,
                               double t_end_in)
    : flow(std::move(flow_in)),
      anchor(anchor_in),
      t_begin(t_begin_in),
      t_end(t_end_in) {
    if (!flow) throw invalid_input("support segment requires a flow");
    if (anchor.dim != flow->dimension()) {
        throw invalid_input("support anchor dimension does not match flow");
    }
    if (!std::isfinite(t_begin) || !std::isfinite(t_end) || !(t_end > t_begin)) {
        throw invalid_input("support segment needs t_end > t_begin, finite");
    }
}

std::optional<double> SupportSegment::orbit_time(const BasePoint& p,
                                                 double tol) const {
    const std::vector<double> times =
        orbit_times_in(*flow, anchor, p, t_begin, t_end, tol);
    if (times.empty()) return std::nullopt;
    return times.front();
}

std::vector<double> SupportSegment::crossing_times(const BasePoint& start,
                                                   double span_lo,
                                                   double span_hi) const {
    if (span_hi < span_lo) std::swap(span_lo, span_hi);
    // Each time c with advance(anchor, c) == start yields the activity
    // interval s in [t_begin - c, t_end - c] for s -> advance(start, s).
    // Relevant offsets satisfy [t_begin - c, t_end - c] meeting the span.
    const double tol = 1e-9;
    std::vector<double> crossings;
    const std::vector<double> offsets = orbit_times_in(
        *flow, anchor, start, t_begin - span_hi, t_end - span_lo, tol);
    for (double c : offsets) {
        for (double edge : {t_begin - c, t_end - c}) {
            if (edge > span_lo + tol && edge < span_hi - tol) {
                crossings.push_back(edge);
            }
        }
    }
    std::sort(crossings.begin(), crossings.end());
    crossings.erase(std::unique(crossings.begin(), crossings.end(),
                                [](double a, double b) {
                                    return std::abs(a - b) < 1e-12;
                                }),
                    crossings.end());
    return crossings;
}

bool SupportSegment::active_at(const BasePoint& start, double s_probe) const {
    return orbit_time(flow->advance(start, s_probe)).has_value();
}

std::string BottomRowPerturbation::describe() const {
    std::ostringstream out;
    out << "delta_beta{" << delta_beta.describe() << "} delta_alpha{"
        << delta_alpha.describe() << "}";
    if (support) {
        out << " on [" << support->t_begin << ", " << support->t_end
            << "] from (";
        for (std::size_t i = 0; i < support->anchor.dim; ++i) {
            if (i) out << ", ";
            out << support->anchor[i];
        }
        out << ")";
    } else {
        out << " everywhere";
    }
    return out.str();
}

namespace {

void check_dimensions_compatible(const std::optional<std::size_t>& a,
                                 const std::optional<std::size_t>& b) {
    if (a && b && *a != *b) {
        throw invalid_input("coefficient fields disagree on torus dimension");
    }
}

}  // namespace

KineticGenerator::KineticGenerator(CoefficientField alpha, CoefficientField beta,
                                   GeneratorClass cls)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), cls_(cls) {
    check_dimensions_compatible(alpha_.dimension(), beta_.dimension());
    if (cls_ == GeneratorClass::frictionless && !alpha_.is_zero()) {
        throw invalid_input(
            "frictionless generator requires identically zero damping");
    }
    if (cls_ == GeneratorClass::dissipative && !(alpha_.inf_bound() > 0.0)) {
        throw invalid_input(
            "dissipative generator requires damping certifiably positive");
    }
}

double KineticGenerator::alpha_value(const BasePoint& p) const {
    double a = alpha_.value(p);
    for (const BottomRowPerturbation& mod : mods_) {
        if (!mod.support || mod.support->orbit_time(p)) {
            a += mod.delta_alpha.value(p);
        }
    }
    return a;
}

double KineticGenerator::beta_value(const BasePoint& p) const {
    double b = beta_.value(p);
    for (const BottomRowPerturbation& mod : mods_) {
        if (!mod.support || mod.support->orbit_time(p)) {
            b += mod.delta_beta.value(p);
        }
    }
    return b;
}

Matrix2 KineticGenerator::evaluate(const BasePoint& p) const {
    return Matrix2{0.0, 1.0, -beta_value(p), -alpha_value(p)};
}

Matrix2 KineticGenerator::evaluate_masked(const BasePoint& p,
                                          const std::vector<char>& active) const {
    if (active.size() != mods_.size()) {
        throw invalid_input("activity mask size does not match modifications");
    }
    double a = alpha_.value(p);
    double b = beta_.value(p);
    for (std::size_t i = 0; i < mods_.size(); ++i) {
        if (active[i]) {
            a += mods_[i].delta_alpha.value(p);
            b += mods_[i].delta_beta.value(p);
        }
    }
    return Matrix2{0.0, 1.0, -b, -a};
}

double KineticGenerator::hat_bound() const {
    double sup_a = alpha_.sup_abs_bound();
    double sup_b = beta_.sup_abs_bound();
    for (const BottomRowPerturbation& mod : mods_) {
        sup_a += mod.delta_alpha.sup_abs_bound();
        sup_b += mod.delta_beta.sup_abs_bound();
    }
    return std::sqrt(1.0 + sup_a * sup_a + sup_b * sup_b) + 1.0;
}

std::optional<std::size_t> KineticGenerator::dimension() const {
    std::optional<std::size_t> d = alpha_.dimension();
    if (!d) d = beta_.dimension();
    for (const BottomRowPerturbation& mod : mods_) {
        for (const auto& delta : {mod.delta_alpha, mod.delta_beta}) {
            check_dimensions_compatible(d, delta.dimension());
            if (!d) d = delta.dimension();
        }
        if (mod.support) {
            const std::size_t flow_dim = mod.support->flow->dimension();
            check_dimensions_compatible(d, flow_dim);
            if (!d) d = flow_dim;
        }
    }
    return d;
}

std::string KineticGenerator::describe() const {
    std::ostringstream out;
    out << to_string(cls_) << " alpha{" << alpha_.describe() << "} beta{"
        << beta_.describe() << "}";
    for (const BottomRowPerturbation& mod : mods_) {
        out << " + " << mod.describe();
    }
    return out.str();
}

double metric_distance(const KineticGenerator& a, const KineticGenerator& b,
                       MetricNorm norm, std::size_t resolution) {
    (void)norm;  // the named norms coincide on bottom-row differences
    if (resolution < 2) {
        throw invalid_input("metric distance needs grid resolution >= 2");
    }
    std::optional<std::size_t> da = a.dimension();
    std::optional<std::size_t> db = b.dimension();
    check_dimensions_compatible(da, db);
    const std::size_t d = da ? *da : (db ? *db : 1);

    double worst = 0.0;
    auto probe = [&](const BasePoint& p) {
        const Matrix2 diff = a.evaluate(p) - b.evaluate(p);
        const double fro = std::sqrt(diff.a * diff.a + diff.b * diff.b +
                                     diff.c * diff.c + diff.d * diff.d);
        worst = std::max(worst, fro);
    };

    // Regular grid over the torus.
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) {
        if (total > 4'000'000 / resolution) {
            throw invalid_input("metric grid is too large");
        }
        total *= resolution;
    }
    BasePoint p;
    p.dim = d;
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (std::size_t i = 0; i < d; ++i) {
            p.coords[i] = static_cast<double>(rest % resolution) /
                          static_cast<double>(resolution);
            rest /= resolution;
        }
        probe(p);
    }

    // Orbit segments carrying modifications have measure zero on tori of
    // dimension >= 2, so sample them explicitly.
    auto probe_support = [&](const KineticGenerator& g) {
        for (const BottomRowPerturbation& mod : g.modifications()) {
            if (!mod.support) continue;
            const SupportSegment& seg = *mod.support;
            const std::size_t n = 256;
            for (std::size_t i = 0; i < n; ++i) {
                const double t =
                    seg.t_begin +
                    seg.duration() * (static_cast<double>(i) + 0.5) /
                        static_cast<double>(n);
                probe(seg.flow->advance(seg.anchor, t));
            }
        }
    };
    probe_support(a);
    probe_support(b);
    return worst;
}

KineticGenerator apply_perturbation(const KineticGenerator& a,
                                    const BottomRowPerturbation& h) {
    check_dimensions_compatible(a.dimension(), h.delta_beta.dimension());
    check_dimensions_compatible(a.dimension(), h.delta_alpha.dimension());
    if (h.support) {
        const std::optional<double> period = h.support->flow->period();
        if (period && !(h.support->duration() < *period)) {
            throw invalid_input(
                "support duration must be shorter than the flow period, or "
                "the segment overlaps itself");
        }
    }
    if (a.generator_class() == GeneratorClass::frictionless &&
        !h.delta_alpha.is_zero()) {
        throw class_violation(
            "damping change would break the frictionless class");
    }
    if (a.generator_class() == GeneratorClass::dissipative) {
        const double floor_after =
            a.alpha().inf_bound() +
            std::min(0.0, h.delta_alpha.is_zero() ? 0.0
                                                  : h.delta_alpha.inf_bound());
        double mods_drop = 0.0;
        for (const BottomRowPerturbation& mod : a.modifications()) {
            mods_drop += std::min(0.0, mod.delta_alpha.is_zero()
                                           ? 0.0
                                           : mod.delta_alpha.inf_bound());
        }
        if (!(floor_after + mods_drop > 0.0)) {
            throw class_violation(
                "damping change would destroy the certified positive lower "
                "bound of the dissipative class");
        }
    }
    KineticGenerator b = a;
    b.mods_.push_back(h);
    return b;
}

BottomRowPerturbation generator_difference(const KineticGenerator& b,
                                           const KineticGenerator& a) {
    if (a.has_modifications() || b.has_modifications()) {
        throw invalid_input(
            "generator difference is defined for modification-free "
            "generators");
    }
    return BottomRowPerturbation{b.beta() - a.beta(), b.alpha() - a.alpha(),
                                 std::nullopt};
}

}  // namespace cocycle
