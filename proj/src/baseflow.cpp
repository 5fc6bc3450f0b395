#include "cocycle/baseflow.hpp"

#include <cmath>

#include "cocycle/errors.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

BasePoint make_point(std::initializer_list<double> coords) {
    return make_point(std::vector<double>(coords));
}

BasePoint make_point(const std::vector<double>& coords) {
    if (coords.empty() || coords.size() > BasePoint::max_dim)
        throw invalid_input("base point dimension must be in [1, " +
                            std::to_string(BasePoint::max_dim) + "]");
    BasePoint p;
    p.dim = coords.size();
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (!std::isfinite(coords[i]))
            throw invalid_input("base point coordinate is not finite");
        p.coords[i] = wrap_unit(coords[i]);
    }
    return p;
}

double wrap_unit(double x) {
    double f = x - std::floor(x);
    if (f >= 1.0) f = 0.0;  // roundoff when x is a hair below an integer
    return f;
}

double torus_distance(const BasePoint& a, const BasePoint& b) {
    if (a.dim != b.dim)
        throw invalid_input("torus distance between points of different dimension");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.dim; ++i) {
        double d = std::abs(a.coords[i] - b.coords[i]);
        d = std::min(d, 1.0 - d);
        worst = std::max(worst, d);
    }
    return worst;
}

std::vector<BasePoint> BaseFlow::sample(std::size_t count, std::uint64_t seed) const {
    SplitMix64 rng(seed);
    std::vector<BasePoint> points;
    points.reserve(count);
    const std::size_t d = dimension();
    for (std::size_t n = 0; n < count; ++n) {
        BasePoint p;
        p.dim = d;
        for (std::size_t i = 0; i < d; ++i) p.coords[i] = rng.next_double();
        points.push_back(p);
    }
    return points;
}

TorusTranslation::TorusTranslation(std::vector<double> frequencies)
    : freq_(std::move(frequencies)) {
    if (freq_.empty() || freq_.size() > BasePoint::max_dim)
        throw invalid_input("translation flow dimension must be in [1, " +
                            std::to_string(BasePoint::max_dim) + "]");
    bool any_nonzero = false;
    for (double f : freq_) {
        if (!std::isfinite(f)) throw invalid_input("translation frequency is not finite");
        if (f != 0.0) any_nonzero = true;
    }
    if (!any_nonzero)
        throw invalid_input("translation flow requires at least one nonzero frequency");
}

BasePoint TorusTranslation::advance(const BasePoint& p, double t) const {
    if (p.dim != freq_.size())
        throw invalid_input("point dimension does not match flow dimension");
    BasePoint q;
    q.dim = p.dim;
    for (std::size_t i = 0; i < p.dim; ++i)
        q.coords[i] = wrap_unit(p.coords[i] + t * freq_[i]);
    return q;
}

std::optional<double> TorusTranslation::period() const {
    // A one-frequency translation returns to its start after 1/|f|; in
    // higher dimension periodicity depends on rational relations between the
    // frequencies, which we do not attempt to certify.
    if (freq_.size() == 1) return 1.0 / std::abs(freq_[0]);
    return std::nullopt;
}

std::string TorusTranslation::describe() const {
    std::string s = "translation(";
    for (std::size_t i = 0; i < freq_.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(freq_[i]);
    }
    return s + ")";
}

PeriodicSuspension::PeriodicSuspension(double period) : period_(period) {
    if (!(period > 0.0) || !std::isfinite(period))
        throw invalid_input("suspension period must be positive and finite");
}

BasePoint PeriodicSuspension::advance(const BasePoint& p, double t) const {
    if (p.dim != 1)
        throw invalid_input("suspension flow is one-dimensional");
    BasePoint q;
    q.dim = 1;
    q.coords[0] = wrap_unit(p.coords[0] + t / period_);
    return q;
}

std::string PeriodicSuspension::describe() const {
    return "suspension(period=" + std::to_string(period_) + ")";
}

}  // namespace cocycle
