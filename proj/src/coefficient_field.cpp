#include "cocycle/coefficient_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cocycle/errors.hpp"

namespace cocycle {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
}

// Fold wave-zero harmonics into the constant term and merge harmonics with
// identical wave vectors so the certified amplitude bound stays tight.
void normalize_trig(double& constant_term, std::vector<TrigTerm>& terms) {
    std::vector<TrigTerm> merged;
    for (const TrigTerm& t : terms) {
        if (t.wave.empty()) {
            throw invalid_input("trigonometric term needs a wave vector");
        }
        if (!std::isfinite(t.amp_cos) || !std::isfinite(t.amp_sin)) {
            throw invalid_input("trigonometric amplitudes must be finite");
        }
        const bool zero_wave = std::all_of(t.wave.begin(), t.wave.end(),
                                           [](int k) { return k == 0; });
        if (zero_wave) {
            constant_term += t.amp_cos;  // sin part vanishes identically
            continue;
        }
        auto same = std::find_if(merged.begin(), merged.end(),
                                 [&](const TrigTerm& m) { return m.wave == t.wave; });
        if (same != merged.end()) {
            same->amp_cos += t.amp_cos;
            same->amp_sin += t.amp_sin;
        } else {
            merged.push_back(t);
        }
    }
    for (const TrigTerm& t : merged) {
        if (t.wave.size() != merged.front().wave.size()) {
            throw invalid_input("trigonometric terms disagree on dimension");
        }
    }
    terms = std::move(merged);
}

}  // namespace

CoefficientField CoefficientField::constant(double value) {
    if (!std::isfinite(value)) {
        throw invalid_input("constant coefficient must be finite");
    }
    return CoefficientField(ConstantData{value});
}

CoefficientField CoefficientField::trig_polynomial(double constant_term,
                                                   std::vector<TrigTerm> terms) {
    if (!std::isfinite(constant_term)) {
        throw invalid_input("constant term must be finite");
    }
    normalize_trig(constant_term, terms);
    if (terms.empty()) {
        return constant(constant_term);
    }
    if (terms.front().wave.size() > BasePoint::max_dim) {
        throw invalid_input("wave vector dimension exceeds supported maximum");
    }
    return CoefficientField(TrigData{constant_term, std::move(terms)});
}

CoefficientField CoefficientField::grid_interpolated(std::vector<std::size_t> shape,
                                                     std::vector<double> values) {
    if (shape.empty() || shape.size() > BasePoint::max_dim) {
        throw invalid_input("grid dimension must be between 1 and 8");
    }
    std::size_t total = 1;
    for (std::size_t n : shape) {
        if (n < 2) {
            throw invalid_input("grid needs at least two nodes per dimension");
        }
        if (total > (std::size_t{1} << 24) / n) {
            throw invalid_input("grid is too large");
        }
        total *= n;
    }
    if (values.size() != total) {
        throw invalid_input("grid value count does not match shape");
    }
    if (!all_finite(values)) {
        throw invalid_input("grid values must be finite");
    }
    return CoefficientField(GridData{std::move(shape), std::move(values)});
}

CoefficientField::Kind CoefficientField::kind() const {
    if (std::holds_alternative<ConstantData>(data_)) return Kind::constant;
    if (std::holds_alternative<TrigData>(data_)) return Kind::trig_polynomial;
    return Kind::grid_interpolated;
}

std::optional<std::size_t> CoefficientField::dimension() const {
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        return t->terms.front().wave.size();
    }
    if (const auto* g = std::get_if<GridData>(&data_)) {
        return g->shape.size();
    }
    return std::nullopt;
}

double CoefficientField::value(const BasePoint& p) const {
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        return c->value;
    }
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        const std::size_t d = t->terms.front().wave.size();
        if (p.dim != d) {
            throw invalid_input("field dimension does not match base point");
        }
        double sum = t->constant_term;
        for (const TrigTerm& term : t->terms) {
            double phase = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                phase += term.wave[i] * p[i];
            }
            phase *= 2.0 * std::numbers::pi;
            sum += term.amp_cos * std::cos(phase) + term.amp_sin * std::sin(phase);
        }
        return sum;
    }
    const auto& g = std::get<GridData>(data_);
    const std::size_t d = g.shape.size();
    if (p.dim != d) {
        throw invalid_input("field dimension does not match base point");
    }
    // Periodic multilinear interpolation: corner (i+b) wraps modulo shape.
    std::vector<std::size_t> base(d);
    std::vector<double> frac(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double x = wrap_unit(p[i]) * static_cast<double>(g.shape[i]);
        double cell = std::floor(x);
        if (cell >= static_cast<double>(g.shape[i])) cell = 0.0;
        base[i] = static_cast<std::size_t>(cell);
        frac[i] = x - cell;
    }
    double sum = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
        double weight = 1.0;
        std::size_t index = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const bool hi = (corner >> i) & 1u;
            weight *= hi ? frac[i] : 1.0 - frac[i];
            const std::size_t node = (base[i] + (hi ? 1 : 0)) % g.shape[i];
            index = index * g.shape[i] + node;
        }
        sum += weight * g.values[index];
    }
    return sum;
}

double CoefficientField::sup_bound() const {
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        return c->value;
    }
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        double amp = 0.0;
        for (const TrigTerm& term : t->terms) {
            amp += std::hypot(term.amp_cos, term.amp_sin);
        }
        return t->constant_term + amp;
    }
    const auto& g = std::get<GridData>(data_);
    return *std::max_element(g.values.begin(), g.values.end());
}

double CoefficientField::inf_bound() const {
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        return c->value;
    }
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        double amp = 0.0;
        for (const TrigTerm& term : t->terms) {
            amp += std::hypot(term.amp_cos, term.amp_sin);
        }
        return t->constant_term - amp;
    }
    const auto& g = std::get<GridData>(data_);
    return *std::min_element(g.values.begin(), g.values.end());
}

double CoefficientField::sup_abs_bound() const {
    return std::max(std::abs(sup_bound()), std::abs(inf_bound()));
}

bool CoefficientField::is_zero() const {
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        return c->value == 0.0;
    }
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        if (t->constant_term != 0.0) return false;
        return std::all_of(t->terms.begin(), t->terms.end(), [](const TrigTerm& x) {
            return x.amp_cos == 0.0 && x.amp_sin == 0.0;
        });
    }
    const auto& g = std::get<GridData>(data_);
    return std::all_of(g.values.begin(), g.values.end(),
                       [](double v) { return v == 0.0; });
}

CoefficientField CoefficientField::negated() const {
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        return constant(-c->value);
    }
    if (const auto* t = std::get_if<TrigData>(&data_)) {
        std::vector<TrigTerm> terms = t->terms;
        for (TrigTerm& term : terms) {
            term.amp_cos = -term.amp_cos;
            term.amp_sin = -term.amp_sin;
        }
        return CoefficientField(TrigData{-t->constant_term, std::move(terms)});
    }
    const auto& g = std::get<GridData>(data_);
    std::vector<double> values = g.values;
    for (double& v : values) v = -v;
    return CoefficientField(GridData{g.shape, std::move(values)});
}

CoefficientField operator+(const CoefficientField& a, const CoefficientField& b) {
    using Kind = CoefficientField::Kind;
    if (a.kind() == Kind::constant && b.kind() != Kind::constant) {
        return b + a;
    }
    if (b.kind() == Kind::constant) {
        const double shift = std::get<CoefficientField::ConstantData>(b.data_).value;
        if (const auto* c = std::get_if<CoefficientField::ConstantData>(&a.data_)) {
            return CoefficientField::constant(c->value + shift);
        }
        if (const auto* t = std::get_if<CoefficientField::TrigData>(&a.data_)) {
            return CoefficientField::trig_polynomial(t->constant_term + shift,
                                                     t->terms);
        }
        const auto& g = std::get<CoefficientField::GridData>(a.data_);
        std::vector<double> values = g.values;
        for (double& v : values) v += shift;
        return CoefficientField::grid_interpolated(g.shape, std::move(values));
    }
    if (a.kind() == Kind::trig_polynomial && b.kind() == Kind::trig_polynomial) {
        const auto& ta = std::get<CoefficientField::TrigData>(a.data_);
        const auto& tb = std::get<CoefficientField::TrigData>(b.data_);
        if (ta.terms.front().wave.size() != tb.terms.front().wave.size()) {
            throw invalid_input("trigonometric fields disagree on dimension");
        }
        std::vector<TrigTerm> terms = ta.terms;
        terms.insert(terms.end(), tb.terms.begin(), tb.terms.end());
        return CoefficientField::trig_polynomial(ta.constant_term + tb.constant_term,
                                                 std::move(terms));
    }
    if (a.kind() == Kind::grid_interpolated && b.kind() == Kind::grid_interpolated) {
        const auto& ga = std::get<CoefficientField::GridData>(a.data_);
        const auto& gb = std::get<CoefficientField::GridData>(b.data_);
        if (ga.shape != gb.shape) {
            throw invalid_input("grid fields disagree on shape");
        }
        std::vector<double> values = ga.values;
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += gb.values[i];
        return CoefficientField::grid_interpolated(ga.shape, std::move(values));
    }
    throw invalid_input(
        "cannot combine a trigonometric field with a grid field exactly");
}

CoefficientField operator-(const CoefficientField& a, const CoefficientField& b) {
    return a + b.negated();
}

std::string CoefficientField::describe() const {
    std::ostringstream out;
    if (const auto* c = std::get_if<ConstantData>(&data_)) {
        out << "constant " << c->value;
    } else if (const auto* t = std::get_if<TrigData>(&data_)) {
        out << "trig c=" << t->constant_term;
        for (const TrigTerm& term : t->terms) {
            out << " (";
            for (std::size_t i = 0; i < term.wave.size(); ++i) {
                if (i) out << ",";
                out << term.wave[i];
            }
            out << "):" << term.amp_cos << ":" << term.amp_sin;
        }
    } else {
        const auto& g = std::get<GridData>(data_);
        out << "grid";
        for (std::size_t n : g.shape) out << " " << n;
    }
    return out.str();
}

}  // namespace cocycle
