#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cocycle/baseflow.hpp"

namespace cocycle {

// One harmonic of a finite Fourier sum: amp_cos*cos(2*pi*k.w) +
// amp_sin*sin(2*pi*k.w) for an integer wave vector k.
struct TrigTerm {
    std::vector<int> wave;
    double amp_cos = 0.0;
    double amp_sin = 0.0;
};

// A bounded scalar field on the torus with a certified sup/inf bound.
// Three shapes cover the laboratory's needs: exact constants, finite
// trigonometric polynomials, and grid data under periodic multilinear
// interpolation.  Values are immutable after construction.
class CoefficientField {
public:
    enum class Kind { constant, trig_polynomial, grid_interpolated };

    static CoefficientField constant(double value);
    static CoefficientField trig_polynomial(double constant_term,
                                            std::vector<TrigTerm> terms);
    static CoefficientField grid_interpolated(std::vector<std::size_t> shape,
                                              std::vector<double> values);

    Kind kind() const;

    // Torus dimension the field is defined over; nullopt for constants
    // (valid in any dimension).
    std::optional<std::size_t> dimension() const;

    double value(const BasePoint& p) const;

    // Certified bounds: inf_bound() <= f <= sup_bound() everywhere, and
    // |f| <= sup_abs_bound().
    double sup_bound() const;
    double inf_bound() const;
    double sup_abs_bound() const;

    // True only when the field is certifiably identically zero.
    bool is_zero() const;

    CoefficientField negated() const;

    // Pointwise sum/difference.  Constants combine with anything; trig with
    // trig; grids with grids of identical shape.  Mixing a trigonometric
    // polynomial with a grid has no closed representative and is rejected.
    friend CoefficientField operator+(const CoefficientField& a,
                                      const CoefficientField& b);
    friend CoefficientField operator-(const CoefficientField& a,
                                      const CoefficientField& b);

    std::string describe() const;

private:
    struct ConstantData {
        double value;
    };
    struct TrigData {
        double constant_term;
        std::vector<TrigTerm> terms;
    };
    struct GridData {
        std::vector<std::size_t> shape;
        std::vector<double> values;  // row-major
    };

    explicit CoefficientField(std::variant<ConstantData, TrigData, GridData> data)
        : data_(std::move(data)) {}

    std::variant<ConstantData, TrigData, GridData> data_;
};

}  // namespace cocycle
