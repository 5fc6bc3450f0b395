#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cocycle {

// A point on a torus of dimension <= max_dim.  Fixed storage keeps flow
// evaluation allocation-free in integrator inner loops.
struct BasePoint {
    static constexpr std::size_t max_dim = 8;

    std::array<double, max_dim> coords{};
    std::size_t dim = 1;

    double operator[](std::size_t i) const { return coords[i]; }
    double& operator[](std::size_t i) { return coords[i]; }
};

BasePoint make_point(std::initializer_list<double> coords);
BasePoint make_point(const std::vector<double>& coords);

// Fractional part in [0, 1), exact for negative arguments, with the
// roundoff case frac(x) == 1.0 clamped to 0.0.
double wrap_unit(double x);

// Largest circular distance across coordinates: max_i min(|a-b|, 1-|a-b|).
double torus_distance(const BasePoint& a, const BasePoint& b);

// A measure-preserving flow on a torus.  Implementations are immutable and
// cheap to evaluate; `advance` accepts any real time, forward or backward.
class BaseFlow {
public:
    virtual ~BaseFlow() = default;

    virtual std::size_t dimension() const = 0;
    virtual BasePoint advance(const BasePoint& p, double t) const = 0;

    // Constant orbit velocity: advance(p, t) = p + t * velocity() mod 1.
    // Both supported flow families move in straight lines, which is what
    // makes orbit-membership queries exactly solvable.
    virtual std::vector<double> velocity() const = 0;

    // Minimal period of every orbit, when the flow is known to be periodic;
    // nullopt when no finite period is certified.
    virtual std::optional<double> period() const = 0;

    virtual std::string describe() const = 0;

    // Uniformly distributed points, reproducible for a fixed seed.
    std::vector<BasePoint> sample(std::size_t count, std::uint64_t seed) const;
};

// Straight-line translation flow x -> x + t * freq (mod 1 in each
// coordinate).  With d >= 2 rationally independent frequencies the flow is
// minimal and uniquely ergodic; with d = 1 every orbit is periodic.
class TorusTranslation final : public BaseFlow {
public:
    explicit TorusTranslation(std::vector<double> frequencies);

    std::size_t dimension() const override { return freq_.size(); }
    BasePoint advance(const BasePoint& p, double t) const override;
    std::vector<double> velocity() const override { return freq_; }
    std::optional<double> period() const override;
    std::string describe() const override;

    const std::vector<double>& frequencies() const { return freq_; }

private:
    std::vector<double> freq_;
};

// Circle flow of a prescribed period: x -> x + t / period (mod 1).
class PeriodicSuspension final : public BaseFlow {
public:
    explicit PeriodicSuspension(double period);

    std::size_t dimension() const override { return 1; }
    BasePoint advance(const BasePoint& p, double t) const override;
    std::vector<double> velocity() const override { return {1.0 / period_}; }
    std::optional<double> period() const override { return period_; }
    std::string describe() const override;

private:
    double period_;
};

}  // namespace cocycle
