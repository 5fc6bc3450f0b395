#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "cocycle/baseflow.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/propagator.hpp"
#include "oracles.hpp"

using namespace cocycle;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kStep = 1e-3;

KineticGenerator constant_generator(double alpha, double beta,
                                    GeneratorClass cls = GeneratorClass::general) {
    return KineticGenerator(CoefficientField::constant(alpha),
                            CoefficientField::constant(beta), cls);
}

TorusTranslation golden_flow() {
    return TorusTranslation({0.6180339887498949, 0.41421356237309515});
}

// damped oscillator with quasi-periodically varying coefficients
KineticGenerator quasi_periodic_generator() {
    return KineticGenerator(
        CoefficientField::trig_polynomial(0.5, {TrigTerm{{1, 0}, 0.25, 0.0}}),
        CoefficientField::trig_polynomial(
            1.0, {TrigTerm{{1, 0}, 0.6, 0.0}, TrigTerm{{0, 1}, 0.4, 0.0}}),
        GeneratorClass::general);
}

}  // namespace

TEST_CASE("zero coefficients give the exact polynomial solution [[1,t],[0,1]]") {
    const auto a = constant_generator(0.0, 0.0);
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.3, 0.4});
    for (double t : {0.25, 1.0, 7.5, -3.0}) {
        const Propagator2 p = propagate(a, flow, w, t, kStep);
        const Matrix2 expected{1.0, t, 0.0, 1.0};
        CAPTURE(t);
        CHECK(oracle::max_entry_diff(p.matrix, expected) < 1e-11);
    }
}

TEST_CASE("constant-coefficient propagators match the series matrix exponential") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.1, 0.9});

    SUBCASE("hyperbolic: restoring coefficient -1") {
        const auto a = constant_generator(0.0, -1.0);
        const Matrix2 gen{0.0, 1.0, 1.0, 0.0};
        for (double t : {0.5, 2.0, 5.0, -2.0}) {
            const Propagator2 p = propagate(a, flow, w, t, kStep);
            const Matrix2 expected = oracle::mat_exp(t * gen);
            // closed form: [[cosh t, sinh t], [sinh t, cosh t]]
            CHECK(oracle::max_entry_diff(expected,
                                         Matrix2{std::cosh(t), std::sinh(t),
                                                 std::sinh(t), std::cosh(t)}) <
                  1e-12);
            CAPTURE(t);
            CHECK(oracle::max_entry_diff(p.matrix, expected) < 1e-8);
        }
    }

    SUBCASE("elliptic: restoring coefficient +1") {
        const auto a = constant_generator(0.0, 1.0);
        const Matrix2 gen{0.0, 1.0, -1.0, 0.0};
        for (double t : {0.5, 2.0, 5.0, -2.0}) {
            const Propagator2 p = propagate(a, flow, w, t, kStep);
            const Matrix2 expected = oracle::mat_exp(t * gen);
            CHECK(oracle::max_entry_diff(expected,
                                         Matrix2{std::cos(t), std::sin(t),
                                                 -std::sin(t), std::cos(t)}) <
                  1e-12);
            CAPTURE(t);
            CHECK(oracle::max_entry_diff(p.matrix, expected) < 1e-8);
        }
    }

    SUBCASE("damped: both coefficients nonzero") {
        const auto a = constant_generator(3.0, 2.0);
        const Matrix2 gen{0.0, 1.0, -2.0, -3.0};
        for (double t : {1.0, 4.0}) {
            const Propagator2 p = propagate(a, flow, w, t, kStep);
            CAPTURE(t);
            CHECK(oracle::max_entry_diff(p.matrix, oracle::mat_exp(t * gen)) <
                  1e-8);
        }
    }
}

TEST_CASE("propagator carries consistent stamps, end point, and error bound") {
    const auto a = quasi_periodic_generator();
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.2, 0.7});

    const Propagator2 p = propagate(a, flow, w, 2.5, kStep);
    CHECK(p.t_start == 0.0);
    CHECK(p.t_end == 2.5);
    CHECK(p.duration() == 2.5);
    CHECK(torus_distance(p.end_point, flow.advance(w, 2.5)) < 1e-12);
    CHECK(p.matrix.det() > 0.0);
    CHECK(p.error_bound > 0.0);

    // error bound grows with the integration span
    const Propagator2 longer = propagate(a, flow, w, 5.0, kStep);
    CHECK(longer.error_bound > p.error_bound);

    // zero-duration propagation is the identity
    const Propagator2 none = propagate(a, flow, w, 0.0, kStep);
    CHECK(oracle::max_entry_diff(none.matrix, Matrix2::identity()) == 0.0);
    CHECK(none.error_bound == 0.0);
}

TEST_CASE("invalid steps and numerical blowups are reported as typed errors") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.5, 0.5});
    CHECK_THROWS_AS(
        propagate(constant_generator(0.0, 1.0), flow, w, 1.0, 0.0),
        invalid_input);
    CHECK_THROWS_AS(
        propagate(constant_generator(0.0, 1.0), flow, w, 1.0, -1e-3),
        invalid_input);
    // e^t growth passes the 1e12 entry threshold before t = 30
    CHECK_THROWS_AS(
        propagate(constant_generator(0.0, -1.0), flow, w, 30.0, kStep),
        numerical_blowup);
}

TEST_CASE("composition concatenates abutting legs and rejects everything else") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.25, 0.6});

    SUBCASE("zero-duration right leg leaves the left factor unchanged") {
        const auto a = quasi_periodic_generator();
        const Propagator2 left = propagate(a, flow, w, 1.5, kStep);
        Propagator2 unit;
        unit.base_point = w;
        unit.end_point = w;
        const Propagator2 glued = cocycle_compose(left, unit);
        CHECK(oracle::max_entry_diff(glued.matrix, left.matrix) == 0.0);
        CHECK(glued.t_end == left.t_end);
    }

    SUBCASE("two constant-coefficient legs equal one long leg") {
        const auto a = constant_generator(1.0, 0.5);
        const Propagator2 first = segment(a, flow, w, 0.0, 1.0, kStep);
        const Propagator2 second = segment(a, flow, w, 1.0, 2.0, kStep);
        const Propagator2 glued = cocycle_compose(second, first);
        const Propagator2 direct = propagate(a, flow, w, 2.0, kStep);
        CHECK(oracle::max_entry_diff(glued.matrix, direct.matrix) <=
              2.0 * direct.error_bound);
    }

    SUBCASE("two quarter turns make a half turn") {
        const auto a = constant_generator(0.0, 1.0);
        const double quarter = kTwoPi / 4.0;
        const Propagator2 first = segment(a, flow, w, 0.0, quarter, kStep);
        const Propagator2 second =
            segment(a, flow, w, quarter, 2.0 * quarter, kStep);
        const Propagator2 half = cocycle_compose(second, first);
        const Matrix2 minus_identity{-1.0, 0.0, 0.0, -1.0};
        CHECK(oracle::max_entry_diff(half.matrix, minus_identity) < 1e-6);
    }

    SUBCASE("non-abutting legs are refused") {
        const auto a = quasi_periodic_generator();
        const Propagator2 first = segment(a, flow, w, 0.0, 1.0, kStep);
        const Propagator2 gapped = segment(a, flow, w, 1.5, 2.0, kStep);
        CHECK_THROWS_AS(cocycle_compose(gapped, first), composition_mismatch);

        // matching stamps but a different orbit
        const Propagator2 elsewhere =
            segment(a, flow, make_point({0.9, 0.1}), 1.0, 2.0, kStep);
        CHECK_THROWS_AS(cocycle_compose(elsewhere, first),
                        composition_mismatch);
    }
}

TEST_CASE("cocycle law holds at random times within the certified bounds") {
    const auto a = quasi_periodic_generator();
    const auto flow = golden_flow();
    oracle::UniformStream rng(41);
    for (int point = 0; point < 10; ++point) {
        const BasePoint w = make_point({rng.next(0, 1), rng.next(0, 1)});
        for (int trial = 0; trial < 10; ++trial) {
            const double s = rng.next(-2, 2);
            const double t = rng.next(-2, 2);
            const Propagator2 whole = propagate(a, flow, w, s + t, kStep);
            const Propagator2 first = propagate(a, flow, w, s, kStep);
            const Propagator2 second =
                propagate(a, flow, flow.advance(w, s), t, kStep);
            const double defect = oracle::max_entry_diff(
                whole.matrix, second.matrix * first.matrix);
            const double allowance =
                10.0 * (whole.error_bound + first.error_bound +
                        second.error_bound);
            CAPTURE(s);
            CAPTURE(t);
            CHECK(defect < allowance);
            CHECK(defect < 1e-6);
        }
    }
}

TEST_CASE("inverse law: backward leg times forward leg is the identity") {
    const auto a = quasi_periodic_generator();
    const auto flow = golden_flow();
    oracle::UniformStream rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        const BasePoint w = make_point({rng.next(0, 1), rng.next(0, 1)});
        const double t = rng.next(0.2, 3.0);
        const Propagator2 forward = propagate(a, flow, w, t, kStep);
        const Propagator2 backward =
            propagate(a, flow, flow.advance(w, t), -t, kStep);
        const double defect = oracle::max_entry_diff(
            backward.matrix * forward.matrix, Matrix2::identity());
        CHECK(defect <
              10.0 * (forward.error_bound + backward.error_bound) + 1e-9);
    }
}

TEST_CASE("growth never exceeds the certified exponential ceiling") {
    const auto flow = golden_flow();
    oracle::UniformStream rng(47);
    const KineticGenerator systems[] = {
        constant_generator(0.0, -1.0), constant_generator(0.0, 1.0),
        quasi_periodic_generator()};
    for (const auto& a : systems) {
        const double a_hat = a.hat_bound();
        for (int trial = 0; trial < 5; ++trial) {
            const BasePoint w = make_point({rng.next(0, 1), rng.next(0, 1)});
            const double t = rng.next(-4, 4);
            const Propagator2 p = propagate(a, flow, w, t, kStep);
            CHECK(operator_norm(p.matrix) <=
                  std::exp(std::abs(t) * a_hat) + p.error_bound);
        }
    }
}

TEST_CASE("volume defect vanishes at the rate the damping dictates") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.15, 0.45});

    SUBCASE("frictionless: determinant stays at one") {
        KineticGenerator a(
            CoefficientField::constant(0.0),
            CoefficientField::trig_polynomial(1.0, {TrigTerm{{1, 0}, 0.5, 0.0}}),
            GeneratorClass::frictionless);
        for (double t : {1.0, 5.0, 10.0}) {
            CAPTURE(t);
            CHECK(liouville_check(a, flow, w, t, kStep) < 1e-9);
            CHECK(std::abs(propagate(a, flow, w, t, kStep).matrix.det() - 1.0) <
                  1e-9);
        }
    }

    SUBCASE("constant damping: determinant decays like a scalar exponential") {
        const double c = 0.8;
        const auto a = constant_generator(c, 1.0);
        for (double t : {1.0, 2.0, 4.0}) {
            CAPTURE(t);
            CHECK(liouville_check(a, flow, w, t, kStep) < 1e-8);
            const double det = propagate(a, flow, w, t, kStep).matrix.det();
            CHECK(std::abs(det - std::exp(-c * t)) < 1e-8);
        }
    }

    SUBCASE("oscillating damping: defect matches independent quadrature") {
        KineticGenerator a(
            CoefficientField::trig_polynomial(0.0, {TrigTerm{{1, 0}, 1.0, 0.0}}),
            CoefficientField::constant(1.0), GeneratorClass::general);
        CHECK(liouville_check(a, flow, w, 1.0, kStep) < 1e-6);

        // cross-check against Simpson quadrature of the damping along the orbit
        const double det = propagate(a, flow, w, 1.0, kStep).matrix.det();
        const double freq = 0.6180339887498949;
        const auto damping_on_orbit = [&](double s) {
            return std::cos(kTwoPi * (w[0] + freq * s));
        };
        const double integral = oracle::simpson(damping_on_orbit, 0.0, 1.0, 2000);
        CHECK(std::abs(std::log(det) + integral) < 1e-6);
    }
}

TEST_CASE("near-identity time bracket solves its defining inequality") {
    SUBCASE("bisection oracle agreement and monotonicity") {
        const auto defining = [](double a_hat, double eps) {
            return oracle::bisect_increasing(
                [a_hat, eps](double tau) {
                    return tau * tau * a_hat * std::exp(a_hat * tau) - eps;
                },
                0.0, 0.5);
        };
        const double tau1 = small_time_bracket(1.0, 0.1);
        CHECK(std::abs(tau1 - defining(1.0, 0.1)) < 1e-6);
        CHECK(tau1 == doctest::Approx(0.2755).epsilon(1e-3));

        const double tau10 = small_time_bracket(10.0, 0.1);
        CHECK(std::abs(tau10 - defining(10.0, 0.1)) < 1e-6);
        CHECK(tau10 < tau1);
    }

    SUBCASE("bracketed time really keeps the propagator near the identity") {
        const auto flow = golden_flow();
        const BasePoint w = make_point({0.6, 0.3});
        const double eps = 0.1;
        for (const auto& a :
             {constant_generator(0.0, -1.0), constant_generator(1.0, 2.0),
              quasi_periodic_generator()}) {
            const double tau = small_time_bracket(a, eps);
            CHECK(tau < 0.5);
            const Matrix2 phi = propagate(a, flow, w, tau, kStep).matrix;
            CHECK(std::abs(phi.a - 1.0) < eps);
            CHECK(std::abs(phi.d - 1.0) < eps);
            CHECK(std::abs(phi.b) < eps);
            CHECK(std::abs(phi.c) < eps);
        }
    }

    SUBCASE("tolerance outside (0, 1/2) is rejected") {
        CHECK_THROWS_AS(small_time_bracket(1.0, 0.0), invalid_input);
        CHECK_THROWS_AS(small_time_bracket(1.0, 0.5), invalid_input);
        CHECK_THROWS_AS(small_time_bracket(0.0, 0.1), invalid_input);
    }
}

TEST_CASE("propagators depend continuously on the generator, with explicit rate") {
    const auto flow = golden_flow();
    const auto a = quasi_periodic_generator();
    oracle::UniformStream rng(53);
    for (double delta : {1e-2, 1e-3, 1e-4}) {
        const BottomRowPerturbation h{CoefficientField::constant(delta),
                                      CoefficientField::constant(0.0),
                                      std::nullopt};
        const auto b = apply_perturbation(a, h);
        const double rho = metric_distance(a, b, MetricNorm::rho_zero, 16);
        CHECK(rho == doctest::Approx(delta).epsilon(1e-12));
        for (int trial = 0; trial < 3; ++trial) {
            const BasePoint w = make_point({rng.next(0, 1), rng.next(0, 1)});
            const double t = 1.0;
            const Propagator2 pa = propagate(a, flow, w, t, kStep);
            const Propagator2 pb = propagate(b, flow, w, t, kStep);
            const double lhs = oracle::max_entry_diff(pa.matrix, pb.matrix);
            const double rhs = rho * t * std::exp(t * b.hat_bound()) *
                                   std::exp(t * a.hat_bound()) +
                               pa.error_bound + pb.error_bound;
            CAPTURE(delta);
            CHECK(lhs <= rhs);
        }
    }
}
