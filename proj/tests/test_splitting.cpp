#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cocycle/baseflow.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/spectrum.hpp"
#include "cocycle/splitting.hpp"
#include "oracles.hpp"

using namespace cocycle;

namespace {

constexpr double kStep = 1e-3;

KineticGenerator constant_generator(double alpha, double beta,
                                    GeneratorClass cls = GeneratorClass::general) {
    return KineticGenerator(CoefficientField::constant(alpha),
                            CoefficientField::constant(beta), cls);
}

TorusTranslation golden_flow() {
    return TorusTranslation({0.6180339887498949, 0.41421356237309515});
}

KineticGenerator shifted_cosine_generator() {
    return KineticGenerator(
        CoefficientField::constant(0.0),
        CoefficientField::trig_polynomial(-2.0, {TrigTerm{{1, 0}, 1.0, 0.0}}),
        GeneratorClass::frictionless);
}

OseledetsFrame symmetric_frame() {
    const double s = 1.0 / std::sqrt(2.0);
    OseledetsFrame f;
    f.e1 = {s, s};
    f.e2 = {s, -s};
    f.angle = 1.5707963267948966;
    return f;
}

}  // namespace

TEST_CASE("contraction ratio matches the eigenvalue oracle on constants") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.33, 0.77});

    SUBCASE("symmetric hyperbolic at unit window: e^{-2}") {
        const double ratio = domination_ratio(constant_generator(0.0, -1.0),
                                              flow, w, 1.0, symmetric_frame(),
                                              kStep);
        CHECK(std::abs(ratio - std::exp(-2.0)) < 1e-6);
    }

    SUBCASE("damped node over two units: e^{-2}") {
        const double s5 = std::sqrt(5.0);
        OseledetsFrame f;
        f.e1 = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
        f.e2 = {1.0 / s5, -2.0 / s5};
        f.angle = line_angle(f.e1, f.e2);
        const double ratio = domination_ratio(constant_generator(3.0, 2.0),
                                              flow, w, 2.0, f, kStep);
        CHECK(std::abs(ratio - std::exp(-2.0)) < 1e-6);
    }

    SUBCASE("elliptic with an orthonormal frame: ratio one") {
        OseledetsFrame f;
        f.e1 = {1.0, 0.0};
        f.e2 = {0.0, 1.0};
        f.angle = 1.5707963267948966;
        for (double m : {1.0, 3.0, 7.0}) {
            const double ratio = domination_ratio(constant_generator(0.0, 1.0),
                                                  flow, w, m, f, kStep);
            CAPTURE(m);
            CHECK(std::abs(ratio - 1.0) < 1e-6);
        }
    }

    SUBCASE("degenerate frames are refused") {
        OseledetsFrame f;
        f.e1 = {1.0, 0.0};
        f.e2 = {1.0, 1e-5};
        f.angle = line_angle(f.e1, f.e2);
        CHECK_THROWS_AS(domination_ratio(constant_generator(0.0, -1.0), flow, w,
                                         1.0, f, kStep),
                        degenerate_frame);
    }
}

TEST_CASE("domination flips exactly where the ratio crosses one half") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.12, 0.57});
    const auto a = constant_generator(0.0, -1.0);

    // gap 2: ratio e^{-2m} crosses 1/2 at m = ln2/2 = 0.3466
    CHECK(!is_m_dominated(a, flow, w, 0.1, kStep).dominated);
    CHECK(!is_m_dominated(a, flow, w, 0.34, kStep).dominated);
    CHECK(is_m_dominated(a, flow, w, 0.36, kStep).dominated);
    CHECK(is_m_dominated(a, flow, w, 1.0, kStep).dominated);

    const DominationReport r = is_m_dominated(a, flow, w, 1.0, kStep);
    CHECK(r.resolved);
    CHECK(std::abs(r.ratio_max - std::exp(-2.0)) < 1e-5);
    CHECK(r.m == 1.0);
}

TEST_CASE("elliptic systems never dominate, up to window twenty") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.9, 0.16});
    const auto a = constant_generator(0.0, 1.0);
    for (double m : {1.0, 5.0, 20.0}) {
        CAPTURE(m);
        CHECK(!is_m_dominated(a, flow, w, m, kStep).dominated);
    }
}

TEST_CASE("domination is monotone in the window length on constants") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.42, 0.88});
    const auto a = constant_generator(3.0, 2.0);
    // gap 1: threshold at ln 2
    CHECK(!is_m_dominated(a, flow, w, 0.6, kStep).dominated);
    bool seen = false;
    for (double m : {0.8, 1.0, 2.0, 5.0}) {
        const bool dom = is_m_dominated(a, flow, w, m, kStep).dominated;
        CAPTURE(m);
        CHECK(dom);
        seen = seen || dom;
    }
    CHECK(seen);
}

TEST_CASE("domination verdicts agree one step downstream") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.27, 0.64});
    for (const auto& a :
         {constant_generator(0.0, -1.0), shifted_cosine_generator()}) {
        const bool here = is_m_dominated(a, flow, w, 2.0, kStep).dominated;
        const bool there =
            is_m_dominated(a, flow, flow.advance(w, 1.0), 2.0, kStep).dominated;
        CHECK(here);
        CHECK(there);
    }
}

TEST_CASE("uniform hyperbolicity needs contraction on both sides") {
    const auto flow = golden_flow();
    const BasePoint w = make_point({0.51, 0.09});

    SUBCASE("symmetric hyperbolic at unit window: both legs contract") {
        const DominationReport r =
            is_m_hyperbolic(constant_generator(0.0, -1.0), flow, w, 1.0, kStep);
        CHECK(r.hyperbolic);
        CHECK(r.resolved);
    }

    SUBCASE("elliptic: never hyperbolic") {
        for (double m : {1.0, 5.0}) {
            CAPTURE(m);
            CHECK(!is_m_hyperbolic(constant_generator(0.0, 1.0), flow, w, m,
                                   kStep)
                       .hyperbolic);
        }
    }

    SUBCASE("neutral-plus-contracting direction: dominated but not hyperbolic") {
        const auto a = constant_generator(1.0, 0.0);
        // eigenvalues 0 and -1: ratio e^{-m} crosses 1/2 at ln 2 = 0.693
        CHECK(!is_m_dominated(a, flow, w, 0.6, kStep).dominated);
        CHECK(is_m_dominated(a, flow, w, 0.8, kStep).dominated);
        for (double m : {1.0, 4.0}) {
            CAPTURE(m);
            CHECK(!is_m_hyperbolic(a, flow, w, m, kStep).hyperbolic);
        }
    }
}

TEST_CASE("sample classification: constants land in the expected bins") {
    const auto flow = golden_flow();
    const SampleSet sample = sample_measure(flow, 3, 555);
    const double m = 5.0;
    const double horizon = 200.0;

    SUBCASE("constant hyperbolic: all dominated") {
        const auto report = classify_sample(constant_generator(0.0, -1.0), flow,
                                            sample, m, horizon, kStep);
        REQUIRE(report.points.size() == 3);
        for (const auto& p : report.points) {
            CHECK(p.verdict == SampleVerdict::dominated);
            CHECK(std::abs(p.lambda1 - 1.0) < 2e-2);
        }
        // fractions in verdict declaration order; dominated is second
        CHECK(report.fractions[1] == doctest::Approx(1.0));
        double total = 0.0;
        for (double f : report.fractions) total += f;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("elliptic: all trivial spectrum") {
        const auto report = classify_sample(constant_generator(0.0, 1.0), flow,
                                            sample, m, horizon, kStep);
        for (const auto& p : report.points)
            CHECK(p.verdict == SampleVerdict::trivial_spectrum);
        CHECK(report.fractions[0] == doctest::Approx(1.0));
    }

    SUBCASE("double root: trivial spectrum despite decay") {
        const auto report = classify_sample(constant_generator(2.0, 1.0), flow,
                                            sample, m, horizon, kStep);
        for (const auto& p : report.points)
            CHECK(p.verdict == SampleVerdict::trivial_spectrum);
    }
}

TEST_CASE("frictionless dichotomy: zero spectrum or hyperbolic splitting") {
    const auto flow = golden_flow();
    const SampleSet sample = sample_measure(flow, 3, 556);
    const double m = 5.0;
    const double horizon = 200.0;

    const auto zero = classify_frictionless(
        constant_generator(0.0, 1.0, GeneratorClass::frictionless), flow,
        sample, m, horizon, kStep);
    for (const auto& p : zero.points) {
        CHECK(p.verdict == FrictionlessVerdict::zero_spectrum);
        // unit-determinant symmetry of the exponents
        CHECK(std::abs(p.lambda1 + p.lambda2) < 2e-2);
    }

    const auto hyper = classify_frictionless(
        constant_generator(0.0, -1.0, GeneratorClass::frictionless), flow,
        sample, m, horizon, kStep);
    for (const auto& p : hyper.points) {
        CHECK(p.verdict == FrictionlessVerdict::hyperbolic);
        CHECK(std::abs(p.lambda1 + p.lambda2) < 2e-2);
    }

    CHECK_THROWS_AS(classify_frictionless(constant_generator(1.0, 1.0), flow,
                                          sample, m, horizon, kStep),
                    invalid_input);
}

TEST_CASE("dissipative trichotomy and the negative exponent sum") {
    const auto flow = golden_flow();
    const SampleSet sample = sample_measure(flow, 3, 557);
    const double m = 5.0;
    const double horizon = 200.0;

    const auto stable_dom = classify_dissipative(
        constant_generator(3.0, 2.0, GeneratorClass::dissipative), flow, sample,
        m, horizon, kStep);
    for (const auto& p : stable_dom.points) {
        CHECK(p.verdict == DissipativeVerdict::stable_dominated);
        CHECK(p.lambda1 + p.lambda2 <= -3.0 + 2e-2);
    }

    const auto stable_triv = classify_dissipative(
        constant_generator(2.0, 1.0, GeneratorClass::dissipative), flow, sample,
        m, horizon, kStep);
    for (const auto& p : stable_triv.points)
        CHECK(p.verdict == DissipativeVerdict::stable_trivial);

    // restoring coefficient -2 with unit damping: saddle with drift
    const auto unstable = classify_dissipative(
        constant_generator(1.0, -2.0, GeneratorClass::dissipative), flow,
        sample, m, horizon, kStep);
    for (const auto& p : unstable.points) {
        CHECK(p.verdict == DissipativeVerdict::unstable_dominated);
        CHECK(std::abs(p.lambda1 - 1.0) < 2e-2);
        CHECK(std::abs(p.lambda2 + 2.0) < 2e-2);
        CHECK(p.lambda1 + p.lambda2 <= -1.0 + 2e-2);
    }

    CHECK_THROWS_AS(classify_dissipative(constant_generator(0.0, 1.0), flow,
                                         sample, m, horizon, kStep),
                    invalid_input);
}

TEST_CASE("verdict names serialize for reports") {
    CHECK(std::string(to_string(SampleVerdict::dominated)) == "dominated");
    CHECK(std::string(to_string(FrictionlessVerdict::zero_spectrum)) ==
          "zero_spectrum");
    CHECK(std::string(to_string(DissipativeVerdict::unstable_dominated)) ==
          "unstable_dominated");
}
