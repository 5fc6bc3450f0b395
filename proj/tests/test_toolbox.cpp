#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <sstream>

#include "cocycle/baseflow.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/kinetic.hpp"
#include "cocycle/propagator.hpp"
#include "cocycle/spectrum.hpp"
#include "cocycle/toolbox.hpp"
#include "oracles.hpp"

using namespace cocycle;

namespace {

constexpr double kStep = 1e-3;

KineticGenerator constant_generator(double alpha, double beta,
                                    GeneratorClass cls = GeneratorClass::general) {
    return KineticGenerator(CoefficientField::constant(alpha),
                            CoefficientField::constant(beta), cls);
}

std::shared_ptr<const BaseFlow> golden_flow() {
    return std::make_shared<TorusTranslation>(
        std::vector<double>{0.6180339887498949, 0.41421356237309515});
}

// Fast two-frequency flow paired with a gently varying restoring force:
// the per-unit-window steering problem is well conditioned here, which is
// what direction-swap chains need.
std::shared_ptr<const BaseFlow> swap_flow() {
    return std::make_shared<TorusTranslation>(
        std::vector<double>{0.41421356237309515, 0.16227766016837933});
}

KineticGenerator swap_generator() {
    return KineticGenerator(
        CoefficientField::constant(0.0),
        CoefficientField::trig_polynomial(0.09,
                                          {TrigTerm{{1, 0}, 0.0675, 0.0}}),
        GeneratorClass::frictionless);
}

double reference_angle(double t, double gamma, double xi) {
    const double txg = t * xi * gamma;
    const double num = 1.0 + gamma * gamma + txg;
    const double den = std::sqrt(gamma * gamma + 1.0) *
                       std::sqrt(gamma * gamma + 1.0 + 2.0 * txg + txg * txg);
    return std::acos(std::min(1.0, std::max(-1.0, num / den)));
}

}  // namespace

TEST_CASE("pure shear solution: identity at zero, unit lower-left slope") {
    CHECK(oracle::max_entry_diff(shear_solution({1.0, 1.0}, 0.0),
                                 Matrix2::identity()) == 0.0);

    const Matrix2 s = shear_solution({2.0, 1.0}, 0.5);
    CHECK(s.a == 1.0);
    CHECK(s.b == 0.0);
    CHECK(s.c == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.d == 1.0);

    oracle::UniformStream rng(5);
    for (int i = 0; i < 20; ++i) {
        const double xi = rng.next(-3, 3);
        const double t = rng.next(0, 1);
        CHECK(shear_solution({xi, 1.0}, t).det() == doctest::Approx(1.0));
    }
}

TEST_CASE("worst-case rotation angle: limits, parity, monotonicity, formula") {
    CHECK(angle_theta(0.1, 1e-9, 0.5) < 1e-8);
    CHECK(angle_theta(0.1, 0.01, 0.0) == doctest::Approx(0.0));
    CHECK(angle_theta(0.0, 0.01, 0.7) == doctest::Approx(0.0));

    // increasing in |xi| near zero
    const double small = angle_theta(0.1, 0.01, 0.1);
    const double medium = angle_theta(0.1, 0.01, 0.2);
    const double large = angle_theta(0.1, 0.01, 0.4);
    CHECK(small > 0.0);
    CHECK(medium > small);
    CHECK(large > medium);

    for (double xi : {-1.0, -0.3, 0.2, 0.8}) {
        CAPTURE(xi);
        CHECK(angle_theta(0.1, 0.01, xi) ==
              doctest::Approx(reference_angle(0.1, 0.01, xi)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(angle_theta(0.1, -0.01, 0.5), invalid_input);
}

TEST_CASE("conjugated shear generator keeps its similarity invariants") {
    auto flow = golden_flow();
    const BasePoint w = make_point({0.3, 0.6});

    SUBCASE("at time zero the conjugation is the bare shear") {
        const Matrix2 m =
            conjugated_generator(constant_generator(0.5, 1.2), *flow, w, 0.7,
                                 0.0, kStep);
        CHECK(m.a == 0.0);
        CHECK(m.b == 0.0);
        CHECK(m.c == 0.7);
        CHECK(m.d == 0.0);
    }

    SUBCASE("trace and determinant vanish at every time") {
        KineticGenerator a(
            CoefficientField::constant(0.3),
            CoefficientField::trig_polynomial(1.0,
                                              {TrigTerm{{1, 0}, 0.5, 0.0}}),
            GeneratorClass::general);
        for (double t : {0.05, 0.3, 0.8}) {
            const Matrix2 m = conjugated_generator(a, *flow, w, 0.4, t, kStep);
            CAPTURE(t);
            CHECK(std::abs(m.trace()) < 1e-9);
            CHECK(std::abs(m.det()) < 1e-9);
        }
    }

    SUBCASE("zero-coefficient base: closed-form conjugate") {
        const auto a = constant_generator(0.0, 0.0);
        const double xi = 0.6;
        for (double t : {0.2, 0.9}) {
            const Matrix2 m = conjugated_generator(a, *flow, w, xi, t, kStep);
            const Matrix2 expected{-xi * t, -xi * t * t, xi, xi * t};
            CAPTURE(t);
            CHECK(oracle::max_entry_diff(m, expected) < 1e-9);
        }
    }
}

TEST_CASE("relative rotation factor is unimodular and trivial at zero strength") {
    auto flow = golden_flow();
    const BasePoint w = make_point({0.8, 0.2});
    const auto a = constant_generator(0.0, -1.0);

    const Propagator2 id_path = rotation_solution(a, *flow, w, 0.0, 1.0, kStep);
    CHECK(oracle::max_entry_diff(id_path.matrix, Matrix2::identity()) < 1e-10);

    oracle::UniformStream rng(9);
    for (int i = 0; i < 10; ++i) {
        const double xi = rng.next(-1, 1);
        const Propagator2 r = rotation_solution(a, *flow, w, xi, 1.0, kStep);
        CAPTURE(xi);
        CHECK(std::abs(r.matrix.det() - 1.0) < 1e-8);
    }

    CHECK_THROWS_AS(rotation_solution(a, *flow, w, 0.5, 1.5, kStep),
                    invalid_input);
    CHECK_THROWS_AS(rotation_solution(a, *flow, w, 0.5, 0.0, kStep),
                    invalid_input);
}

TEST_CASE("perturbed solution factors through the relative rotation") {
    const BasePoint w = make_point({0.45, 0.15});

    SUBCASE("zero strength: residual at roundoff") {
        CHECK(composed_propagator(constant_generator(0.0, -1.0), golden_flow(),
                                  w, 0.0, 1.0, kStep) < 1e-10);
    }

    SUBCASE("constant hyperbolic base") {
        CHECK(composed_propagator(constant_generator(0.0, -1.0), golden_flow(),
                                  w, 0.1, 1.0, kStep) < 1e-6);
    }

    SUBCASE("quasi-periodic base") {
        KineticGenerator a(
            CoefficientField::constant(0.0),
            CoefficientField::trig_polynomial(
                1.0, {TrigTerm{{1, 0}, 0.6, 0.0}, TrigTerm{{0, 1}, 0.4, 0.0}}),
            GeneratorClass::frictionless);
        CHECK(composed_propagator(a, golden_flow(), w, 0.05, 1.0, kStep) <
              1e-6);
    }

    SUBCASE("random small suite stays at integrator-error scale") {
        oracle::UniformStream rng(13);
        auto flow = golden_flow();
        for (int sys = 0; sys < 3; ++sys) {
            KineticGenerator a(
                CoefficientField::constant(rng.next(-0.5, 0.5)),
                CoefficientField::trig_polynomial(
                    rng.next(-1, 1), {TrigTerm{{1, 0}, rng.next(-1, 1), 0.0}}),
                GeneratorClass::general);
            const double allowance =
                100.0 * std::pow(a.hat_bound(), 5) * std::exp(a.hat_bound()) *
                std::pow(kStep, 4);
            for (int trial = 0; trial < 3; ++trial) {
                const double xi = rng.next(-1, 1);
                const double tau = rng.next(0.2, 1.0);
                const double residual =
                    composed_propagator(a, flow, w, xi, tau, kStep);
                CAPTURE(sys);
                CAPTURE(xi);
                CHECK(residual < std::max(allowance, 1e-8));
            }
        }
    }
}

TEST_CASE("vertical cone membership is strict") {
    const ConeSpec cone{0.1};
    CHECK(cone.contains({0.05, 1.0}));
    CHECK(cone.contains({-0.05, -1.0}));
    CHECK(!cone.contains({0.2, 1.0}));
    CHECK(!cone.contains({0.1, 1.0}));
    CHECK(!cone.contains({1.0, 0.0}));
}

TEST_CASE("images of vertical vectors leave the cone when the flow says so") {
    auto flow = golden_flow();
    const BasePoint w = make_point({0.6, 0.9});

    SUBCASE("drifting system exits at the predicted slope crossing") {
        const auto a = constant_generator(0.0, 0.0);
        const double gamma = 0.2;
        const EscapeResult r =
            cone_escape(a, *flow, w, gamma, {0.0, 1.0}, 0.45, kStep);
        CHECK(r.escaped);
        REQUIRE(r.exit_time.has_value());
        // image is (t, 1): leaves |x| < gamma |y| at t = gamma
        CHECK(std::abs(*r.exit_time - gamma) < 5e-3);
    }

    SUBCASE("elliptic system exits early") {
        const auto a = constant_generator(0.0, 1.0);
        const EscapeResult r =
            cone_escape(a, *flow, w, 0.05, {0.0, 1.0}, 0.45, kStep);
        CHECK(r.escaped);
        REQUIRE(r.exit_time.has_value());
        // image is (sin t, cos t): exits once tan t > gamma
        CHECK(std::abs(*r.exit_time - std::atan(0.05)) < 5e-3);
    }

    SUBCASE("too-short observation windows report non-escape honestly") {
        const auto a = constant_generator(0.0, 0.0);
        const EscapeResult r =
            cone_escape(a, *flow, w, 0.3, {0.0, 1.0}, 0.1, kStep);
        CHECK(!r.escaped);
        CHECK(!r.exit_time.has_value());
    }

    SUBCASE("preconditions") {
        const auto a = constant_generator(0.0, 0.0);
        CHECK_THROWS_AS(cone_escape(a, *flow, w, 0.1, {1.0, 0.0}, 0.3, kStep),
                        invalid_input);
        CHECK_THROWS_AS(cone_escape(a, *flow, w, 0.1, {0.0, 1.0}, 0.6, kStep),
                        invalid_input);
    }
}

TEST_CASE("cone choice certifies escape and shrinks for stronger generators") {
    auto flow = golden_flow();
    const auto zero = constant_generator(0.0, 0.0);
    const ConeChoice choice = choose_cone_gamma(zero, 0.1);
    CHECK(choice.gamma > 0.0);
    CHECK(choice.gamma < 0.5);
    CHECK(choice.tau_hat > 0.0);
    CHECK(choice.tau_hat < 0.5);

    // the contract is empirical: random cone vectors must all escape
    oracle::UniformStream rng(21);
    const auto points = flow->sample(5, 99);
    int escapes = 0;
    int trials = 0;
    for (const auto& p : points) {
        for (int i = 0; i < 4; ++i) {
            const double slope = rng.next(-choice.gamma, choice.gamma) * 0.999;
            const Vec2 v = Vec2{slope, 1.0}.normalized();
            ++trials;
            if (cone_escape(zero, *flow, p, choice.gamma, v, choice.tau_hat,
                            kStep)
                    .escaped)
                ++escapes;
        }
    }
    CHECK(escapes == trials);

    // a much larger generator forces a smaller cone
    const ConeChoice tight = choose_cone_gamma(constant_generator(0.0, -99.0),
                                               0.1);
    CHECK(tight.gamma < choice.gamma);

    CHECK_THROWS_AS(choose_cone_gamma(zero, 0.0), invalid_input);
    CHECK_THROWS_AS(choose_cone_gamma(zero, 0.5), invalid_input);
}

TEST_CASE("rotation context gathers consistent geometry") {
    auto flow = golden_flow();
    const auto a = constant_generator(0.0, -1.0);
    const ToolboxContext ctx = make_toolbox_context(a, *flow, 0.2, kStep);
    CHECK(ctx.epsilon == 0.2);
    CHECK(ctx.gamma > 0.0);
    CHECK(ctx.gamma < 0.5);
    CHECK(ctx.tau_hat > 0.0);
    CHECK(ctx.tau_hat < 0.5);
    CHECK(ctx.tau_tilde > 0.0);
    CHECK(ctx.tau_tilde < 0.5);
    CHECK(ctx.ell > 1.0);
    CHECK(ctx.theta0 > 0.0);
    CHECK(ctx.theta1 > 0.0);
    const double budget = ctx.budget_at(1.0);
    CHECK(budget > 0.0);
    CHECK(budget <= ctx.theta0);
    CHECK(budget <= ctx.theta1);
    CHECK(budget <= ctx.theta2_at(1.0));
    // conditioning can only shrink the certified budget
    CHECK(ctx.budget_at(10.0) <= budget);
}

TEST_CASE("realized line rotation dominates the closed-form worst case") {
    auto flow = golden_flow();
    const BasePoint w = make_point({0.25, 0.35});
    const double gamma = 0.01;
    const double tau = 0.1;
    const Vec2 u{gamma, 1.0};
    for (const auto& a :
         {constant_generator(0.0, -1.0), constant_generator(3.0, 2.0)}) {
        for (double xi : {-1.0, -0.5, -0.1, 0.1, 0.5, 1.0}) {
            const Matrix2 r =
                rotation_solution(a, *flow, w, xi, tau, kStep).matrix;
            const double measured = line_angle(u, r * u);
            CAPTURE(xi);
            CHECK(measured >= angle_theta(tau, gamma, xi) - 1e-6);
        }
    }
}

TEST_CASE("steering one line onto another within the perturbation budget") {
    auto flow = golden_flow();
    const auto a = constant_generator(0.0, -1.0);
    const BasePoint w = make_point({0.55, 0.25});
    const double eps = 0.1;
    ToolboxContext ctx = make_toolbox_context(a, *flow, eps, kStep);

    SUBCASE("coincident directions need no perturbation") {
        const Vec2 u = Vec2{1.0, 0.0};
        const RotationOutcome out =
            rotate_direction(a, flow, w, u, u, eps, kStep, &ctx);
        CHECK(out.residual < 1e-9);
        CHECK(out.plan.size() == 0.0);
        CHECK(metric_distance(a, out.b, MetricNorm::rho_zero, 32) == 0.0);
    }

    SUBCASE("small rotation away from the cone lands within 1e-6 radians") {
        const Vec2 u{1.0, 0.0};
        const Vec2 v = unit_vector(0.01);
        const RotationOutcome out =
            rotate_direction(a, flow, w, u, v, eps, kStep, &ctx);
        CHECK(out.residual < 1e-6);
        CHECK(out.theta_budget > 0.0);
        CHECK(metric_distance(a, out.b, MetricNorm::rho_zero, 32) < eps);

        // independent verification: propagate both generators one unit
        const Matrix2 phi_b = propagate(out.b, *flow, w, 1.0, kStep).matrix;
        const Matrix2 phi_a = propagate(a, *flow, w, 1.0, kStep).matrix;
        CHECK(line_angle(phi_b * u, phi_a * v) < 1e-6);
    }

    SUBCASE("near-vertical directions coast out of the cone first") {
        const Vec2 u = Vec2{0.001, 1.0}.normalized();
        const Vec2 v = unit_vector(std::atan2(u.y, u.x) + 0.01);
        const RotationOutcome out =
            rotate_direction(a, flow, w, u, v, eps, kStep, &ctx);
        REQUIRE(!out.plan.segments.empty());
        CHECK(out.plan.segments.front().t_start > 0.0);
        CHECK(out.residual < 1e-6);

        const Matrix2 phi_b = propagate(out.b, *flow, w, 1.0, kStep).matrix;
        const Matrix2 phi_a = propagate(a, *flow, w, 1.0, kStep).matrix;
        CHECK(line_angle(phi_b * u, phi_a * v) < 1e-6);
    }

    SUBCASE("angles beyond the certified budget are refused") {
        const Vec2 u{1.0, 0.0};
        const Vec2 v = unit_vector(0.5);
        ToolboxContext tight = make_toolbox_context(a, *flow, 0.01, kStep);
        CHECK_THROWS_AS(
            rotate_direction(a, flow, w, u, v, 0.01, kStep, &tight),
            rotation_infeasible);
    }
}

TEST_CASE("swapping the invariant directions along a feasible window") {
    auto flow = swap_flow();
    const auto a = swap_generator();
    const BasePoint w = make_point({0.15, 0.3});
    const int m = 12;
    const double eps = 0.2;

    const SwapOutcome out = swap_oseledets(a, flow, w, m, eps, kStep);
    CHECK(out.residual <= 1e-4);
    CHECK(out.b.generator_class() == GeneratorClass::frictionless);
    CHECK(out.plan.size() > 0.0);
    CHECK(out.plan.size() < eps);
    REQUIRE(!out.plan.segments.empty());
    for (const PlanSegment& seg : out.plan.segments) {
        CHECK(seg.t_start >= 0.0);
        CHECK(seg.t_start + seg.duration <= m + 1e-9);
        CHECK(std::abs(seg.xi) < eps);
    }

    SUBCASE("uniform distance equals the largest single-window strength") {
        const double dist = metric_distance(a, out.b, MetricNorm::rho_zero, 64);
        CHECK(dist == doctest::Approx(out.plan.size()).epsilon(1e-9));
        CHECK(dist < eps);
    }

    SUBCASE("off the support the perturbed generator is bit-identical") {
        int audited = 0;
        for (int i = 0; i < 16; ++i) {
            for (int j = 0; j < 16; ++j) {
                const BasePoint p = make_point({i / 16.0, j / 16.0});
                bool on_support = false;
                for (const auto& mod : out.b.modifications()) {
                    if (mod.support && mod.support->orbit_time(p)) {
                        on_support = true;
                        break;
                    }
                }
                if (on_support) continue;
                ++audited;
                const Matrix2 ma = a.evaluate(p);
                const Matrix2 mb = out.b.evaluate(p);
                CHECK(ma.a == mb.a);
                CHECK(ma.b == mb.b);
                CHECK(ma.c == mb.c);
                CHECK(ma.d == mb.d);
            }
        }
        CHECK(audited == 256);
    }

    SUBCASE("plans are deterministic and re-realizable") {
        const SwapOutcome again = swap_oseledets(a, flow, w, m, eps, kStep);
        std::ostringstream first, second;
        out.plan.serialize(first);
        again.plan.serialize(second);
        CHECK(first.str() == second.str());
        CHECK(!first.str().empty());

        const KineticGenerator rebuilt = apply_plan(a, flow, out.plan);
        oracle::UniformStream rng(77);
        for (int i = 0; i < 32; ++i) {
            const BasePoint p =
                flow->advance(w, rng.next(0.0, static_cast<double>(m)));
            CHECK(oracle::max_entry_diff(rebuilt.evaluate(p),
                                         out.b.evaluate(p)) == 0.0);
        }
    }

    SUBCASE("feasibility is monotone in the budget") {
        CHECK_NOTHROW(swap_oseledets(a, flow, w, m, 0.4, kStep));
    }
}

TEST_CASE("dominated windows refuse the swap with the ratio arithmetic") {
    auto flow = golden_flow();
    const auto a = constant_generator(0.0, -1.0);
    const BasePoint w = make_point({0.35, 0.65});
    for (int m : {1, 5, 20}) {
        CAPTURE(m);
        CHECK_THROWS_AS(swap_oseledets(a, flow, w, m, 0.01, kStep),
                        swap_infeasible);
    }
    try {
        swap_oseledets(a, flow, w, 5, 0.01, kStep);
        FAIL("swap on a dominated window must refuse");
    } catch (const swap_infeasible& e) {
        const std::string msg = e.what();
        CHECK(msg.find("dominated") != std::string::npos);
        CHECK(msg.find("1/2") != std::string::npos);
    }

    CHECK_THROWS_AS(swap_oseledets(a, flow, w, 0, 0.1, kStep), invalid_input);
    CHECK_THROWS_AS(swap_oseledets(a, flow, w, 5, 0.7, kStep), invalid_input);
}

TEST_CASE("sweeps with no eligible points change nothing") {
    const double m = 5.0;
    const double tau = 40.0;
    const double eps = 0.2;

    SUBCASE("entirely dominated sample") {
        auto flow = golden_flow();
        const auto a = constant_generator(0.0, -1.0);
        const SampleSet sample = sample_measure(*flow, 2, 404);
        const GlobalSweepOutcome out =
            global_mixing_sweep(a, flow, sample, m, tau, eps, kStep);
        CHECK(out.eligible == 0);
        CHECK(out.infeasible == 0);
        CHECK(out.le_after == doctest::Approx(out.le_before));
        for (const auto& plan : out.plans) CHECK(!plan.has_value());
    }

    SUBCASE("entirely trivial-spectrum sample") {
        auto flow = golden_flow();
        const auto a = constant_generator(0.0, 1.0);
        const SampleSet sample = sample_measure(*flow, 2, 405);
        const GlobalSweepOutcome out =
            global_mixing_sweep(a, flow, sample, m, tau, eps, kStep);
        CHECK(out.eligible == 0);
        CHECK(out.le_after == doctest::Approx(out.le_before));
    }
}
