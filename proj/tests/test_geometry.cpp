#include <gtest/gtest.h>

#include <cmath>

#include "frac/geometry.hpp"

using namespace frac;

TEST(Inradius, SimpleShapes) {
    const double h = 1.0 / 32;
    EXPECT_NEAR(inradius(build_domain(Shape::ball({0, 0}, 1, 2), h)), 1.0, h);
    EXPECT_NEAR(inradius(build_domain(Shape::interval(0, 1), h)), 0.5, h);
    auto two = Shape::unite({Shape::ball({-3, 0}, 1, 2), Shape::ball({2, 0}, 2, 2)});
    EXPECT_NEAR(inradius(build_domain(two, 1.0 / 8)), 2.0, 1.0 / 8);
    EXPECT_NEAR(inradius(build_domain(Shape::rect(0, 0, 1, 0.5), h)), 0.25, h);
}

TEST(Inradius, WitnessBallIsInside) {
    auto om = build_domain(Shape::rect(0, 0, 1, 0.5), 1.0 / 16);
    auto w = inradius_witness(om);
    EXPECT_NEAR(w.radius, local_inradius(om, w.center), 1e-15);
    for (std::size_t k = 0; k < om.box.size(); ++k) {
        auto c = om.box.center(k);
        if (std::hypot(c[0] - w.center[0], c[1] - w.center[1]) <= w.radius) {
            EXPECT_TRUE(om.active[k]);
        }
    }
}

TEST(Negligible, BallInsideDomainForEveryGamma) {
    auto om = build_domain(Shape::interval(-1, 1), 1.0 / 32);
    FracParams prm(1, 0.5, 2, 2);
    for (double g : {0.01, 0.5, 0.99}) {
        auto r = negligible({{0, 0}, 0.5}, om, prm, g);
        EXPECT_EQ(r.lhs, 0.0);
        EXPECT_GT(r.rhs, 0.0);
        EXPECT_TRUE(r.negligible);
    }
}

TEST(Negligible, EmptyDomainNeverNegligible) {
    auto om = build_domain(Shape::interval(-1, 1), 1.0 / 32);
    std::fill(om.active.begin(), om.active.end(), 0);
    FracParams prm(1, 0.5, 2, 2);
    for (double g : {0.1, 0.9}) {
        auto r = negligible({{0, 0}, 0.25}, om, prm, g);
        EXPECT_NEAR(r.lhs, r.rhs / g, 1e-12 * r.lhs);
        EXPECT_FALSE(r.negligible);
    }
}

TEST(Negligible, OffLatticeCenterRejected) {
    auto om = build_domain(Shape::interval(-1, 1), 1.0 / 32);
    FracParams prm(1, 0.5, 2, 2);
    EXPECT_THROW(negligible({{0.001, 0}, 0.25}, om, prm, 0.5), DomainError);
    EXPECT_THROW(negligible({{0, 0}, 0.25}, om, prm, 1.5), DomainError);
}

TEST(Negligible, SlabFailureObeysCapVol) {
    // wide ball across a thin slab: lhs >= |removed| lambda(B_2r) by cap-vol
    const double h = 1.0 / 8;
    auto om = build_domain(Shape::slab(4, 0.5), h);
    FracParams prm(2, 0.5, 2, 2);
    NegligibilityTester T(om, prm);
    double r = 1.5;
    auto res = T.test({0, 0}, r, 0.2);
    EXPECT_FALSE(res.negligible);
    auto ball2 = build_domain(Shape::ball({0, 0}, 2 * r, 2), h);
    double lam = frequency(ball2, prm).value;
    EXPECT_GE(res.lhs, res.removed_cells * h * h * lam * (1 - 1e-9));
}

TEST(CapacitaryInradius, BallDomainCertifiesConcentricBall) {
    const double h = 1.0 / 16;
    auto om = build_domain(Shape::interval(-1, 1), h);
    FracParams prm(1, 0.5, 2, 2);
    InradiusConfig cfg;
    cfg.max_centers = 8;
    auto R = capacitary_inradius(om, prm, 0.3, cfg);
    EXPECT_GE(R.r_lower, 1.0 - h);
    EXPECT_LE(R.r_lower, R.r_upper);
    EXPECT_GE(R.r_lower, inradius(om));
    // the witness reproduces its pass bit
    NegligibilityTester T(om, prm);
    EXPECT_TRUE(T.test(R.witness.center, R.witness.radius, 0.3).negligible);
    EXPECT_TRUE(T.test(R.witness.center, R.witness.radius, 0.3).negligible);
}

TEST(CapacitaryInradius, MonotoneInGammaAndAboveInradius) {
    const double h = 1.0 / 16;
    auto om = build_domain(Shape::rect(0, 0, 1, 0.5), h);
    FracParams prm(2, 0.5, 2, 2);
    InradiusConfig cfg;
    cfg.max_centers = 6;
    NegligibilityTester T(om, prm);
    double prev = 0;
    for (double g : {0.05, 0.2, 0.5, 0.8}) {
        auto R = capacitary_inradius(T, g, cfg);
        EXPECT_GE(R.r_lower, prev) << g;
        EXPECT_GE(R.r_lower, inradius(om));
        EXPECT_LE(R.r_lower, R.r_upper);
        prev = R.r_lower;
    }
}

TEST(CapacitaryInradius, LocalVariantRuns) {
    const double h = 1.0 / 16;
    auto om = build_domain(Shape::interval(0, 1), h);
    FracParams prm(1, 0.5, 2, 2);
    InradiusConfig cfg;
    cfg.local = true;
    cfg.max_centers = 4;
    auto R = capacitary_inradius(om, prm, 0.3, cfg);
    EXPECT_GE(R.r_lower, 0.5);
    EXPECT_TRUE(std::isfinite(R.r_upper));
}
