#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "frac/harness.hpp"

using namespace frac;

TEST(Config, ParsesKeysFractionsAndComments) {
    auto c = parse_config_string("# comment\nh = 1/128\nh2=0.125  # trailing\n\nnear_band=3\ntol_exact=1e-9\ntol_discrete=0.05\n"
                                 "tol_plateau=0.2\ncorpus_size=10\ngamma_safety=0.25\n");
    EXPECT_DOUBLE_EQ(c.h, 1.0 / 128);
    EXPECT_DOUBLE_EQ(c.h2, 0.125);
    EXPECT_EQ(c.near_band, 3);
    EXPECT_DOUBLE_EQ(c.tol_exact, 1e-9);
    EXPECT_DOUBLE_EQ(c.tol_discrete_for(1), 0.05);
    EXPECT_NEAR(c.tol_discrete_for(2), 0.05 * 5 / 3, 1e-15);
    EXPECT_DOUBLE_EQ(c.tol_plateau, 0.2);
    EXPECT_EQ(c.corpus_size, 10);
    EXPECT_DOUBLE_EQ(c.gamma_safety, 0.25);
}

TEST(Config, DefaultTolerancesMatchStatedValues) {
    HarnessConfig c;
    EXPECT_EQ(c.tol_exact, 1e-10);
    EXPECT_EQ(c.tol_discrete_for(1), 0.03);
    EXPECT_NEAR(c.tol_discrete_for(2), 0.05, 1e-15);
    EXPECT_EQ(c.tol_plateau, 0.15);
    EXPECT_EQ(c.corpus_size, 200);
    EXPECT_NE(describe_config(c).find("tol_discrete_2d=0.05"), std::string::npos);
}

TEST(Config, RejectsMalformedInput) {
    for (const char* bad : {"bogus=1", "h", "h=abc", "h=1/0", "h=-1", "near_band=1.5", "corpus_size=0", "gamma_safety=1", "h=1/64x"})
        EXPECT_THROW(parse_config_string(bad), ParseError) << bad;
    EXPECT_THROW(load_config("/nonexistent/cfg"), ParseError);
}

TEST(Checks, PassIffSlackNonNegative) {
    auto a = check_le(1.0, 2.0);
    EXPECT_TRUE(a.pass);
    EXPECT_DOUBLE_EQ(a.slack, 0.5);
    auto b = check_le(2.0, 1.0, 0.5);
    EXPECT_FALSE(b.pass);
    EXPECT_LT(b.slack, 0);
    EXPECT_TRUE(check_le(1.0, 1.0).pass);
    EXPECT_TRUE(check_le(5.0, std::numeric_limits<double>::infinity()).pass);
    EXPECT_FALSE(check_le(std::nan(""), 1.0).pass);
    auto e = check_eq(1.0 + 1e-11, 1.0, 1e-10);
    EXPECT_TRUE(e.pass);
    EXPECT_FALSE(check_eq(1.1, 1.0, 0.05).pass);
    auto p = check_plateau({1.0, 1.1}, 0.15);
    EXPECT_TRUE(p.pass);
    EXPECT_NEAR(p.lhs, 0.1 / 1.1, 1e-15);
    EXPECT_FALSE(check_plateau({1.0, 2.0}, 0.15).pass);
    EXPECT_FALSE(check_plateau({-1.0, -1.0}, 0.15).pass);  // limit must be positive
}

namespace {
VerificationReport sample_report() {
    VerificationReport r;
    r.suite = "demo";
    r.environment.params = "h=0.5";
    r.environment.h = 0.5;
    r.environment.seed = 42;
    auto c1 = check_le(1, std::numeric_limits<double>::infinity());
    c1.id = "demo.inf";
    c1.description = "anchor \"quoted\", with comma";
    auto c2 = check_eq(0.1, 0.3, 1e-3);
    c2.id = "demo.eq";
    c2.runtime_ms = 12.5;
    Check c3;
    c3.id = "demo.err";
    c3.relation = "error";
    c3.lhs = c3.rhs = c3.slack = std::numeric_limits<double>::quiet_NaN();
    c3.diagnostic = "failure: boom";
    r.checks = {c1, c2, c3};
    return r;
}
}  // namespace

TEST(Report, JsonRoundTripIsLossless) {
    auto r = sample_report();
    auto text = report_json_string(r);
    auto back = report_from_string(text);
    EXPECT_EQ(report_json_string(back), text);
    EXPECT_TRUE(std::isinf(back.checks[0].rhs));
    EXPECT_TRUE(std::isnan(back.checks[2].lhs));
    EXPECT_EQ(back.checks[1].runtime_ms, 12.5);
    EXPECT_FALSE(back.checks[0].runtime_ms.has_value());
    EXPECT_EQ(back.environment.version, kVersion);
    EXPECT_FALSE(back.all_pass());
    EXPECT_EQ(back.failures(), 2u);
    EXPECT_THROW(report_from_string("{"), ParseError);
    EXPECT_THROW(report_from_string("{\"suite\":1}"), ParseError);
}

TEST(Report, CsvHasHeaderAndQuotedFields) {
    auto csv = report_csv(sample_report());
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "suite,id,relation,lhs,rhs,tol,slack,pass,description,diagnostic");
    EXPECT_NE(csv.find("\"anchor \"\"quoted\"\", with comma\""), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(ShapeParser, EveryKind) {
    EXPECT_EQ(build_domain(parse_shape("interval:0,1"), 0.25).measure(), 1.0);
    EXPECT_EQ(build_domain(parse_shape("ball:0,0,1"), 0.5).cells().size(), 12u);
    EXPECT_EQ(parse_shape("ball:0.5,1").dim, 1);
    EXPECT_EQ(build_domain(parse_shape("rect:0,0,1,0.5"), 0.125).cells().size(), 32u);
    EXPECT_EQ(parse_shape("slab:2,1").dim, 2);
    auto full = build_domain(parse_shape("rect:0,0,1,0.5"), 0.125);
    auto holed = build_domain(parse_shape("punctured:rect:0,0,1,0.5;1,1"), 0.125);
    EXPECT_EQ(holed.cells().size() + 1, full.cells().size());

    const std::string path = testing::TempDir() + "frac_mask.txt";
    {
        std::ofstream f(path);
        write_mask(f, full);
    }
    EXPECT_EQ(build_domain(parse_shape("mask:" + path), 0.125).cells().size(), full.cells().size());
    std::remove(path.c_str());
}

TEST(ShapeParser, RejectsMalformedSpecs) {
    for (const char* bad : {"interval", "interval:0", "ball:1", "rect:0,0,1", "torus:1,2", "punctured:interval:0,1", "punctured:interval:0,1;1.5",
                            "punctured:rect:0,0,1,1;1", "interval:a,b"})
        EXPECT_THROW(parse_shape(bad), ParseError) << bad;
    EXPECT_THROW(parse_shape("mask:/nonexistent"), ParseError);
}

TEST(Rng, DeterministicAndSuiteSpecific) {
    Rng a(mix_seed(7, "poincare")), b(mix_seed(7, "poincare")), c(mix_seed(7, "mazya"));
    for (int i = 0; i < 5; ++i) {
        double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GE(x, 0);
        EXPECT_LT(x, 1);
    }
    EXPECT_NE(Rng(mix_seed(7, "poincare")).uniform(), c.uniform());
    Rng d(1);
    for (int i = 0; i < 100; ++i) EXPECT_LT(d.below(3), 3u);
}

TEST(RandomSets, CompactStaysInsideBall) {
    // lattice convention: a cell belongs to a set when its centre does
    Rng rng(3);
    auto dom = Refs::ball(2, 2, 1.0 / 8);
    for (int i = 0; i < 20; ++i) {
        Mask m = random_compact(dom.box, rng, 0.75);
        EXPECT_GT(count(m), 0u);
        for (std::size_t k = 0; k < m.size(); ++k) {
            if (!m[k]) continue;
            EXPECT_LE(std::hypot(dom.box.center(k)[0], dom.box.center(k)[1]), 0.75 + 1e-12);
        }
        EXPECT_LE(far_extent(m, dom.box), 0.75 + dom.box.h / std::sqrt(2.0) + 1e-12);
    }
}

TEST(SuiteRun, SolverFailureBecomesFailedCheck) {
    HarnessConfig cfg;
    Refs refs;
    SuiteRun S(cfg, refs, "demo");
    S.run("throws", "anchor", []() -> Check { throw ConvergenceError("no progress"); });
    S.run("fine", "anchor", [] { return check_le(1, 2); });
    ASSERT_EQ(S.checks.size(), 2u);
    EXPECT_FALSE(S.checks[0].pass);
    EXPECT_EQ(S.checks[0].relation, "error");
    EXPECT_NE(S.checks[0].diagnostic.find("no progress"), std::string::npos);
    EXPECT_EQ(S.checks[0].id, "demo.throws");
    EXPECT_TRUE(S.checks[1].pass);
    EXPECT_FALSE(S.checks[1].runtime_ms.has_value());
}

TEST(Corpus, CountsViolationsAndTightestInstance) {
    Corpus c;
    c.add(1, 2);
    c.add(3, 2, "bad");
    c.add(1.9, 2);
    auto r = c.result();
    EXPECT_FALSE(r.pass);
    EXPECT_EQ(r.lhs, 3);
    EXPECT_NE(r.diagnostic.find("violations=1"), std::string::npos);
    EXPECT_NE(r.diagnostic.find("first_violation=bad"), std::string::npos);
    EXPECT_FALSE(Corpus().result().pass);
    EXPECT_TRUE(Corpus().result(true).pass);
}

TEST(RunSuite, ScalingPassesAndIsByteDeterministic) {
    HarnessConfig cfg;
    cfg.seed = 7;
    auto a = run_suite("scaling", cfg);
    EXPECT_TRUE(a.all_pass()) << report_csv(a);
    EXPECT_EQ(report_json_string(a), report_json_string(run_suite("scaling", cfg)));
    for (const auto& c : a.checks) {
        EXPECT_EQ(c.id.rfind("scaling.", 0), 0u);
        EXPECT_FALSE(c.description.empty());
    }
    EXPECT_TRUE(std::is_sorted(a.checks.begin(), a.checks.end(), [](const Check& x, const Check& y) { return x.id < y.id; }));
    EXPECT_THROW(run_suite("nope", cfg), DomainError);
}

TEST(RunSuite, CorpusSuiteRepeatsUnderSeedAndChangesWithIt) {
    HarnessConfig cfg;
    cfg.corpus_size = 8;
    cfg.seed = 1;
    auto a = report_json_string(run_suite("poincare", cfg));
    EXPECT_EQ(a, report_json_string(run_suite("poincare", cfg)));
    cfg.seed = 2;
    EXPECT_NE(a, report_json_string(run_suite("poincare", cfg)));
}

TEST(Sweep, SmallSPlateauAndPerimeterOracle) {
    HarnessConfig cfg;
    auto t = sweep("s", {0.05, 0.1}, "s_lambda", cfg);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(check_plateau({t.rows[0].second, t.rows[1].second}, 0.15).pass);

    SweepBase b;
    b.shape = "interval:-1,1";
    auto per = sweep("h", {1.0 / 64, 1.0 / 128, 1.0 / 256}, "perimeter", cfg, b);
    const double exact = 4 * std::pow(2.0, 0.5) / 0.25;
    double prev = 1e300;
    for (auto [h, v] : per.rows) {
        double err = std::abs(v - exact);
        EXPECT_LT(err, prev) << h;
        prev = err;
    }
    EXPECT_NE(sweep_csv(per).find("h,perimeter"), std::string::npos);
}

TEST(Sweep, RegistryTargetsAndErrors) {
    HarnessConfig cfg;
    auto t = sweep("ratio", {2, 4}, "E", cfg);
    EXPECT_LT(t.rows[1].second, t.rows[0].second);
    EXPECT_THROW(sweep("s", {0.1}, "nonsense", cfg), DomainError);
    EXPECT_THROW(sweep("q", {0.1}, "lambda", cfg), DomainError);
    EXPECT_THROW(sweep("s", {}, "lambda", cfg), DomainError);
}

TEST(Oracle, DiscPerimeterMatchesLatticeLimit) {
    const double exact = oracle::disc_perimeter(0.5, 0.5);
    EXPECT_NEAR(oracle::disc_perimeter(0.5, 1.0) * std::pow(0.5, 1.5), exact, 1e-10 * exact);
    double prev = 1e300;
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        auto d = build_domain(Shape::ball({0, 0}, 0.5, 2), h);
        double err = std::abs(frac_perimeter(d, 0.5) / exact - 1);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 0.03);
    EXPECT_NEAR(oracle::interval_perimeter(0.5, 2), 4 * std::sqrt(2.0) / 0.25, 1e-12);
}
