// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff every criterion passes.
// Usage: acceptance <path to frac binary> <tests/data directory>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "frac/harness.hpp"

using namespace frac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string g(double v) {
    std::ostringstream o;
    o << std::setprecision(6) << v;
    return o.str();
}

int failures = 0;

template <class F>
void criterion(int id, const std::string& title, double limit_s, F&& body) {
    Clock c;
    Outcome r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    double t = c.seconds();
    bool in_time = t <= limit_s;
    bool ok = r.pass && in_time;
    failures += !ok;
    std::cout << "criterion " << std::setw(2) << id << ": " << (ok ? "PASS" : "FAIL") << " | " << title << " | " << r.detail << " | time "
              << g(t) << " s (limit " << g(limit_s) << " s)" << (in_time ? "" : " EXCEEDED") << std::endl;
}

// Selected checks of a suite report, all of which must pass.
Outcome require(const VerificationReport& rep, const std::vector<std::string>& ids) {
    Outcome o{true, ""};
    for (const auto& id : ids) {
        auto it = std::find_if(rep.checks.begin(), rep.checks.end(), [&](const Check& c) { return c.id == id; });
        if (it == rep.checks.end()) {
            o.pass = false;
            o.detail += id + "=missing ";
            continue;
        }
        o.pass = o.pass && it->pass;
        o.detail += id + "=" + (it->pass ? "ok" : "FAILED") + "(slack " + g(it->slack) + ") ";
    }
    return o;
}

Outcome require_all(const VerificationReport& rep) {
    Outcome o{rep.all_pass(), std::to_string(rep.checks.size() - rep.failures()) + "/" + std::to_string(rep.checks.size()) + " checks pass"};
    for (const auto& c : rep.checks)
        if (!c.pass) o.detail += "; failed " + c.id + " (" + c.diagnostic + ")";
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream o;
    o << f.rdbuf();
    return o.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: acceptance <frac binary> <data dir>\n";
        return 2;
    }
    const std::string frac_bin = argv[1];
    const fs::path data = argv[2];
    const HarnessConfig cfg = load_config((data / "acceptance.cfg").string());
    SolverOptions opt;
    opt.near_band = cfg.near_band;

    criterion(1, "P_s((-1,1)) vs 4*2^(1-s)/(s(1-s)) at h=1/256, 1%", 15, [&] {
        Outcome o{true, ""};
        auto A = build_domain(Shape::interval(-1, 1), 1.0 / 256);
        for (double s : {0.25, 0.5, 0.75}) {
            Clock c;
            double v = frac_perimeter(A, s, cfg.near_band), ex = oracle::interval_perimeter(s, 2);
            double rel = std::abs(v / ex - 1);
            bool ok = rel <= 0.01 && c.seconds() < 5;
            o.pass = o.pass && ok;
            o.detail += "s=" + g(s) + " rel.err " + g(rel) + (ok ? "" : " (FAILED)") + "; ";
        }
        return o;
    });

    criterion(2, "scaling exactness of lambda^s_{2,2} and cap_{s,2}, 1e-10", 10, [&] {
        double worst = 0;
        for (int N : {1, 2}) {
            const double h = N == 1 ? 1.0 / 64 : 1.0 / 16;
            FracParams P(N, 0.5, 2, 2);
            auto om = build_domain(N == 1 ? Shape::interval(0, 1) : Shape::rect(0, 0, 1, 0.5), h);
            auto env = build_domain(Shape::ball({0, 0}, 1, N), h);
            Mask sig = rasterize(Shape::ball({0, 0}, 0.5, N, true), env.box);
            double l = frequency(om, P, opt).value, c = capacity(sig, env, P, opt).value;
            for (double r : {0.5, 2.5}) {
                double lr = frequency(om.rescaled(r), P, opt).value, cr = capacity(sig, env.rescaled(r), P, opt).value;
                worst = std::max(worst, std::abs(lr / (l * std::pow(r, -P.alpha())) - 1));
                worst = std::max(worst, std::abs(cr / (c * std::pow(r, N - P.sp())) - 1));
            }
        }
        return Outcome{worst <= 1e-10, "max rel.err " + g(worst) + " over N in {1,2}, r in {0.5,2.5}"};
    });

    criterion(3, "cap_{s,1}(closed B_1/2; B_1) = P_s(B_1/2), N=1 h=1/256 3%, N=2 h=1/64 5%", 60, [&] {
        Outcome o{true, ""};
        for (int N : {1, 2}) {
            const double h = N == 1 ? 1.0 / 256 : 1.0 / 64, tol = N == 1 ? 0.03 : 0.05;
            auto env = build_domain(Shape::ball({0, 0}, 1, N), h);
            Mask sig = rasterize(Shape::ball({0, 0}, 0.5, N, true), env.box);
            double c = capacity(sig, env, FracParams(N, 0.5, 1, 1), opt).value;
            double ex = N == 1 ? oracle::interval_perimeter(0.5, 1) : oracle::disc_perimeter(0.5, 0.5);
            double rel = std::abs(c / ex - 1);
            o.pass = o.pass && rel <= tol;
            o.detail += "N=" + std::to_string(N) + " cap " + g(c) + " vs " + g(ex) + " rel.err " + g(rel) + "; ";
        }
        return o;
    });

    criterion(4, "Cheeger h_s(B_1;B_2) vs P_s(B_1)/|B_1| within 3%, optimal set = B_1 up to one layer", 60, [&] {
        Outcome o{true, ""};
        const double h = 1.0 / 64;
        auto om = build_domain(Shape::interval(-2, 2), h);
        Mask E = rasterize(Shape::interval(-1, 1), om.box);
        for (double s : {0.3, 0.5}) {
            auto r = cheeger(E, om, s, opt);
            double ex = oracle::interval_perimeter(s, 2) / 2;
            double rel = std::abs(r.value / ex - 1);
            // one cell layer on each side of the interval
            std::size_t diff = 0;
            for (std::size_t k = 0; k < E.size(); ++k) diff += (r.level_set[k] != 0) != (E[k] != 0);
            bool ok = rel <= 0.03 && diff <= 2;
            o.pass = o.pass && ok;
            o.detail += "s=" + g(s) + " rel.err " + g(rel) + " set diff " + std::to_string(diff) + " cells; ";
        }
        return o;
    });

    criterion(5, "torsion identity (p=2 < 1e-8, p=1.5 < 1e-3) and torsion bound with S_hat", 60, [&] {
        Outcome o{true, ""};
        const double h = 1.0 / 64;
        for (double p : {2.0, 1.5}) {
            FracParams P(1, 0.5, p, p);
            auto t = torsion_identity(torsion(0.5, 1.0, P, h, opt), 0.5, P, cfg.near_band);
            bool ok = t.rel_gap < (p == 2 ? 1e-8 : 1e-3);
            o.pass = o.pass && ok;
            o.detail += "p=" + g(p) + " gap " + g(t.rel_gap) + "; ";
        }
        Refs refs(cfg.near_band);
        for (int N : {1, 2}) {
            const double s = N == 1 ? 0.25 : 0.5, hh = N == 1 ? h : 1.0 / 16;
            FracParams P(N, s, 2, 2);
            auto t = torsion_identity(torsion(0.5, 1.0, P, hh, opt), 0.5, P, cfg.near_band);
            double bound = eval_constant("torsion_bound", refs.context(P, hh, Refs::Sob), {{"r", 0.5}});
            bool ok = t.energy <= bound;
            o.pass = o.pass && ok;
            o.detail += "N=" + std::to_string(N) + " [V]^p " + g(t.energy) + " <= " + g(bound) + (ok ? "" : " (FAILED)") + "; ";
        }
        return o;
    });

    criterion(6, "inequality corpus, 200 seeded configurations each, zero violations", 300, [&] {
        HarnessConfig c = cfg;
        c.corpus_size = 200;
        auto caps = require(run_suite("cap_identities", c), {"cap_identities.cap_vol", "cap_identities.cap_cap", "cap_identities.cap_balls_left",
                                                             "cap_identities.cap_balls_right", "cap_identities.truncation"});
        auto poin = require(run_suite("poincare", c), {"poincare.poincare_sobolev"});
        auto maz = require(run_suite("mazya", c), {"mazya.mazya_poincare_sobolev"});
        return Outcome{caps.pass && poin.pass && maz.pass, caps.detail + poin.detail + maz.detail};
    });

    criterion(7, "main-theorem sandwich on interval, rect, punctured rect with gamma = 0.25 gamma0_hat", 300, [&] {
        HarnessConfig c = cfg;
        c.gamma_safety = 0.25;
        return require_all(run_suite("sandwich", c));
    });

    criterion(8, "asymptotics: s lambda and (1-s) lambda plateaus within 15%, K_hat > 0", 300, [&] {
        return require(run_suite("asymptotics", cfg), {"asymptotics.s_lambda_s0", "asymptotics.s_lambda_s1", "asymptotics.K_hat"});
    });

    criterion(9, "slab(8,1): volume bound for every negligible ball, r_lower <= phi^-1(RHS)", 300, [&] { return require_all(run_suite("slab", cfg)); });

    criterion(10, "frac verify --suite all --seed 7 twice gives byte-identical JSON", 3000, [&] {
        fs::path dir = fs::temp_directory_path() / ("frac_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        std::vector<std::string> outs;
        std::vector<int> codes;
        for (int k = 0; k < 2; ++k) {
            fs::path out = dir / ("report" + std::to_string(k) + ".json");
            std::string cmd = "\"" + frac_bin + "\" verify --suite all --seed 7 --out \"" + out.string() + "\"";
            int st = std::system(cmd.c_str());
            codes.push_back(WIFEXITED(st) ? WEXITSTATUS(st) : -1);
            outs.push_back(slurp(out));
        }
        fs::remove_all(dir);
        bool ran = codes[0] >= 0 && codes[0] <= 1 && codes[1] == codes[0] && !outs[0].empty();
        bool same = outs[0] == outs[1];
        return Outcome{ran && same, std::to_string(outs[0].size()) + " bytes, identical=" + (same ? "yes" : "no") + ", exit " +
                                        std::to_string(codes[0]) + " (1 means the report records failed checks)"};
    });

    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
