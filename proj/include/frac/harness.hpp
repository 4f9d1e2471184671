#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "frac/constants.hpp"
#include "frac/geometry.hpp"
#include "frac/report.hpp"
#include "frac/solvers.hpp"

namespace frac {

// ---------------------------------------------------------------- shape mini-language
//   interval:a,b | ball:cx[,cy],r | rect:x0,y0,x1,y1 | slab:L,w | mask:<path> | punctured:<spec>;i[,j];...

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<double> numbers(const std::string& s, const std::string& what) {
    std::vector<double> v;
    for (const auto& t : split(s, ',')) v.push_back(parse_number(t, what));
    return v;
}

}  // namespace detail

inline Shape parse_shape(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) throw ParseError("shape spec needs kind:args, got '" + spec + "'");
    std::string kind = spec.substr(0, colon), rest = spec.substr(colon + 1);
    if (kind == "punctured") {
        auto parts = detail::split(rest, ';');
        if (parts.size() < 2) throw ParseError("punctured needs at least one removed cell");
        Shape inner = parse_shape(parts[0]);
        std::vector<CellIndex> cells;
        for (std::size_t i = 1; i < parts.size(); ++i) {
            auto v = detail::numbers(parts[i], "punctured cell");
            if (v.size() != std::size_t(inner.dim)) throw ParseError("punctured cell needs " + std::to_string(inner.dim) + " indices");
            CellIndex g{0, 0};
            for (std::size_t a = 0; a < v.size(); ++a) {
                if (v[a] != std::floor(v[a])) throw ParseError("cell indices must be integers");
                g[a] = long(v[a]);
            }
            cells.push_back(g);
        }
        return Shape::punctured(inner, cells);
    }
    if (kind == "mask") return Shape::from_mask(std::make_shared<const MaskData>(load_mask(rest)));
    auto v = detail::numbers(rest, kind);
    if (kind == "interval") {
        if (v.size() != 2) throw ParseError("interval needs a,b");
        return Shape::interval(v[0], v[1]);
    }
    if (kind == "ball") {
        if (v.size() == 2) return Shape::ball({v[0], 0}, v[1], 1);
        if (v.size() == 3) return Shape::ball({v[0], v[1]}, v[2], 2);
        throw ParseError("ball needs cx,r or cx,cy,r");
    }
    if (kind == "rect") {
        if (v.size() != 4) throw ParseError("rect needs x0,y0,x1,y1");
        return Shape::rect(v[0], v[1], v[2], v[3]);
    }
    if (kind == "slab") {
        if (v.size() != 2) throw ParseError("slab needs L,w");
        return Shape::slab(v[0], v[1]);
    }
    throw ParseError("unknown shape kind: " + kind);
}

// ---------------------------------------------------------------- deterministic randomness

struct Rng {
    std::mt19937_64 g;
    explicit Rng(std::uint64_t seed) : g(seed) {}
    // Built from raw bits so the stream does not depend on the standard library's distributions.
    double uniform(double a = 0, double b = 1) { return a + (b - a) * double(g() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return std::min(n - 1, std::size_t(uniform() * double(n))); }
};

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t x = 1469598103934665603ull;
    for (unsigned char c : name) x = (x ^ c) * 1099511628211ull;
    return x ^ (seed * 0x9E3779B97F4A7C15ull);
}

// Sum of tensor-product bumps (1 - t^2)_+^2 with random centres, widths and amplitudes.
inline LatticeFunction random_bumps(const Box& box, Rng& rng, const Point& c, double spread, int count = 3) {
    LatticeFunction u(box);
    for (int k = 0; k < count; ++k) {
        Point ck{c[0] + rng.uniform(-spread, spread), box.dim == 2 ? c[1] + rng.uniform(-spread, spread) : 0.0};
        double rho = rng.uniform(0.25, 0.8) * spread + 2 * box.h;
        double a = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < box.size(); ++i) {
            Point x = box.center(i);
            double v = a;
            for (int d = 0; d < box.dim; ++d) {
                double t = (x[std::size_t(d)] - ck[std::size_t(d)]) / rho;
                v *= t * t < 1 ? (1 - t * t) * (1 - t * t) : 0.0;
            }
            u.values[i] += v;
        }
    }
    return u;
}

// Random compact set inside the closed ball B_r(0): union of closed lattice balls.
inline Mask random_compact(const Box& box, Rng& rng, double r) {
    Mask m(box.size(), 0);
    int parts = 1 + int(rng.below(3));
    const double rmin = 1.5 * box.h;
    for (int k = 0; k < parts; ++k) {
        double rad = rng.uniform(rmin, std::max(rmin, r / 3));
        double room = r - rad;
        Point c{rng.uniform(-room, room), 0};
        if (box.dim == 2) {
            c[1] = rng.uniform(-room, room);
            double n = std::hypot(c[0], c[1]);
            if (n > room) c = {c[0] * room / n, c[1] * room / n};
        }
        Mask b = rasterize(Shape::ball(c, rad, box.dim, true), box);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] |= b[i];
    }
    return m;
}

inline std::size_t count(const Mask& m) { return std::size_t(std::count(m.begin(), m.end(), std::uint8_t(1))); }

// Largest distance from the origin to a point of the closed cells of m.
inline double far_extent(const Mask& m, const Box& box) {
    double best = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        Point c = box.center(i);
        double ex = std::abs(c[0]) + box.h / 2, ey = box.dim == 2 ? std::abs(c[1]) + box.h / 2 : 0.0;
        best = std::max(best, std::hypot(ex, ey));
    }
    return best;
}

// ---------------------------------------------------------------- reference quantities

// Numerically computed plug-ins for the constant chains, cached per (quantity, params, h).
class Refs {
public:
    explicit Refs(int near_band = 2) { opt_.near_band = near_band; }

    enum Need : unsigned {
        LamBall = 1,
        LamBallP = 2,
        CapBall = 4,
        Local = 8,
        LamB2 = 16,
        SLim = 32,
        Conf = 64,
        Sob = 128,
    };

    double lambda_ball(int N, double s, double p, double q, double h) {
        return get("lambda_ball", {double(N), s, p, q, h}, [&] { return frequency(ball(N, 1, h), prm(N, s, p, q), opt_).value; });
    }
    double cap_ball(int N, double s, double p, double h) {
        return get("cap_ball", {double(N), s, p, h}, [&] {
            auto B2 = ball(N, 2, h);
            Mask cl = rasterize(Shape::ball({0, 0}, 1, N, true), B2.box);
            return capacity(cl, B2, prm(N, s, p, p), opt_).value;
        });
    }
    double local_lambda(int N, double p, double h) {
        return get("local_lambda", {double(N), p, h}, [&] { return local_frequency(ball(N, 2, h), p, opt_).value; });
    }
    double local_cap(int N, double p, double h) {
        return get("local_cap", {double(N), p, h}, [&] {
            auto B2 = ball(N, 2, h);
            Mask cl = rasterize(Shape::ball({0, 0}, 1, N, true), B2.box);
            return local_capacity(cl, B2, p, opt_).value;
        });
    }
    double lambda_b2(int N, double s, double p, double h) {
        return get("lambda_b2", {double(N), s, p, h}, [&] { return frequency(ball(N, 2, h), prm(N, s, p, p), opt_).value; });
    }
    // s lambda^s_p(B_2) at s = 0.05, standing in for the liminf as s -> 0
    double s_lambda_limit(int N, double p, double h) {
        return get("s_lambda_limit", {double(N), p, h}, [&] { return 0.05 * frequency(ball(N, 2, h), prm(N, 0.05, p, p), opt_).value; });
    }
    double lambda_conformal(int N, double s, double h) {
        return get("lambda_conformal", {double(N), s, h}, [&] { return frequency(ball(N, 1, h), prm(N, s, N / s, 1), opt_).value; });
    }
    // One-sided estimate 1/lambda_{p,p*}(B_1) of the Sobolev constant (sp < N).
    double sobolev_S(int N, double s, double p, double h) {
        return get("sobolev_S", {double(N), s, p, h}, [&] {
            double ps = sobolev_exponent(N, s, p);
            return 1.0 / frequency(ball(N, 1, h), prm(N, s, p, ps), opt_).value;
        });
    }

    ConstantContext context(const FracParams& P, double h, unsigned need) {
        ConstantContext c;
        c.params = P;
        const int N = P.dim;
        if (need & LamBall) c.ref_lambda_ball = lambda_ball(N, P.s, P.p, P.q, h);
        if (need & LamBallP) c.ref_lambda_ball_p = lambda_ball(N, P.s, P.p, P.p, h);
        if (need & CapBall) c.ref_cap_ball = cap_ball(N, P.s, P.p, h);
        if (need & Local) {
            c.ref_local_lambda = local_lambda(N, P.p, h);
            c.ref_local_cap = local_cap(N, P.p, h);
        }
        if (need & LamB2) c.ref_lambda_b2 = lambda_b2(N, P.s, P.p, h);
        if (need & SLim) c.s_lambda_limit = s_lambda_limit(N, P.p, h);
        if (need & Conf) c.lambda_conformal = lambda_conformal(N, P.s, h);
        if (need & Sob) c.sobolev_S = sobolev_S(N, P.s, P.p, h);
        return c;
    }

    const SolverOptions& options() const { return opt_; }

    static LatticeDomain ball(int N, double r, double h) { return build_domain(Shape::ball({0, 0}, r, N), h); }
    static FracParams prm(int N, double s, double p, double q) { return FracParams(N, s, p, q, std::nullopt, true); }

    double memo(const std::string& name, std::initializer_list<double> key, const std::function<double()>& f) { return get(name, key, f); }

private:
    double get(const std::string& name, std::initializer_list<double> key, const std::function<double()>& f) {
        std::ostringstream k;
        k << name << std::setprecision(17);
        for (double v : key) k << ':' << v;
        auto it = cache_.find(k.str());
        if (it != cache_.end()) return it->second;
        double v = f();
        cache_.emplace(k.str(), v);
        return v;
    }
    std::map<std::string, double> cache_;
    SolverOptions opt_;
};

// ---------------------------------------------------------------- suite plumbing

class SuiteRun {
public:
    SuiteRun(const HarnessConfig& cfg, Refs& refs, std::string suite)
        : cfg(cfg), refs(refs), name(std::move(suite)), rng(mix_seed(cfg.seed, name)) {
        opt.near_band = cfg.near_band;
    }

    const HarnessConfig& cfg;
    Refs& refs;
    std::string name;
    Rng rng;
    SolverOptions opt;
    std::vector<Check> checks;

    // Runs one check; solver failures become failed checks carrying the error text.
    template <class F>
    void run(const std::string& id, const std::string& description, F&& f) {
        auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = f();
        } catch (const std::exception& e) {
            c = Check{};
            c.relation = "error";
            c.lhs = c.rhs = c.slack = std::numeric_limits<double>::quiet_NaN();
            c.pass = false;
            c.diagnostic = std::string("failure: ") + e.what();
        }
        c.id = name + "." + id;
        c.description = description;
        if (cfg.timing) c.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        checks.push_back(std::move(c));
    }
};

// Aggregates a randomized family of "lhs <= rhs" instances into one check.
class Corpus {
public:
    explicit Corpus(double tol = 0) : tol_(tol) {}
    void add(double lhs, double rhs, const std::string& tag = {}) {
        Check c = check_le(lhs, rhs, tol_);
        ++n_;
        if (!c.pass) {
            ++bad_;
            if (first_.empty()) first_ = tag.empty() ? "#" + std::to_string(n_ - 1) : tag;
        }
        if (n_ == 1 || c.slack < worst_.slack || std::isnan(c.slack)) worst_ = c;
    }
    std::size_t size() const { return n_; }
    Check result(bool vacuous_ok = false) const {
        Check c = n_ ? worst_ : check_le(0, 0, tol_);
        c.pass = bad_ == 0 && (n_ > 0 || vacuous_ok);
        std::ostringstream d;
        d << "instances=" << n_ << " violations=" << bad_ << " (lhs/rhs shown for the tightest instance)";
        if (!first_.empty()) d << " first_violation=" << first_;
        c.diagnostic = d.str();
        return c;
    }

private:
    double tol_;
    std::size_t n_ = 0, bad_ = 0;
    Check worst_;
    std::string first_;
};

inline std::string fmt(double v) {
    std::ostringstream o;
    o << v;
    return o.str();
}

// Shared kernels for corpus work, keyed by box geometry and exponent.
class KernelCache {
public:
    const KernelWeights& get(const Box& box, const FracParams& P, int near_band) {
        std::ostringstream k;
        k << std::setprecision(17) << box.dim << ':' << box.h << ':' << box.lo[0] << ':' << box.lo[1] << ':' << box.n[0] << ':' << box.n[1]
          << ':' << P.s * P.p << ':' << P.dim;
        auto it = map_.find(k.str());
        if (it != map_.end()) return *it->second;
        auto kw = std::make_shared<KernelWeights>(assemble_kernel(box, P, near_band));
        map_.emplace(k.str(), kw);
        return *kw;
    }

private:
    std::map<std::string, std::shared_ptr<KernelWeights>> map_;
};

// ---------------------------------------------------------------- continuum oracles

namespace oracle {

// P_s of an interval of length L (Gagliardo convention: both orderings of A x A^c).
inline double interval_perimeter(double s, double L) { return 4 * std::pow(L, 1 - s) / (s * (1 - s)); }

// P_s of the disc of radius r. Along a chord of length l the exit-distance integral is
// l^{1-s}/(s(1-s)); integrating chords 2 sqrt(1-z^2) over offsets and directions gives a Beta function.
inline double disc_perimeter(double s, double r) {
    double chords = std::sqrt(std::numbers::pi) * std::tgamma((3 - s) / 2) / std::tgamma((4 - s) / 2);
    return 2 * 2 * std::numbers::pi * std::pow(2.0, 1 - s) * chords / (s * (1 - s)) * std::pow(r, 2 - s);
}

}  // namespace oracle

// ---------------------------------------------------------------- suites

namespace suites {

struct CorpusCase {
    int N;
    double h, p, s;
};

// Mix of corpus configurations: every fourth case is 2D on the coarse 2D lattice; p = 1.5 on
// alternate 1D blocks and on one 2D block in four (the 2D p = 1.5 solves dominate the cost).
inline CorpusCase corpus_case(int i, const HarnessConfig& cfg) {
    const int N = i % 4 == 3 ? 2 : 1;
    const double p = N == 1 ? ((i / 4) % 2 ? 1.5 : 2.0) : ((i / 4) % 4 == 3 ? 1.5 : 2.0);
    const double s = N == 1 && p == 2 ? (i % 3 ? 0.3 : 0.5) : 0.5;
    return {N, N == 1 ? 2 * cfg.h : 2 * cfg.h2, p, s};
}

inline double lam(const LatticeDomain& om, const FracParams& P, const SolverOptions& opt) { return frequency(om, P, opt).value; }

inline void scaling(SuiteRun& S) {
    const double h = S.cfg.h, h2 = S.cfg.h2, te = S.cfg.tol_exact;
    const std::string anchor = "eq. scaling-frequency; Remark riscalamento";
    for (double s : {0.3, 0.5}) {
        S.run("lambda_1d_s" + fmt(s), anchor + ": lambda(r Omega) = r^-alpha lambda(Omega), Omega=(0,1), p=q=2, r=2.5", [&] {
            FracParams P(1, s, 2, 2);
            auto om = build_domain(Shape::interval(0, 1), h);
            double a = lam(om, P, S.opt), b = lam(om.rescaled(2.5), P, S.opt);
            return check_eq(b, a * std::pow(2.5, -P.alpha()), te);
        });
    }
    S.run("lambda_2d", anchor + ": rect 1x0.5, p=q=2, s=0.5, r=0.5", [&] {
        FracParams P(2, 0.5, 2, 2);
        auto om = build_domain(Shape::rect(0, 0, 1, 0.5), h2);
        double a = lam(om, P, S.opt), b = lam(om.rescaled(0.5), P, S.opt);
        return check_eq(b, a * std::pow(0.5, -P.alpha()), te);
    });
    S.run("lambda_1d_q1", anchor + ": Omega=(0,1), p=2, q=1, s=0.5, r=2.5", [&] {
        FracParams P(1, 0.5, 2, 1);
        auto om = build_domain(Shape::interval(0, 1), h);
        double a = lam(om, P, S.opt), b = lam(om.rescaled(2.5), P, S.opt);
        return check_eq(b, a * std::pow(2.5, -P.alpha()), te);
    });
    for (int N : {1, 2}) {
        for (double p : {2.0, 1.5}) {
            if (N == 2 && p != 2) continue;
            const double hh = N == 1 ? h : h2;
            S.run("cap_" + std::to_string(N) + "d_p" + fmt(p),
                  "Remark riscalamento: cap(rK; rE) = r^{N-sp} cap(K;E), K=closed B_1/2, E=B_1, r=3",
                  [&] {
                      FracParams P(N, 0.5, p, p);
                      auto env = build_domain(Shape::ball({0, 0}, 1, N), hh);
                      Mask sig = rasterize(Shape::ball({0, 0}, 0.5, N, true), env.box);
                      double a = capacity(sig, env, P, S.opt).value, b = capacity(sig, env.rescaled(3), P, S.opt).value;
                      return check_eq(b, a * std::pow(3.0, N - P.sp()), p == 2 ? te : 1e-8);
                  });
        }
    }
    S.run("perimeter_1d", "proof of Prop. cap-per: P_s(rA) = r^{N-s} P_s(A), A=(-1,1), r=1.5",
          [&] {
              auto A = build_domain(Shape::interval(-1, 1), h);
              double a = frac_perimeter(A, 0.5, S.cfg.near_band), b = frac_perimeter(A.rescaled(1.5), 0.5, S.cfg.near_band);
              return check_eq(b, a * std::pow(1.5, 0.5), te);
          });
    S.run("perimeter_2d", "proof of Prop. cap-per: disc, r=0.5", [&] {
        auto A = build_domain(Shape::ball({0, 0}, 0.5, 2), h2);
        double a = frac_perimeter(A, 0.3, S.cfg.near_band), b = frac_perimeter(A.rescaled(0.5), 0.3, S.cfg.near_band);
        return check_eq(b, a * std::pow(0.5, 2 - 0.3), te);
    });
    S.run("local_lambda_1d", "local frequency homogeneity: lambda_p(rOmega) = r^-p lambda_p(Omega), p=2, r=2.5", [&] {
        auto om = build_domain(Shape::interval(0, 1), h);
        double a = local_frequency(om, 2, S.opt).value, b = local_frequency(om.rescaled(2.5), 2, S.opt).value;
        return check_eq(b, a * std::pow(2.5, -2.0), te);
    });
}

inline void monotonicity(SuiteRun& S) {
    const double h = S.cfg.h, h2 = S.cfg.h2;
    const std::string inc = "eq. scaling-frequency";
    S.run("inclusion_1d", inc + ": (0,1) inside (-0.25,1.25), p=q=2, s=0.5", [&] {
        FracParams P(1, 0.5, 2, 2);
        double big = lam(build_domain(Shape::interval(-0.25, 1.25), h), P, S.opt), small = lam(build_domain(Shape::interval(0, 1), h), P, S.opt);
        return check_le(big, small, 1e-12);
    });
    S.run("inclusion_2d", inc + ": rect 1x0.5 inside rect 1x1, p=q=2, s=0.5", [&] {
        FracParams P(2, 0.5, 2, 2);
        double big = lam(build_domain(Shape::rect(0, 0, 1, 1), h2), P, S.opt), small = lam(build_domain(Shape::rect(0, 0, 1, 0.5), h2), P, S.opt);
        return check_le(big, small, 1e-12);
    });
    const std::string mono = "eq. monotonicity";
    struct Case {
        std::string id;
        Shape shape;
        int N;
    };
    for (const auto& c : {Case{"interval", Shape::interval(0, 1), 1}, Case{"rect", Shape::rect(0, 0, 1, 0.5), 2}}) {
        const double hh = c.N == 1 ? h : h2;
        FracParams P(c.N, 0.5, 2, 2);
        S.run("inscribed_ball_" + c.id, mono + ": lambda(Omega) <= lambda(lattice ball of radius r_Omega inside Omega)", [&] {
            auto om = build_domain(c.shape, hh);
            auto w = inradius_witness(om);
            LatticeDomain b{om.box, rasterize(Shape::ball(w.center, w.radius, c.N), om.box)};
            return check_le(lam(om, P, S.opt), lam(b, P, S.opt), 1e-12);
        });
        S.run("sharp_bound_" + c.id, mono + ": lambda(Omega) <= lambda(B_1) r_Omega^-alpha (discretization tolerance)", [&] {
            auto om = build_domain(c.shape, hh);
            double rO = inradius(om);
            double ref = S.refs.lambda_ball(c.N, 0.5, 2, 2, hh);
            return check_le(lam(om, P, S.opt), ref * std::pow(rO, -P.alpha()), S.cfg.tol_discrete_for(c.N));
        });
    }
    // capacity monotone in sigma, antitone in env
    S.run("cap_nested", "solvers invariant: capacity monotone in Sigma and antitone in E (nested random sets)", [&] {
        Corpus C(1e-7);
        const double hc = 2 * h;
        auto E2 = build_domain(Shape::interval(-1.5, 1.5), hc);
        LatticeDomain E1{E2.box, rasterize(Shape::interval(-1, 1), E2.box)};
        int n = std::max(10, S.cfg.corpus_size / 10);
        for (int i = 0; i < n; ++i) {
            double p = i % 2 ? 1.5 : 2.0;
            FracParams P(1, 0.5, p, p);
            Mask s1 = random_compact(E2.box, S.rng, 0.4), s2 = s1;
            Mask extra = random_compact(E2.box, S.rng, 0.7);
            for (std::size_t k = 0; k < s2.size(); ++k) s2[k] |= extra[k];
            double c11 = capacity(s1, E1, P, S.opt).value, c21 = capacity(s2, E1, P, S.opt).value, c12 = capacity(s1, E2, P, S.opt).value;
            C.add(c11, c21, "sigma#" + std::to_string(i));
            C.add(c12, c11, "env#" + std::to_string(i));
        }
        return C.result();
    });
    S.run("slab_trend", "Corollary 1.8: lambda(slab_L) non-increasing in L (limit stays positive: finite inradius)",
          [&] {
              FracParams P(2, 0.5, 2, 2);
              Corpus C(1e-12);
              double prev = lam(build_domain(Shape::slab(1, 0.5), h2), P, S.opt);
              for (double L : {2.0, 3.0}) {
                  double cur = lam(build_domain(Shape::slab(L, 0.5), h2), P, S.opt);
                  C.add(cur, prev, "L=" + fmt(L));
                  prev = cur;
              }
              return C.result();
          });
}

inline void cap_identities(SuiteRun& S) {
    const double h = S.cfg.h, h2 = S.cfg.h2;
    const std::string per = "Prop. cap-per";
    S.run("cap_per_1d", per + ": cap_{s,1}(closed B_1/2; B_1) = P_s(B_1/2) = 4/(s(1-s)), s=0.5", [&] {
        FracParams P(1, 0.5, 1, 1);
        auto env = build_domain(Shape::ball({0, 0}, 1, 1), h);
        Mask sig = rasterize(Shape::ball({0, 0}, 0.5, 1, true), env.box);
        return check_eq(capacity(sig, env, P, S.opt).value, oracle::interval_perimeter(0.5, 1), S.cfg.tol_discrete_for(1));
    });
    S.run("cap_per_2d", per + ": cap_{s,1}(closed B_1/2; B_1) vs continuum P_s(B_1/2) by quadrature, s=0.5, spacing h2/2", [&] {
        FracParams P(2, 0.5, 1, 1);
        auto env = build_domain(Shape::ball({0, 0}, 1, 2), h2 / 2);
        Mask sig = rasterize(Shape::ball({0, 0}, 0.5, 2, true), env.box);
        return check_eq(capacity(sig, env, P, S.opt).value, oracle::disc_perimeter(0.5, 0.5), S.cfg.tol_discrete_for(2));
    });
    S.run("cap_per_2d_lattice", per + ": cap_{s,1}(closed B_1/2; B_1) vs P_s of the same lattice set, s=0.5", [&] {
        FracParams P(2, 0.5, 1, 1);
        auto env = build_domain(Shape::ball({0, 0}, 1, 2), h2);
        Mask sig = rasterize(Shape::ball({0, 0}, 0.5, 2, true), env.box);
        double per_s = frac_perimeter(LatticeDomain{env.box, sig}, 0.5, S.cfg.near_band);
        return check_eq(capacity(sig, env, P, S.opt).value, per_s, 1e-8);
    });

    // one random corpus shared by cap-vol, cap-cap and cap-wrt-balls
    Corpus vol(1e-7), cc(1e-7), balls_left(1e-7), balls_right(1e-7), trunc(1e-12);
    std::string failure;
    try {
        KernelCache kc;
        for (int i = 0; i < S.cfg.corpus_size; ++i) {
            const auto [N, hc, p, s] = corpus_case(i, S.cfg);
            const double R = i % 2 ? 1.5 : 2.0;
            FracParams P(N, s, p, p);
            auto BR = Refs::ball(N, R, hc);
            LatticeDomain B1{BR.box, rasterize(Shape::ball({0, 0}, 1, N), BR.box)};
            Mask sig = random_compact(BR.box, S.rng, 0.75);
            const std::string tag = "#" + std::to_string(i);
            double cap1 = capacity(sig, B1, P, S.opt).value;
            double capR = capacity(sig, BR, P, S.opt).value;
            // cap-vol: |Sigma| lambda^s_p(E) <= cap(Sigma; E)
            double lamE = S.refs.memo("lambda_B1_in_B" + fmt(R), {double(N), s, p, hc}, [&] { return lam(B1, P, S.opt); });
            vol.add(mask_measure(sig, BR.box) * lamE, cap1, tag);
            // cap-cap with local quantities on the same lattice
            double loc_cap = local_capacity(sig, B1, p, S.opt).value, loc_lam = S.refs.memo("local_B1_in_B" + fmt(R), {double(N), p, hc}, [&] { return local_frequency(B1, p, S.opt).value; });
            cc.add(cap1, cst::holder(N, p) / (s * (1 - s)) * std::pow(loc_lam, s - 1) * loc_cap, tag);
            // cap-wrt-balls sandwich, d = dist(Sigma, boundary of B_1)
            double d = 1 - far_extent(sig, BR.box);
            auto ctx = S.refs.context(P, hc, Refs::LamBallP);
            balls_left.add(capR, cap1, tag);
            balls_right.add(cap1, eval_constant("C_cap_balls", ctx, {{"ratio", R / d}}) * capR, tag);
            // truncation to [0,1] never increases the seminorm
            auto u = random_bumps(BR.box, S.rng, {0, 0}, 0.8);
            for (auto& v : u.values) v *= 1.6;
            auto t = u;
            for (auto& v : t.values) v = std::clamp(v, 0.0, 1.0);
            const auto& kw = kc.get(BR.box, P, S.cfg.near_band);
            trunc.add(gagliardo_p(t, kw, p).value, gagliardo_p(u, kw, p).value, tag);
        }
    } catch (const std::exception& e) {
        failure = e.what();
    }
    auto emit = [&](const std::string& id, const std::string& desc, const Corpus& C) {
        S.run(id, desc, [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            return C.result();
        });
    };
    emit("cap_vol", "eq. cap-vol: random Sigma in B_1, p in {2,1.5}", vol);
    emit("cap_cap", "eq. cap-cap: fractional vs local capacity", cc);
    emit("cap_balls_left", "Prop. cap-wrt-balls: cap(Sigma;B_R) <= cap(Sigma;B_r)", balls_left);
    emit("cap_balls_right", "Prop. cap-wrt-balls: cap(Sigma;B_r) <= C(N,p,s,R/d) cap(Sigma;B_R)", balls_right);
    emit("truncation", "Prop. equivalent-cap: [min(max(u,0),1)] <= [u]",
         trunc);
}

inline void cap_null(SuiteRun& S) {
    const std::string anchor = "Prop. cap-null";
    std::vector<double> gaps;
    std::vector<double> hs{S.cfg.h2, S.cfg.h2 / 2, S.cfg.h2 / 4};
    std::string failure;
    try {
        FracParams P(2, 0.5, 2, 2);
        for (double hh : hs) {
            auto intact = build_domain(Shape::rect(0, 0, 1, 0.5), hh);
            CellIndex g{long(std::floor(0.5 / hh)), long(std::floor(0.25 / hh))};
            auto punct = build_domain(Shape::punctured(Shape::rect(0, 0, 1, 0.5), {g}), hh);
            double a = lam(intact, P, S.opt), b = lam(punct, P, S.opt);
            gaps.push_back((b - a) / a);
        }
    } catch (const std::exception& e) {
        failure = e.what();
    }
    for (std::size_t k = 1; k < hs.size(); ++k) {
        S.run("refinement_" + std::to_string(k), anchor + ": relative gap lambda(punctured)/lambda(intact) - 1 decreases, h=" + fmt(hs[k - 1]) + " -> " + fmt(hs[k]),
              [&] {
                  if (!failure.empty()) throw ConvergenceError(failure);
                  auto c = check_le(gaps[k], gaps[k - 1]);
                  c.diagnostic = "gap(h)=" + fmt(gaps[k - 1]) + " gap(h/2)=" + fmt(gaps[k]);
                  return c;
              });
    }
}

inline void poincare(SuiteRun& S) {
    const double h = S.cfg.h;
    S.run("cheeger_ball", "Lemma poincare-Palle: h_s(B_1;B_2) = P_s(B_1)/|B_1|, N=1, s=0.5",
          [&] {
              const double s = 0.5;
              auto om = build_domain(Shape::interval(-2, 2), h);
              Mask E = rasterize(Shape::interval(-1, 1), om.box);
              auto r = cheeger(E, om, s, S.opt);
              auto c = check_eq(r.value, 4 * std::pow(2.0, 1 - s) / (s * (1 - s)) / 2, S.cfg.tol_discrete_for(1));
              std::size_t diff = 0;
              for (std::size_t k = 0; k < E.size(); ++k) diff += (r.level_set[k] != 0) != (E[k] != 0);
              c.diagnostic = "level set differs from B_1 in " + std::to_string(diff) + " cells";
              if (diff > 2) c.pass = false;
              return c;
          });

    Corpus ps(1e-9), pw(0), pw_dil(0), psw(1e-9);
    std::string failure;
    double worst_dil = 0;
    try {
        KernelCache kc;
        for (int i = 0; i < S.cfg.corpus_size; ++i) {
            const auto [N, hc, p, s] = corpus_case(i, S.cfg);
            const double ps_exp = sobolev_exponent(N, s, p);
            const double q = i % 2 ? p : 0.5 * (p + std::min(ps_exp, 2 * p));
            const double r = 0.5, R = 1.0;
            FracParams P(N, s, p, q);
            auto dom = Refs::ball(N, 1.25, hc);
            const Box& box = dom.box;
            const auto& kw = kc.get(box, P, S.cfg.near_band);
            const std::string tag = "#" + std::to_string(i);
            double lamB1 = S.refs.lambda_ball(N, s, p, q, hc);
            Mask ballr = ball_cells(box, {0, 0}, r);
            // Poincare-Sobolev: u supported in B_r
            auto u = random_bumps(box, S.rng, {0, 0}, r);
            for (std::size_t k = 0; k < box.size(); ++k)
                if (!ballr[k]) u.values[k] = 0;
            double strip = strip_seminorm_p(u, {0, 0}, r, kw, p).value;
            ps.add(std::pow(lq_norm(u, q, ballr), p), 2 / lamB1 * std::pow(r, P.alpha()) * strip, tag);
            // Poincare-Wirtinger: any u
            auto v = random_bumps(box, S.rng, {0, 0}, 0.9);
            double av = average(v, ballr);
            auto dv = v;
            for (auto& x : dv.values) x -= av;
            double lhs_w = std::pow(lq_norm(dv, p, ballr), p);
            double strip_v = strip_seminorm_p(v, {0, 0}, r, kw, p).value;
            double ratio = lhs_w / (std::pow(r, s * p) * strip_v);
            pw.add(ratio, cst::pw_W(N, p) * s * (1 - s), tag);
            if (i < 20) {
                // dilation by 2: the normalised ratio is scale free
                auto v2 = v.rescaled(2);
                const auto& kw2 = kc.get(v2.box, P, S.cfg.near_band);
                Mask b2 = ball_cells(v2.box, {0, 0}, 2 * r);
                double av2 = average(v2, b2);
                auto dv2 = v2;
                for (auto& x : dv2.values) x -= av2;
                double ratio2 = std::pow(lq_norm(dv2, p, b2), p) / (std::pow(2 * r, s * p) * strip_seminorm_p(v2, {0, 0}, 2 * r, kw2, p).value);
                worst_dil = std::max(worst_dil, std::abs(ratio2 - ratio) / ratio);
            }
            // Poincare-Sobolev-Wirtinger with R = 2r
            ConstantContext ctx;
            ctx.params = P;
            double Wc = eval_constant("W", ctx, {{"ratio", R / r}});
            double lhs_q = std::pow(lq_norm(dv, q, ballr), p);
            psw.add(lhs_q, Wc * std::pow(R, P.alpha()) / lamB1 * strip_seminorm_p(v, {0, 0}, R, kw, p).value, tag);
        }
    } catch (const std::exception& e) {
        failure = e.what();
    }
    auto emit = [&](const std::string& id, const std::string& desc, const Corpus& C) {
        S.run(id, desc, [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            return C.result();
        });
    };
    emit("poincare_sobolev", "Prop. poin-sobolev: ||u||^p_{L^q(B_r)} <= 2/lambda_{p,q}(B_1) r^alpha strip(u,B_r)", ps);
    emit("poincare_wirtinger", "Lemma poincare-wirtinger: ||u-av||^p_{L^p(B_r)} <= W_{N,p} s(1-s) r^{sp} strip(u,B_r)", pw);
    S.run("wirtinger_dilation", "Lemma poincare-wirtinger: normalised Poincare-Wirtinger ratio invariant under dilation by 2", [&] {
        if (!failure.empty()) throw ConvergenceError(failure);
        auto c = check_le(worst_dil, S.cfg.tol_exact);
        c.diagnostic = "max relative change over 20 functions";
        return c;
    });
    emit("poincare_sobolev_wirtinger", "Lemma poin-sob-wirtinger: R = 2r", psw);
}

inline void mazya(SuiteRun& S) {
    Corpus m1(1e-9), m2(1e-9);
    std::string failure;
    try {
        KernelCache kc;
        for (int i = 0; i < S.cfg.corpus_size; ++i) {
            const auto [N, hc, p, s] = corpus_case(i, S.cfg);
            const double ps_exp = sobolev_exponent(N, s, p);
            const double q = 0.5 * (p + std::min(ps_exp, 2 * p));
            const double r = 0.5, R = i % 2 ? 1.0 : 1.5;
            FracParams Pp(N, s, p, p), Pq(N, s, p, q);
            auto BR = Refs::ball(N, R, hc);
            const Box& box = BR.box;
            const auto& kw = kc.get(box, Pp, S.cfg.near_band);
            Mask sig = random_compact(box, S.rng, r);
            double cap = capacity(sig, BR, Pp, S.opt).value;
            auto u = random_bumps(box, S.rng, {0, 0}, R);
            for (std::size_t k = 0; k < box.size(); ++k)
                if (sig[k]) u.values[k] = 0;
            Mask ballr = ball_cells(box, {0, 0}, r);
            double rhs = std::pow(strip_seminorm_p(u, {0, 0}, R, kw, p).value, 1 / p);
            const std::string tag = "#" + std::to_string(i);
            ConstantContext c1;
            c1.params = Pp;
            double M1 = eval_constant("M_poin", c1, {{"ratio", R / r}});
            m1.add(M1 / std::pow(r, N / p) * std::pow(cap, 1 / p) * lq_norm(u, p, ballr), rhs, tag);
            auto c2 = S.refs.context(Pq, hc, Refs::LamBall);
            double M2 = eval_constant("M", c2, {{"ratio", R / r}});
            m2.add(M2 / std::pow(r, N / q) * std::pow(cap, 1 / p) * lq_norm(u, q, ballr), rhs, tag);
        }
    } catch (const std::exception& e) {
        failure = e.what();
    }
    S.run("mazya_poincare", "Lemma mazya-poin: (M/r^{N/p}) cap(Sigma;B_R)^{1/p} ||u||_{L^p(B_r)} <= strip(u,B_R)^{1/p}", [&] {
        if (!failure.empty()) throw ConvergenceError(failure);
        return m1.result();
    });
    S.run("mazya_poincare_sobolev", "Lemma mazya-poin2: L^q version with M from eq. esplicita", [&] {
        if (!failure.empty()) throw ConvergenceError(failure);
        return m2.result();
    });
}

inline void torsion(SuiteRun& S) {
    const double h = S.cfg.h, h2 = S.cfg.h2;
    const std::string el = "eq. eqn:from-el";
    struct Case {
        std::string id;
        int N;
        double s, p, tol;
    };
    std::vector<Case> cases{{"p2_1d", 1, 0.5, 2, 1e-8}, {"p1.5_1d", 1, 0.5, 1.5, 1e-3}, {"p2_2d", 2, 0.5, 2, 1e-8}};
    for (const auto& c : cases) {
        const double hh = c.N == 1 ? h : h2;
        FracParams P(c.N, c.s, c.p, c.p);
        MinimizeResult V;
        std::string failure;
        try {
            V = frac::torsion(0.5, 1.0, P, hh, S.opt);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        S.run("identity_" + c.id, el + ": r=0.5, R=1", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto t = torsion_identity(V, 0.5, P, S.cfg.near_band);
            auto k = check_le(t.rel_gap, c.tol);
            k.diagnostic = "integral=" + fmt(t.integral) + " energy=" + fmt(t.energy);
            return k;
        });
        S.run("nonnegative_" + c.id, "Prop. cor:Linfty-bound", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            double mn = *std::min_element(V.minimizer.values.begin(), V.minimizer.values.end());
            double mx = *std::max_element(V.minimizer.values.begin(), V.minimizer.values.end());
            return check_le(-mn, 1e-12 * mx);
        });
        S.run("duality_" + c.id, "eq. claim-torsione: (int_{B_r}|phi|)^p <= [V]^{p(p-1)} [phi]^p", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto t = torsion_identity(V, 0.5, P, S.cfg.near_band);
            auto kw = assemble_kernel(V.minimizer.box, P, S.cfg.near_band);
            Mask inner = rasterize(Shape::ball({0, 0}, 0.5, c.N), kw.box);
            Mask outer = rasterize(Shape::ball({0, 0}, 1.0, c.N), kw.box);
            Corpus C(c.tol);
            int n = std::max(10, S.cfg.corpus_size / 10);
            for (int i = 0; i < n; ++i) {
                auto phi = random_bumps(kw.box, S.rng, {0, 0}, 0.8);
                for (std::size_t k = 0; k < kw.box.size(); ++k)
                    if (!outer[k]) phi.values[k] = 0;
                double l1 = lq_norm(phi, 1, inner);
                C.add(std::pow(l1, c.p), std::pow(t.energy, c.p - 1) * gagliardo_p(phi, kw, c.p).value, "#" + std::to_string(i));
            }
            return C.result();
        });
    }
    struct BoundCase {
        std::string id;
        int N;
        double s, p;
    };
    for (const auto& b : {BoundCase{"1d_s0.25", 1, 0.25, 2}, BoundCase{"2d_s0.5", 2, 0.5, 2}}) {
        const double hh = b.N == 1 ? h : h2;
        S.run("bound_" + b.id, "eq. torsione with the one-sided Sobolev estimate, r=0.5, R=1",
              [&] {
                  FracParams P(b.N, b.s, b.p, b.p);
                  auto V = frac::torsion(0.5, 1.0, P, hh, S.opt);
                  auto t = torsion_identity(V, 0.5, P, S.cfg.near_band);
                  auto ctx = S.refs.context(P, hh, Refs::Sob);
                  auto k = check_le(t.energy, eval_constant("torsion_bound", ctx, {{"r", 0.5}}));
                  k.diagnostic = "S_hat=" + fmt(*ctx.sobolev_S) + " (lower bound of the supremum)";
                  return k;
              });
    }
}

inline void sandwich(SuiteRun& S) {
    struct Case {
        std::string id;
        Shape shape;
        int N;
    };
    const double h = S.cfg.h, h2 = S.cfg.h2;
    CellIndex mid{long(std::floor(0.5 / h2)), long(std::floor(0.25 / h2))};
    std::vector<Case> cases{{"interval", Shape::interval(0, 1), 1},
                            {"rect", Shape::rect(0, 0, 1, 0.5), 2},
                            {"punctured_rect", Shape::punctured(Shape::rect(0, 0, 1, 0.5), {mid}), 2}};
    for (const auto& c : cases) {
        const double hh = c.N == 1 ? h : h2;
        FracParams P(c.N, 0.5, 2, 2);
        double lamO = 0, lower = 0, upper = 0, rl = 0, ru = 0, g = 0;
        std::string failure;
        try {
            unsigned need = Refs::LamBall | Refs::CapBall | (P.conformal() ? Refs::Conf : Refs::Sob);
            auto ctx = S.refs.context(P, hh, need);
            g = S.cfg.gamma_safety * eval_constant("gamma0", ctx);
            double sig = eval_constant("sigma", ctx), Cu = eval_constant("C_upper", ctx, {{"gamma", g}});
            auto om = build_domain(c.shape, hh);
            lamO = lam(om, P, S.opt);
            InradiusConfig icfg;
            icfg.max_centers = 16;
            icfg.solver = S.opt;
            auto R = capacitary_inradius(om, P, g, icfg);
            rl = R.r_lower;
            ru = R.r_upper;
            const double a = P.alpha();
            lower = g * sig * std::pow(ru, -a);
            upper = Cu * std::pow(rl, -a);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        std::string diag = "gamma=" + fmt(g) + " r_lower=" + fmt(rl) + " r_upper=" + fmt(ru);
        S.run("lower_" + c.id, "Thm 1.6: gamma sigma R^-alpha <= lambda with R = r_upper", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto k = check_le(lower, lamO);
            k.diagnostic = diag;
            return k;
        });
        S.run("upper_" + c.id, "Thm 1.7: lambda <= C R^-alpha with R = r_lower", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto k = check_le(lamO, upper);
            k.diagnostic = diag;
            return k;
        });
        S.run("finite_" + c.id, "Corollary 1.8: bounded domain has finite capacitary inradius", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto k = check_le(ru, 1e300);
            k.diagnostic = diag;
            return k;
        });
    }
}

inline void asymptotics(SuiteRun& S) {
    const double h = S.cfg.h, tp = S.cfg.tol_plateau;
    auto om = build_domain(Shape::interval(0, 1), h);
    auto lam_s = [&](double s) { return lam(om, Refs::prm(1, s, 2, 2), S.opt); };
    S.run("s_lambda_s0", "Prop. asym2: s lambda^s_{2,2}((0,1)), s in {0.05,0.1}", [&] {
        return check_plateau({0.05 * lam_s(0.05), 0.1 * lam_s(0.1)}, tp);
    });
    S.run("s_lambda_s1", "Prop. asym-s-1: (1-s) lambda^s_{2,2}((0,1)), s in {0.9,0.95}", [&] {
        return check_plateau({0.1 * lam_s(0.9), 0.05 * lam_s(0.95)}, tp);
    });
    S.run("K_hat", "Prop. asym-s-1: K_hat = (1-s) lambda^s((0,1)) / pi^2 > 0 at s=0.95", [&] {
        double K = 0.05 * lam_s(0.95) / (std::numbers::pi * std::numbers::pi);
        auto c = check_le(0, K);
        c.diagnostic = "K_hat=" + fmt(K);
        return c;
    });
    S.run("c_subcrit", "Prop. positivita-autovalori: implied constant s(1-s)lambda/RHS bounded below, s in {0.1,0.25,0.4}",
          [&] {
              double worst = std::numeric_limits<double>::infinity();
              std::string d = "c_hat=";
              for (double s : {0.1, 0.25, 0.4}) {
                  ConstantContext c;
                  c.params = FracParams(1, s, 2, 2);
                  double chat = s * (1 - s) * lam_s(s) / eval_constant("c_subcrit", c, {{"measure", 1.0}});
                  worst = std::min(worst, chat);
                  d += fmt(chat) + ",";
              }
              auto c = check_le(0, worst);
              c.diagnostic = d;
              return c;
          });
    // sigma ~ 1/s
    auto sigma_at = [&](double s) {
        FracParams P(1, s, 2, 2);
        return eval_constant("sigma", S.refs.context(P, h, Refs::LamBall | Refs::CapBall));
    };
    S.run("sigma_plateau", "Thm 1.6: s sigma over s in {0.05,0.1,0.2}", [&] {
        return check_plateau({0.05 * sigma_at(0.05), 0.1 * sigma_at(0.1), 0.2 * sigma_at(0.2)}, tp);
    });
    S.run("sigma_plateau_small", "Thm 1.6: s sigma over s in {0.003125,0.00625,0.0125}", [&] {
        return check_plateau({0.003125 * sigma_at(0.003125), 0.00625 * sigma_at(0.00625), 0.0125 * sigma_at(0.0125)}, tp);
    });
    S.run("sigma_exponent", "Thm 1.6: fitted exponent within 0.15 of -1", [&] {
        auto r = asymptotic_probe("sigma", sigma_at, "s->0", {0.05, 0.1, 0.2}, -1.0, tp);
        auto c = check_le(std::abs(r.fitted_exponent - r.expected_exponent), 0.15);
        c.diagnostic = "fitted=" + fmt(r.fitted_exponent);
        return c;
    });
    S.run("C_upper_gamma", "Remark rmk:asym-C-upper-bound: p=1, gamma in {0.9,0.95,0.99}", [&] {
        FracParams P(1, 0.5, 1, 1);
        auto ctx = S.refs.context(P, h, Refs::CapBall);
        std::vector<double> v;
        for (double g : {0.9, 0.95, 0.99}) v.push_back((1 - g) * eval_constant("C_upper", ctx, {{"gamma", g}}));
        return check_plateau(v, tp);
    });
    S.run("cap_s0", "Remark rmk:asym-cap: s cap_{s,2}(closed B_1; B_2) over s in {0.05,0.1,0.2}", [&] {
        std::vector<double> v;
        for (double s : {0.05, 0.1, 0.2}) v.push_back(s * S.refs.cap_ball(1, s, 2, h));
        return check_plateau(v, tp);
    });
    // fixed gamma below every gamma0(s) on the grids
    auto C_scaled = [&](std::vector<double> grid) {
        std::vector<ConstantContext> ctx;
        double g = 1;
        for (double s : grid) {
            ctx.push_back(S.refs.context(FracParams(1, s, 2, 2), h, Refs::LamBall | Refs::CapBall | Refs::Sob));
            g = std::min(g, 0.5 * eval_constant("gamma0", ctx.back()));
        }
        std::vector<double> v;
        for (std::size_t k = 0; k < grid.size(); ++k) v.push_back(grid[k] * eval_constant("C_upper", ctx[k], {{"gamma", g}}));
        return v;
    };
    S.run("C_upper_s0", "Thm 1.7: s C_upper over s in {0.05,0.1,0.2}", [&] {
        return check_plateau(C_scaled({0.05, 0.1, 0.2}), tp);
    });
    S.run("C_upper_s0_small", "Thm 1.7: s C_upper over s in {0.003125,0.00625,0.0125}", [&] {
        return check_plateau(C_scaled({0.003125, 0.00625, 0.0125}), tp);
    });
    auto Mp_scaled = [](std::vector<double> grid) {
        std::vector<double> v;
        for (double t : grid) v.push_back(std::pow(t, 0.5) * cst::M_poin(1, 2, t));
        return v;
    };
    S.run("M_poin_ratio", "Lemma mazya-poin: N=1, p=2, R/r in {10,20,40}", [&] {
        return check_plateau(Mp_scaled({10, 20, 40}), tp);
    });
    S.run("M_poin_ratio_far", "Lemma mazya-poin: N=1, p=2, R/r in {160,320,640}", [&] {
        return check_plateau(Mp_scaled({160, 320, 640}), tp);
    });
    auto M_scaled = [&](std::vector<double> grid) {
        FracParams P(1, 0.5, 2, 2);
        auto ctx = S.refs.context(P, h, Refs::LamBall);
        std::vector<double> v;
        for (double t : grid) v.push_back(std::pow(t, 1 / P.q) * eval_constant("M", ctx, {{"ratio", t}}));
        return v;
    };
    S.run("M_ratio", "Lemma mazya-poin2: (R/r)^{N/q} M over R/r in {10,20,40}", [&] {
        return check_plateau(M_scaled({10, 20, 40}), tp);
    });
    S.run("M_ratio_far", "Lemma mazya-poin2: (R/r)^{N/q} M over R/r in {160,320,640}", [&] {
        return check_plateau(M_scaled({160, 320, 640}), tp);
    });
    // strip seminorm interpolation limits for a fixed smooth u
    auto dom = Refs::ball(1, 1, h);
    LatticeFunction u(dom.box);
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        double t = dom.box.center(k)[0] / 0.5;
        u.values[k] = t * t < 1 ? (1 - t * t) * (1 - t * t) : 0.0;
    }
    auto strip_at = [&](double s) {
        auto kw = assemble_kernel(dom.box, Refs::prm(1, s, 2, 2), S.cfg.near_band);
        return strip_seminorm_p(u, {0, 0}, 0.5, kw, 2).value;
    };
    S.run("strip_s0", "Remark 1.9: s strip(u,B_1/2), s in {0.05,0.1}", [&] {
        return check_plateau({0.05 * strip_at(0.05), 0.1 * strip_at(0.1)}, tp);
    });
    S.run("strip_s0_small", "Remark 1.9: s strip(u,B_1/2), s in {0.0125,0.025}", [&] {
        return check_plateau({0.0125 * strip_at(0.0125), 0.025 * strip_at(0.025)}, tp);
    });
    S.run("strip_s1", "Remark 1.9: (1-s) strip(u,B_1/2), s in {0.9,0.95}", [&] {
        return check_plateau({0.1 * strip_at(0.9), 0.05 * strip_at(0.95)}, tp);
    });
}

inline void slab(SuiteRun& S) {
    const double hs = 2 * S.cfg.h2;
    for (double s : {0.5, 0.1}) {
        FracParams P(2, s, 2, 2);
        double g0 = 0, g = 0, bound = 0;
        InradiusResult R;
        std::string failure;
        ConstantContext ctx;
        try {
            ctx = S.refs.context(P, hs, Refs::Local | Refs::LamB2 | Refs::SLim);
            g0 = eval_constant("gamma0_slab", ctx);
            g = 0.1 * g0;
            bound = eval_constant("slab_radius_bound", ctx, {{"gamma", g}});
            auto om = build_domain(Shape::slab(8, 1), hs);
            InradiusConfig icfg;
            icfg.max_centers = 8;
            icfg.solver = S.opt;
            R = capacitary_inradius(om, P, g, icfg);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        const std::string sid = "s" + fmt(s);
        const std::string ex = "Example ex:finiteness-inr";
        S.run("gamma_below_" + sid, ex + ": gamma = 0.1 gamma0_slab < gamma0_slab", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            return check_le(g, g0);
        });
        S.run("volume_bound_" + sid, ex + ": eq. eqn:ex-2, |B_r \\ Omega| / r^N <= RHS for every negligible ball found", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            double rhs = eval_constant("slab_rhs", ctx, {{"gamma", g}});
            Corpus C(1e-12);
            for (std::size_t i = 0; i < R.found.size(); ++i) {
                double r = R.found[i].radius;
                C.add(double(R.found_removed[i]) * hs * hs / (r * r), rhs, "r=" + fmt(r));
            }
            return C.result(true);
        });
        S.run("radius_bound_" + sid, ex + ": r_lower(gamma) <= phi_N^{-1}(RHS wedge omega_N)", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto c = check_le(R.r_lower, bound);
            c.diagnostic = "r_lower=" + fmt(R.r_lower) + " r_upper=" + fmt(R.r_upper);
            return c;
        });
    }
}

inline void capin_compare(SuiteRun& S) {
    struct Case {
        std::string id;
        Shape shape;
        int N;
    };
    for (const auto& c : {Case{"interval", Shape::interval(0, 1), 1}, Case{"rect", Shape::rect(0, 0, 1, 0.5), 2}}) {
        const double hh = c.N == 1 ? S.cfg.h : S.cfg.h2;
        FracParams P(c.N, 0.5, 2, 2);
        const double g = 0.5;
        double beta = 0;
        InradiusResult Rl, Rn;
        std::string failure;
        std::unique_ptr<NegligibilityTester> Tn;
        try {
            auto ctx = S.refs.context(P, hh, Refs::Local | Refs::CapBall);
            beta = eval_constant("beta", ctx);
            auto om = build_domain(c.shape, hh);
            InradiusConfig icfg;
            icfg.max_centers = 8;
            icfg.solver = S.opt;
            Tn = std::make_unique<NegligibilityTester>(om, P, false, S.opt);
            Rn = capacitary_inradius(*Tn, g, icfg);
            icfg.local = true;
            Rl = capacitary_inradius(om, P, beta * g, icfg);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        const std::string an = "Prop. capin-vs-capin";
        S.run("radii_" + c.id, an + ": local r_lower(beta gamma) <= fractional r_upper(gamma)", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            auto k = check_le(Rl.r_lower, Rn.r_upper);
            k.diagnostic = "beta=" + fmt(beta) + " local r_lower=" + fmt(Rl.r_lower) + " fractional r_lower=" + fmt(Rn.r_lower);
            return k;
        });
        S.run("implication_" + c.id, an + ": every locally (p,beta gamma)-negligible ball found is (s,p,gamma)-negligible", [&] {
            if (!failure.empty()) throw ConvergenceError(failure);
            Corpus C(1e-12);
            for (const auto& b : Rl.found) {
                auto t = Tn->test(b.center, b.radius, g);
                C.add(t.lhs, t.rhs, "r=" + fmt(b.radius));
            }
            return C.result(true);
        });
    }
}

}  // namespace suites

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"scaling", "monotonicity", "cap_identities", "cap_null",  "poincare",     "mazya",
                                                "torsion", "sandwich",     "asymptotics",    "slab",      "capin_compare"};
    return names;
}

inline VerificationReport run_suite(const std::string& name, const HarnessConfig& cfg) {
    static const std::map<std::string, void (*)(SuiteRun&)> table{
        {"scaling", suites::scaling},   {"monotonicity", suites::monotonicity}, {"cap_identities", suites::cap_identities},
        {"cap_null", suites::cap_null}, {"poincare", suites::poincare},         {"mazya", suites::mazya},
        {"torsion", suites::torsion},   {"sandwich", suites::sandwich},         {"asymptotics", suites::asymptotics},
        {"slab", suites::slab},         {"capin_compare", suites::capin_compare}};
    std::vector<std::string> todo;
    if (name == "all") todo = suite_names();
    else if (table.count(name)) todo = {name};
    else throw DomainError("unknown suite: " + name);
    Refs refs(cfg.near_band);
    VerificationReport rep;
    rep.suite = name;
    rep.environment.params = describe_config(cfg);
    rep.environment.h = cfg.h;
    rep.environment.h2 = cfg.h2;
    rep.environment.seed = cfg.seed;
    for (const auto& s : todo) {
        SuiteRun S(cfg, refs, s);
        table.at(s)(S);
        std::stable_sort(S.checks.begin(), S.checks.end(), [](const Check& a, const Check& b) { return a.id < b.id; });
        for (auto& c : S.checks) rep.checks.push_back(std::move(c));
    }
    return rep;
}

// ---------------------------------------------------------------- sweeps

struct SweepBase {
    FracParams params{1, 0.5, 2, 2, std::nullopt, true};
    std::string shape = "interval:0,1";
    double gamma = 0.1;
    double ratio = 2.0;
};

struct SweepTable {
    std::string param, target;
    std::vector<std::pair<double, double>> rows;
};

inline const std::vector<std::string>& sweep_targets() {
    static const std::vector<std::string> t{"lambda", "s_lambda", "one_minus_s_lambda", "K_hat", "perimeter", "cap_ball", "local_lambda"};
    return t;
}

inline SweepTable sweep(const std::string& param, const std::vector<double>& grid, const std::string& target, const HarnessConfig& cfg,
                        const SweepBase& base = {}) {
    if (param != "s" && param != "gamma" && param != "h" && param != "ratio") throw DomainError("sweep parameter must be s, gamma, h or ratio");
    const auto& names = constant_names();
    bool builtin = std::find(sweep_targets().begin(), sweep_targets().end(), target) != sweep_targets().end();
    bool registry = std::find(names.begin(), names.end(), target) != names.end();
    if (!builtin && !registry) throw DomainError("invalid sweep target: " + target);
    if (grid.empty()) throw DomainError("empty sweep grid");
    Refs refs(cfg.near_band);
    SolverOptions opt;
    opt.near_band = cfg.near_band;
    SweepTable T{param, target, {}};
    for (double x : grid) {
        FracParams P = base.params;
        double h = P.dim == 1 ? cfg.h : cfg.h2, gamma = base.gamma, ratio = base.ratio;
        if (param == "s") P.s = x;
        if (param == "h") h = x;
        if (param == "gamma") gamma = x;
        if (param == "ratio") ratio = x;
        P = FracParams(P.dim, P.s, P.p, P.q, std::nullopt, true);
        double y = 0;
        if (builtin) {
            if (target == "perimeter") {
                y = frac_perimeter(build_domain(parse_shape(base.shape), h), P.s, cfg.near_band);
            } else if (target == "cap_ball") {
                y = refs.cap_ball(P.dim, P.s, P.p, h);
            } else if (target == "local_lambda") {
                y = local_frequency(build_domain(parse_shape(base.shape), h), P.p, opt).value;
            } else {
                auto om = build_domain(parse_shape(base.shape), h);
                double l = frequency(om, P, opt).value;
                if (target == "lambda") y = l;
                if (target == "s_lambda") y = P.s * l;
                if (target == "one_minus_s_lambda") y = (1 - P.s) * l;
                if (target == "K_hat") y = (1 - P.s) * l / local_frequency(om, P.p, opt).value;
            }
        } else {
            unsigned need = Refs::LamBall | Refs::CapBall;
            if (target == "gamma0" || target == "eps0" || target == "C_upper" || target == "torsion_bound" || target == "S_sobolev")
                need |= P.p == 1 ? 0u : (P.conformal() ? unsigned(Refs::Conf) : unsigned(Refs::Sob));
            if (target == "beta" || target == "gamma0_slab" || target == "slab_rhs" || target == "slab_radius_bound")
                need = Refs::CapBall | Refs::Local | Refs::LamB2 | Refs::SLim;
            if (target == "C_cap_balls" || target == "sigma") need |= Refs::LamBallP;
            auto ctx = refs.context(P, h, need);
            y = eval_constant(target, ctx, {{"ratio", ratio}, {"gamma", gamma}, {"eps", 0.1}, {"measure", 1.0}, {"r", ratio}, {"y", gamma}, {"R", ratio}});
        }
        T.rows.emplace_back(x, y);
    }
    return T;
}

inline ojson to_json(const SweepTable& t) {
    ojson j;
    j["param"] = t.param;
    j["target"] = t.target;
    ojson rows = ojson::array();
    for (auto [x, y] : t.rows) rows.push_back(ojson::array({detail::num(x), detail::num(y)}));
    j["rows"] = rows;
    return j;
}

inline std::string sweep_csv(const SweepTable& t) {
    std::ostringstream o;
    o << t.param << ',' << t.target << '\n' << std::setprecision(17);
    for (auto [x, y] : t.rows) o << x << ',' << y << '\n';
    return o.str();
}

}  // namespace frac
