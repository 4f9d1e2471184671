#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "frac/params.hpp"

namespace frac {

// Reference quantities the constant chains consume. Numeric plug-ins are computed elsewhere
// (solvers) and passed in; missing slots raise when a formula needs them.
struct ConstantContext {
    FracParams params;
    std::optional<double> ref_lambda_ball;    // lambda^s_{p,q}(B_1)
    std::optional<double> ref_lambda_ball_p;  // lambda^s_{p,p}(B_1) (defaults to ref_lambda_ball when q = p)
    std::optional<double> ref_cap_ball;       // fractional cap(closed B_1; B_2)
    std::optional<double> ref_local_lambda;   // lambda_p(B_2)
    std::optional<double> ref_local_cap;      // cap_p(closed B_1; B_2)
    std::optional<double> ref_lambda_b2;      // lambda^s_{p,p}(B_2)
    std::optional<double> s_lambda_limit;     // liminf_{s->0} s lambda^s_p(B_2), estimated
    std::optional<double> lambda_conformal;   // lambda^s_{N/s,1}(B_1)
    std::optional<double> sobolev_S;          // estimate of the Sobolev constant
    std::optional<double> bbm_K;              // estimate of the BBM constant K_{N,p}
    // Any test function under-estimates a supremum, so sobolev_S is always a lower bound.
    static constexpr const char* sobolev_direction = "lower-bound-of-sup";
};

using ConstArgs = std::map<std::string, double>;

namespace cst {

inline double need(const std::optional<double>& v, const char* slot) {
    if (!v) throw DomainError(std::string("missing context slot: ") + slot);
    if (!(*v > 0) || !std::isfinite(*v)) throw DomainError(std::string("context slot must be positive: ") + slot);
    return *v;
}

inline double arg(const ConstArgs& a, const char* k) {
    auto it = a.find(k);
    if (it == a.end()) throw DomainError(std::string("missing argument: ") + k);
    return it->second;
}

inline double holder(int N, double p) { return std::pow(2.0, p) * N * omega(N) / p; }

// Poincare-Wirtinger chain with the classical constant mu = 2 on balls.
inline double pw_mu() { return 2.0; }
inline double pw_a(double p) {
    double c = std::pow(std::max(2.0, pw_mu()), p);
    double d = std::max(4.0, pw_mu());
    return std::max(std::pow(c, p), std::pow(d, p));
}
inline double pw_W(int N, double p) {
    double A = std::pow(N + 1.0, p) * std::pow(double(N), p - 1) / omega(N);
    return p * pw_a(p) * A;
}

inline double E(int N, double p, double ratio) {
    if (!(ratio > 1)) throw DomainError("E needs R/r > 1");
    double f = 2 * ratio / (ratio - 1);
    return f * (std::pow(holder(N, p), 1 / p) + std::pow(N * omega(N) / p, 1 / p) * std::pow(f, N / p));
}

inline double W(int N, double p, double s, double q, double ratio) {
    if (!(ratio > std::sqrt(double(N)))) throw DomainError("W needs R/r > sqrt(N)");
    double C = holder(N, p);  // stand-in for the interpolation constant
    double br = 1 + std::pow(C * pw_W(N, p), 1 / p) * std::pow(2 * ratio / (ratio - std::sqrt(double(N))), s);
    return (1 + std::pow(omega(N), -p / q)) * std::pow(2.0, (q + 1) * p / q + 1) * std::pow(br, p);
}

inline double M(int N, double p, double s, double q, double ratio, double lam_ball) {
    double w = W(N, p, s, q, ratio);
    double inner = 1 + std::pow(omega(N), 1 / p - 1 / q) * (1 + std::pow(ratio, N / q)) * std::pow(w / (s * (1 - s) * lam_ball), 1 / p) *
                           E(N, p, ratio);
    return std::pow(omega(N), -1 / q) / inner;
}

// Maz'ya-Poincare constant (L^p version, no s dependence)
inline double M_poin(int N, double p, double ratio) {
    double inner = 1 + std::pow(pw_W(N, p), 1 / p) * (std::pow(ratio, N / p) + 1) * E(N, p, ratio);
    return std::pow(omega(N), -1 / p) / inner;
}

inline double C_balls(int N, double p, double s, double tau, double lam_ball_p) {
    if (!(tau > 0)) throw DomainError("C_cap_balls needs R/d > 0");
    double k = s * (1 - s) * lam_ball_p;
    double t1 = std::pow(holder(N, p) / k, 1 / p) * std::pow(2 * tau, s);
    double t2 = std::pow(1 - s, 1 / p) * std::pow(N * omega(N) / k, 1 / p) * std::pow(2 * tau, (N + s * p) / p);
    return std::pow(1 + t1 + t2, p);
}

inline double A_aux(int N, double p, double s, double q, double cap, double gamma, double eps, double delta) {
    if (!(eps > 0 && eps < 0.5)) throw DomainError("A_aux needs 0 < eps < 1/2");
    double ball = omega(N) * std::pow(1 - 2 * eps, N);
    double inner = holder(N, p) / (s * (1 - s) * cap) * omega(N) * std::pow(2.0 * N, s) / std::pow(eps, s * (p - 1)) + (delta + gamma);
    return std::pow(2.0, p - 1) * cap / std::pow(ball, p / q) * inner;
}

inline double phi_slab(int N, double r) {
    if (!(r > 1)) throw DomainError("phi_slab needs r > 1");
    // 2 omega_{N-1} int_{asin(1/r)}^{pi/2} cos^N t dt, by composite Gauss-Legendre on 8 panels
    double a = std::asin(1 / r), b = std::numbers::pi / 2;
    static const double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static const double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    double acc = 0;
    const int panels = 8;
    for (int k = 0; k < panels; ++k) {
        double lo = a + (b - a) * k / panels, hi = a + (b - a) * (k + 1) / panels;
        for (int i = 0; i < 8; ++i) acc += 0.5 * (hi - lo) * w[i] * std::pow(std::cos(0.5 * (hi + lo) + 0.5 * (hi - lo) * x[i]), N);
    }
    return 2 * omega(N - 1) * acc;
}

inline double phi_slab_inv(int N, double y) {
    if (!(y > 0 && y < omega(N))) throw DomainError("phi_slab_inv needs 0 < y < omega_N");
    double lo = 1, hi = 2;
    while (phi_slab(N, hi) < y) {
        lo = hi;
        hi *= 2;
        if (hi > 1e15) throw DomainError("phi_slab_inv: argument too close to omega_N");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (phi_slab(N, mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace cst

inline std::vector<std::string> constant_names() {
    return {"c_holder", "E",       "W",     "M",         "C_cap_balls", "sigma",     "A_aux",        "gamma0",
            "eps0",     "C_upper", "beta",  "c_subcrit", "phi_slab",    "phi_slab_inv", "gamma0_slab", "slab_rhs",
            "slab_radius_bound", "W_pw", "torsion_bound", "S_sobolev", "M_poin"};
}

inline double eval_constant(const std::string& name, const ConstantContext& ctx, const ConstArgs& args = {});

namespace cst {

inline double gamma0(const ConstantContext& ctx) {
    const auto& P = ctx.params;
    const int N = P.dim;
    const double p = P.p, s = P.s;
    if (p == 1) return 1.0;
    const double cap = need(ctx.ref_cap_ball, "ref_cap_ball");
    if (P.conformal()) {
        double K = std::pow(omega(N), N / s) * need(ctx.lambda_conformal, "lambda_conformal");
        return std::min(std::pow(2.0, -N) * K / cap, 1.0);
    }
    if (s * p > N) throw DomainError("gamma0 is defined for sp <= N");
    double S = need(ctx.sobolev_S, "sobolev_S");
    return std::min(1.0 / (std::pow(omega(N), p / N - 1) * S * cap), 1.0);
}

inline double eps0(const ConstantContext& ctx, double gamma) {
    const auto& P = ctx.params;
    const int N = P.dim;
    const double p = P.p, s = P.s;
    if (!(gamma > 0)) throw DomainError("gamma must be positive");
    if (p == 1) {
        if (!(gamma < 1)) throw DomainError("eps0 needs gamma < 1");
        return 0.5 * (1 - std::pow(2 * gamma / (1 + gamma), 1 / (N - s)));
    }
    double g0 = gamma0(ctx);
    if (!(gamma < g0)) throw DomainError("eps0 needs gamma < gamma0");
    if (P.conformal()) return 0.25 * (1 - std::pow(gamma / g0, 1.0 / N));
    return 0.25 * (1 - std::pow(gamma / g0, 1 / (N - s * p)));
}

inline double C_upper(const ConstantContext& ctx, double gamma) {
    const auto& P = ctx.params;
    const int N = P.dim;
    const double p = P.p, s = P.s, q = P.q;
    const double cap = need(ctx.ref_cap_ball, "ref_cap_ball");
    double e = eps0(ctx, gamma);
    double A = A_aux(N, p, s, q, cap, gamma, e, 0);
    if (p == 1) return 2 / (1 - gamma) * A;
    double g0 = gamma0(ctx);
    if (P.conformal()) {
        double br = 1 - std::pow(gamma / g0, s / N) / (1 - 2 * e);
        if (!(br > 0)) throw DomainError("C_upper (sp = N): bracket not positive for these s and gamma");
        return std::pow(br, -double(N) / s) * A;
    }
    double br = 1 - std::pow(gamma / g0, 1 / p) / std::pow(1 - 2 * e, N / p - s);
    if (!(br > 0)) throw DomainError("C_upper: bracket not positive");
    return std::pow(br, -p) * A;
}

inline double lam_ball_p(const ConstantContext& ctx) {
    if (ctx.ref_lambda_ball_p) return need(ctx.ref_lambda_ball_p, "ref_lambda_ball_p");
    if (ctx.params.q == ctx.params.p) return need(ctx.ref_lambda_ball, "ref_lambda_ball");
    return need(ctx.ref_lambda_ball_p, "ref_lambda_ball_p");
}

}  // namespace cst

// Deterministic evaluation of a named constant.
inline double eval_constant(const std::string& name, const ConstantContext& ctx, const ConstArgs& args) {
    const auto& P = ctx.params;
    const int N = P.dim;
    const double p = P.p, s = P.s, q = P.q;
    using namespace cst;
    if (name == "c_holder") return holder(N, p);
    if (name == "W_pw") return pw_W(N, p);
    if (name == "E") return cst::E(N, p, arg(args, "ratio"));
    if (name == "W") return cst::W(N, p, s, q, arg(args, "ratio"));
    if (name == "M") return cst::M(N, p, s, q, arg(args, "ratio"), need(ctx.ref_lambda_ball, "ref_lambda_ball"));
    if (name == "M_poin") return M_poin(N, p, arg(args, "ratio"));
    if (name == "C_cap_balls") return C_balls(N, p, s, arg(args, "ratio"), lam_ball_p(ctx));
    if (name == "sigma") {
        const double tau = 2 * std::sqrt(double(N));
        double m = cst::M(N, p, s, q, tau, need(ctx.ref_lambda_ball, "ref_lambda_ball"));
        double c = C_balls(N, p, s, tau, lam_ball_p(ctx));
        return std::pow(m, p) / c * need(ctx.ref_cap_ball, "ref_cap_ball") / std::pow(4.0 * N + 1, N);
    }
    if (name == "A_aux") {
        double d = args.count("delta") ? args.at("delta") : 0.0;
        return A_aux(N, p, s, q, need(ctx.ref_cap_ball, "ref_cap_ball"), arg(args, "gamma"), arg(args, "eps"), d);
    }
    if (name == "gamma0") return gamma0(ctx);
    if (name == "eps0") return eps0(ctx, arg(args, "gamma"));
    if (name == "C_upper") return C_upper(ctx, arg(args, "gamma"));
    if (name == "beta") {
        // cap_p >= s(1-s) lambda_p^{1-s} cap_s / c (inverting cap-cap)
        double lam = need(ctx.ref_local_lambda, "ref_local_lambda");
        return s * (1 - s) * std::pow(lam, 1 - s) * need(ctx.ref_cap_ball, "ref_cap_ball") / (holder(N, p) * need(ctx.ref_local_cap, "ref_local_cap"));
    }
    if (name == "c_subcrit") {
        if (!(s * p < N)) throw DomainError("c_subcrit needs sp < N");
        double meas = arg(args, "measure");
        if (!(meas > 0)) throw DomainError("c_subcrit needs a positive measure");
        double pstar = N * p / (N - s * p);
        // right-hand side per unit of the (unspecified) prefactor c_{N,p}
        return std::pow(N - s * p, p - 1) * std::pow(meas, p / pstar - p / q);
    }
    if (name == "phi_slab") return phi_slab(N, arg(args, "r"));
    if (name == "phi_slab_inv") return phi_slab_inv(N, arg(args, "y"));
    if (name == "gamma0_slab") {
        double lam = need(ctx.ref_local_lambda, "ref_local_lambda"), capl = need(ctx.ref_local_cap, "ref_local_cap");
        return std::min(omega(N) * lam / (holder(N, p) * capl) * need(ctx.s_lambda_limit, "s_lambda_limit"), 1.0);
    }
    if (name == "slab_rhs") {
        double lam = need(ctx.ref_local_lambda, "ref_local_lambda"), capl = need(ctx.ref_local_cap, "ref_local_cap");
        double lamb2 = need(ctx.ref_lambda_b2, "ref_lambda_b2");
        return arg(args, "gamma") * holder(N, p) * std::pow(lam, s - 1) * capl / (s * (1 - s) * lamb2);
    }
    if (name == "slab_radius_bound") {
        double y = eval_constant("slab_rhs", ctx, args);
        if (y >= omega(N)) return std::numeric_limits<double>::infinity();
        return phi_slab_inv(N, y);
    }
    if (name == "torsion_bound") {
        // bound on [V]^p for the torsion function of B_r in B_R
        double r = arg(args, "r");
        if (!(p > 1)) throw DomainError("torsion_bound needs p > 1");
        if (P.conformal()) {
            double Rb = arg(args, "R");
            double v = std::pow(omega(N) * std::pow(Rb, N), N / s) / (std::pow(omega(N), N / s) * need(ctx.lambda_conformal, "lambda_conformal"));
            return std::pow(v, 1 / (p - 1));
        }
        if (!(s * p < N)) throw DomainError("torsion_bound needs sp <= N");
        double br = omega(N) * std::pow(r, N);
        return std::pow(std::pow(br, s * p / N - 1 + p) * need(ctx.sobolev_S, "sobolev_S"), 1 / (p - 1));
    }
    if (name == "S_sobolev") return need(ctx.sobolev_S, "sobolev_S");
    throw DomainError("unknown constant: " + name);
}

// ---------------------------------------------------------------- asymptotic probes

struct ProbeReport {
    std::string name, variable;
    std::vector<double> grid, values, scaled;
    double fitted_exponent = 0, expected_exponent = 0, drift = 0;
    bool pass = false;        // fitted exponent within 0.15 of the expected one
    bool plateau_ok = false;  // scaled values drift at most plateau_tol
};

// Fits value ~ x^e, with x the distance to the limit (s -> 0: x = s; s -> 1: x = 1-s;
// gamma -> 1: x = 1-gamma; ratio -> inf: x = ratio). `scaled` = value * x^{-expected}.
inline ProbeReport asymptotic_probe(const std::string& name, const std::function<double(double)>& family, const std::string& variable,
                                    const std::vector<double>& grid, double expected_exponent, double plateau_tol = 0.15) {
    if (grid.size() < 2) throw DomainError("asymptotic_probe needs at least two grid points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] == grid[i - 1]) throw DomainError("degenerate grid");
    ProbeReport R;
    R.name = name;
    R.variable = variable;
    R.grid = grid;
    R.expected_exponent = expected_exponent;
    std::vector<double> lx, ly;
    for (double g : grid) {
        double x = g;
        if (variable == "s->1" || variable == "gamma->1") x = 1 - g;
        else if (variable != "s->0" && variable != "ratio->inf" && variable != "gamma->gamma0")
            throw DomainError("unknown probe variable: " + variable);
        double v = family(g);
        R.values.push_back(v);
        R.scaled.push_back(v * std::pow(x, -expected_exponent));
        lx.push_back(std::log(x));
        ly.push_back(std::log(std::abs(v)));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= double(lx.size());
    my /= double(lx.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    R.fitted_exponent = sxy / sxx;
    double lo = *std::min_element(R.scaled.begin(), R.scaled.end()), hi = *std::max_element(R.scaled.begin(), R.scaled.end());
    R.drift = (hi - lo) / std::max(std::abs(lo), std::abs(hi));
    R.plateau_ok = R.drift <= plateau_tol && lo > 0;
    R.pass = std::abs(R.fitted_exponent - expected_exponent) <= 0.15;
    return R;
}

// Scaled-value plateau check used by the harness (value * weight over a grid).
inline double plateau_drift(const std::vector<double>& v) {
    double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    return (hi - lo) / std::max(std::abs(lo), std::abs(hi));
}

}  // namespace frac
