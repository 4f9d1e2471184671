#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "frac/energy.hpp"
#include "frac/kernel.hpp"
#include "frac/lattice.hpp"

namespace frac {

struct MinimizeResult {
    double value = 0;
    LatticeFunction minimizer;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
    std::string method;
    Mask level_set;  // optimal set for p = 1 problems
};

struct SolverOptions {
    int near_band = 2;
    double tol = 1e-10;      // relative objective decrease over `window` iterations
    int window = 20;
    int max_iter = 4000;
    double residual_tol = 1e-8;
    bool require_convergence = false;
    // Largest free set for which the p = 1 relaxation runs before level-set extraction.
    std::size_t relax_limit = 1500;
};

namespace detail {

using Vec = Eigen::VectorXd;
using Idx = Eigen::Index;

inline void finish(MinimizeResult& r, const SolverOptions& opt) {
    if (opt.require_convergence && !r.converged)
        throw ConvergenceError(r.method + ": no convergence (residual " + std::to_string(r.residual) + ")");
}

// Quadratic form of the system restricted to the unknowns listed in `free_ids`, plus the
// coupling vector c_a = sum_{b fixed} 2 w_ab x_b.
struct Restricted {
    std::vector<std::size_t> free_ids;
    std::vector<long> pos;  // system index -> free position or -1
};

inline Restricted restrict_to(const PairSystem& sys, const std::vector<std::uint8_t>& is_fixed) {
    Restricted R;
    R.pos.assign(sys.size(), -1);
    for (std::size_t a = 0; a < sys.size(); ++a)
        if (!is_fixed[a]) {
            R.pos[a] = long(R.free_ids.size());
            R.free_ids.push_back(a);
        }
    return R;
}

// Symmetric positive definite factorization of a (possibly weighted) quadratic form on the free set.
class Factor {
public:
    // weight(a,b) and bnd(a) give the pair and boundary coefficients; L_aa = 2(sum_b c_ab + bnd_a).
    template <class PairW, class BndW>
    Factor(const PairSystem& sys, const Restricted& R, PairW&& weight, BndW&& bnd) {
        const std::size_t n = R.free_ids.size();
        sparse_ = sys.mode() == PairSystem::Mode::Sparse;
        if (!sparse_ && n > 6000) throw DomainError("free set too large for a dense factorization");
        if (sparse_) {
            std::vector<Eigen::Triplet<double>> trip;
            for (std::size_t f = 0; f < n; ++f) {
                std::size_t a = R.free_ids[f];
                double diag = 0;
                sys.row(a, [&](std::size_t b, double w) {
                    double c = weight(a, b, w);
                    diag += c;
                    if (R.pos[b] >= 0) trip.emplace_back(Idx(f), Idx(R.pos[b]), -2 * c);
                });
                trip.emplace_back(Idx(f), Idx(f), 2 * (diag + bnd(a)));
            }
            S_.resize(Idx(n), Idx(n));
            S_.setFromTriplets(trip.begin(), trip.end());
            sllt_.compute(S_);
            ok_ = sllt_.info() == Eigen::Success;
        } else {
            D_ = Eigen::MatrixXd::Zero(Idx(n), Idx(n));
            for (std::size_t f = 0; f < n; ++f) {
                std::size_t a = R.free_ids[f];
                double diag = 0;
                sys.row(a, [&](std::size_t b, double w) {
                    double c = weight(a, b, w);
                    diag += c;
                    if (R.pos[b] >= 0) D_(Idx(f), Idx(R.pos[b])) = -2 * c;
                });
                D_(Idx(f), Idx(f)) = 2 * (diag + bnd(a));
            }
            llt_.compute(D_);
            ok_ = llt_.info() == Eigen::Success;
        }
        if (!ok_) throw ConvergenceError("factorization failed: quadratic form not positive definite");
    }

    Vec solve(const Vec& b) const { return sparse_ ? Vec(sllt_.solve(b)) : Vec(llt_.solve(b)); }
    Vec apply(const Vec& x) const { return sparse_ ? Vec(S_ * x) : Vec(D_ * x); }

private:
    bool sparse_ = false, ok_ = false;
    Eigen::MatrixXd D_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::SparseMatrix<double> S_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sllt_;
};

inline Factor plain_factor(const PairSystem& sys, const Restricted& R) {
    return Factor(sys, R, [](std::size_t, std::size_t, double w) { return w; }, [&](std::size_t a) { return sys.boundary(a); });
}

// Sum over fixed partners: c_a = 2 sum_{b fixed} w_ab x_b.
inline Vec coupling(const PairSystem& sys, const Restricted& R, const Vec& x) {
    Vec c = Vec::Zero(Idx(R.free_ids.size()));
    for (std::size_t f = 0; f < R.free_ids.size(); ++f) {
        double acc = 0;
        sys.row(R.free_ids[f], [&](std::size_t b, double w) {
            if (R.pos[b] < 0) acc += w * x[Idx(b)];
        });
        c[Idx(f)] = 2 * acc;
    }
    return c;
}

// Full-vector product y = L x with E(x) = x^T L x (matrix free).
inline Vec apply_form(const PairSystem& sys, const Vec& x) {
    Vec y = Vec::Zero(Idx(sys.size()));
    for (std::size_t a = 0; a < sys.size(); ++a) {
        double acc = 0, xa = x[Idx(a)];
        sys.row(a, [&](std::size_t b, double w) { acc += w * (xa - x[Idx(b)]); });
        y[Idx(a)] = 2 * (acc + sys.boundary(a) * xa);
    }
    return y;
}

// Jacobi-preconditioned CG on the free set, matrix free; for supports beyond the dense limit.
inline Vec cg_solve(const PairSystem& sys, const Restricted& R, const Vec& rhs, double tol, int max_iter,
                    int& iters, double& res) {
    const std::size_t n = R.free_ids.size();
    auto rs = sys.row_sums();
    Vec diag = Vec::Zero(Idx(n));
    for (std::size_t f = 0; f < n; ++f) diag[Idx(f)] = 2 * (rs[R.free_ids[f]] + sys.boundary(R.free_ids[f]));
    auto A = [&](const Vec& xf) {
        Vec full = Vec::Zero(Idx(sys.size()));
        for (std::size_t f = 0; f < n; ++f) full[Idx(R.free_ids[f])] = xf[Idx(f)];
        Vec y = apply_form(sys, full);
        Vec out = Vec::Zero(Idx(n));
        for (std::size_t f = 0; f < n; ++f) out[Idx(f)] = y[Idx(R.free_ids[f])];
        return out;
    };
    Vec x = Vec::Zero(Idx(n)), r = rhs, z = r.cwiseQuotient(diag), p = z;
    double rz = r.dot(z), bn = rhs.norm();
    iters = 0;
    res = bn > 0 ? r.norm() / bn : 0;
    while (res > tol && iters < max_iter) {
        Vec Ap = A(p);
        double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        ++iters;
        res = r.norm() / bn;
        z = r.cwiseQuotient(diag);
        double rz2 = r.dot(z);
        p = z + (rz2 / rz) * p;
        rz = rz2;
    }
    return x;
}

// ---------------------------------------------------------------- sets (p = 1)

// Incremental bookkeeping of P(O) = sum_{i != j} w |1_O(i) - 1_O(j)| + 2 sum_{i in O} bnd_i.
class SetState {
public:
    explicit SetState(const PairSystem& sys) : sys_(sys), r_(sys.row_sums()), a_(sys.size(), 0.0), in_(sys.size(), 0) {}

    bool in(std::size_t k) const { return in_[k] != 0; }
    double perimeter() const { return P_; }
    // Change of P when k is flipped.
    double delta(std::size_t k) const {
        double g = 2 * (sys_.boundary(k) + r_[k] - 2 * a_[k]);
        return in_[k] ? -g : g;
    }
    void flip(std::size_t k) {
        P_ += delta(k);
        double sgn = in_[k] ? -1.0 : 1.0;
        in_[k] = !in_[k];
        sys_.row(k, [&](std::size_t j, double w) { a_[j] += sgn * w; });
    }
    const Mask& members() const { return in_; }
    // Recomputes P from scratch (removes incremental drift).
    double exact_perimeter() const {
        Vec x = Vec::Zero(Idx(sys_.size()));
        for (std::size_t k = 0; k < sys_.size(); ++k) x[Idx(k)] = in_[k];
        return energy(sys_, x, Penalty{1, 0}).value;
    }

private:
    const PairSystem& sys_;
    std::vector<double> r_, a_;
    Mask in_;
    double P_ = 0;
};

// Objective over sets: P(O) / (|O cap E|)^{1/q} when `ratio`, else P(O).
struct SetObjective {
    bool ratio = false;
    double inv_q = 1;
    double cell = 1;
    const Mask* region = nullptr;  // E, over system indices
    double eval(double P, double count) const {
        if (!ratio) return P;
        if (count <= 0) return std::numeric_limits<double>::infinity();
        return P / std::pow(count * cell, inv_q);
    }
};

// Steepest single-cell flips until no flip lowers the objective; `locked` cells never change.
inline int flip_search(SetState& st, const SetObjective& obj, const Mask& locked, const Mask& allowed, double& count) {
    const std::size_t n = locked.size();
    int flips = 0;
    const int cap = int(20 * n + 100);
    double f = obj.eval(st.perimeter(), count);
    while (flips < cap) {
        double best = f;
        long arg = -1;
        for (std::size_t k = 0; k < n; ++k) {
            if (locked[k] || (!st.in(k) && !allowed[k])) continue;
            double dc = obj.region && (*obj.region)[k] ? (st.in(k) ? -1.0 : 1.0) : 0.0;
            double fk = obj.eval(st.perimeter() + st.delta(k), count + dc);
            if (fk < best - 1e-13 * std::abs(f)) {
                best = fk;
                arg = long(k);
            }
        }
        if (arg < 0) break;
        std::size_t k = std::size_t(arg);
        if (obj.region && (*obj.region)[k]) count += st.in(k) ? -1.0 : 1.0;
        st.flip(k);
        f = obj.eval(st.perimeter(), count);
        ++flips;
    }
    return flips;
}

// Best superlevel set {phi >= t} (plus `base`) over all lattice thresholds t > 0; ties go to the
// smallest t. Returns membership over system indices.
inline Mask best_level_set(const PairSystem& sys, const Vec& phi, const Mask& base, const SetObjective& obj, double& best_val) {
    const std::size_t n = sys.size();
    SetState st(sys);
    double count = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (base[k]) {
            st.flip(k);
            if (obj.region && (*obj.region)[k]) count += 1;
        }
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < n; ++k)
        if (!base[k] && phi[Idx(k)] > 0) order.push_back(k);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return phi[Idx(a)] > phi[Idx(b)]; });
    best_val = std::numeric_limits<double>::infinity();
    std::size_t best_len = 0;
    bool have_base = std::any_of(base.begin(), base.end(), [](std::uint8_t v) { return v != 0; });
    if (have_base) best_val = obj.eval(st.perimeter(), count);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && phi[Idx(order[j])] == phi[Idx(order[i])]) {
            if (obj.region && (*obj.region)[order[j]]) count += 1;
            st.flip(order[j]);
            ++j;
        }
        double f = obj.eval(st.perimeter(), count);
        if (f <= best_val) {
            best_val = f;
            best_len = j;
        }
        i = j;
    }
    Mask out = base;
    for (std::size_t k = 0; k < best_len; ++k) out[order[k]] = 1;
    return out;
}

// One dilation step of a membership mask inside the system (face neighbours on the lattice).
inline Mask dilate(const PairSystem& sys, const Box& box, const Mask& m) {
    std::vector<long> pos(box.size(), -1);
    for (std::size_t a = 0; a < sys.size(); ++a) pos[sys.idx[a]] = long(a);
    Mask out = m;
    for (std::size_t a = 0; a < sys.size(); ++a) {
        if (!m[a]) continue;
        int i = box.ix(sys.idx[a]), j = box.iy(sys.idx[a]);
        const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
        for (int t = 0; t < 2 * box.dim; ++t) {
            int ii = i + di[t], jj = j + dj[t];
            if (ii < 0 || jj < 0 || ii >= box.n[0] || jj >= box.n[1]) continue;
            long b = pos[box.index(ii, jj)];
            if (b >= 0) out[std::size_t(b)] = 1;
        }
    }
    return out;
}

// Energy-ratio descent for frequencies: minimise E_p(x)/||x||_q^p over x >= 0, preconditioned by the
// quadratic form of the system. Relative decrease below tol over `window` iterations ends the run.
struct RatioResult {
    Vec x;
    double value = 0;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
};

inline double weighted_lq(const Vec& x, double q, double cell, const Mask* region) {
    std::vector<double> t;
    for (Idx k = 0; k < x.size(); ++k)
        if (!region || (*region)[std::size_t(k)]) t.push_back(std::pow(std::abs(x[k]), q));
    return std::pow(cell * pairwise_sum(t), 1.0 / q);
}

inline RatioResult ratio_descent(const PairSystem& sys, Penalty pen, double q, const Mask* region, Vec x, const SolverOptions& opt) {
    const double p = pen.p, cell = sys.cell_volume();
    Mask none(sys.size(), 0);
    Restricted R = restrict_to(sys, none);
    Factor P = plain_factor(sys, R);
    auto value = [&](const Vec& y) {
        double nq = weighted_lq(y, q, cell, region);
        return nq > 0 ? energy(sys, y, pen).value / std::pow(nq, p) : std::numeric_limits<double>::infinity();
    };
    auto normalize = [&](Vec& y) {
        y = y.cwiseMax(0.0);
        double nq = weighted_lq(y, q, cell, region);
        if (nq > 0) y /= nq;
    };
    normalize(x);
    RatioResult rr;
    std::vector<double> hist{value(x)};
    double t = 1.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        // gradient of E/||x||_q^p at ||x||_q = 1
        double E = energy(sys, x, pen).value;
        Vec g = energy_gradient(sys, x, pen);
        for (Idx k = 0; k < x.size(); ++k) {
            bool inr = !region || (*region)[std::size_t(k)];
            if (inr) g[k] -= p * E * cell * std::pow(std::abs(x[k]), q - 1) * ((x[k] > 0) - (x[k] < 0));
        }
        Vec d = -P.solve(g);
        double f0 = hist.back(), f1 = f0;
        Vec xn;
        bool ok = false;
        for (int bt = 0; bt < 60; ++bt) {
            xn = x + t * d;
            normalize(xn);
            f1 = value(xn);
            if (f1 < f0 - 1e-4 * std::abs(g.dot(x - xn))) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        rr.iterations = it + 1;
        if (!ok) break;
        x = xn;
        hist.push_back(f1);
        t = std::min(1e6, 2 * t);
        if (int(hist.size()) > opt.window) {
            double old = hist[hist.size() - 1 - std::size_t(opt.window)];
            rr.residual = (old - f1) / std::abs(f1);
            if (rr.residual < opt.tol) break;
        }
    }
    if (int(hist.size()) <= opt.window) {
        rr.residual = hist.size() > 1 ? (hist.front() - hist.back()) / std::abs(hist.back()) : 0.0;
    }
    rr.x = x;
    rr.value = value(x);
    rr.converged = rr.residual <= std::max(opt.tol, 1e-8);
    return rr;
}

// Projected Newton-type descent for  J(x) = alpha E_p(x) - b^T x  over the free unknowns, with x
// clamped to [lo, hi]. The Hessian is regularised where p < 2 makes it singular.
struct NewtonResult {
    Vec x;
    double value = 0;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
};

inline NewtonResult newton_minimize(const PairSystem& sys, const Restricted& R, double p, double alpha, const Vec& b_full, Vec x, double lo,
                                    double hi, const SolverOptions& opt) {
    Penalty pen{p, 0};
    const std::size_t nf = R.free_ids.size();
    auto J = [&](const Vec& y) { return alpha * energy(sys, y, pen).value - b_full.dot(y); };
    NewtonResult nr;
    double f = J(x);
    double bscale = b_full.norm();
    for (int it = 0; it < std::min(opt.max_iter, 200); ++it) {
        Vec g = alpha * energy_gradient(sys, x, pen) - b_full;
        // projected gradient norm on the free set
        double pg = 0, gs = bscale;
        for (std::size_t f2 = 0; f2 < nf; ++f2) {
            std::size_t a = R.free_ids[f2];
            double ga = g[Idx(a)], xa = x[Idx(a)];
            if ((xa <= lo && ga > 0) || (xa >= hi && ga < 0)) ga = 0;
            pg += ga * ga;
        }
        Vec gE = energy_gradient(sys, x, pen);
        gs = std::max(gs, alpha * gE.norm());
        nr.residual = gs > 0 ? std::sqrt(pg) / gs : 0;
        nr.iterations = it;
        if (nr.residual < 1e-13) break;
        double xmax = x.cwiseAbs().maxCoeff();
        double delta = 1e-7 * std::max(xmax, 1e-300);
        auto d2 = [&](double t) { return alpha * pen.d2(t, delta); };
        Factor H(
            sys, R, [&](std::size_t a, std::size_t c, double w) { return w * d2(x[Idx(a)] - x[Idx(c)]); },
            [&](std::size_t a) { return sys.boundary(a) * d2(x[Idx(a)]); });
        Vec gf = Vec::Zero(Idx(nf));
        for (std::size_t f2 = 0; f2 < nf; ++f2) gf[Idx(f2)] = g[Idx(R.free_ids[f2])];
        Vec d = -H.solve(gf);
        double t = 1.0;
        bool ok = false;
        Vec xn = x;
        double fn = f;
        for (int bt = 0; bt < 60; ++bt) {
            xn = x;
            for (std::size_t f2 = 0; f2 < nf; ++f2) {
                std::size_t a = R.free_ids[f2];
                xn[Idx(a)] = std::clamp(x[Idx(a)] + t * d[Idx(f2)], lo, hi);
            }
            fn = J(xn);
            if (fn <= f + 1e-4 * g.dot(xn - x)) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok || fn >= f) {
            nr.iterations = it + 1;
            break;
        }
        x = xn;
        f = fn;
        nr.iterations = it + 1;
    }
    nr.x = x;
    nr.value = J(x);
    nr.converged = nr.residual <= opt.residual_tol;
    return nr;
}

// IRLS for the eps-smoothed p = 1 energy with fixed values; eps annealed over the schedule.
inline Vec irls_p1(const PairSystem& sys, const Restricted& R, Vec x, const SolverOptions& opt, int& iters) {
    iters = 0;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        Penalty pen{1, eps};
        double f = energy(sys, x, pen).value;
        for (int it = 0; it < 40; ++it) {
            auto psi = [&](double t) { return std::sqrt(t * t + eps * eps); };
            Factor F(
                sys, R, [&](std::size_t a, std::size_t b, double w) { return 0.5 * w / psi(x[Idx(a)] - x[Idx(b)]); },
                [&](std::size_t a) { return 0.5 * sys.boundary(a) / psi(x[Idx(a)]); });
            // coupling with fixed unknowns under the current weights
            Vec c = Vec::Zero(Idx(R.free_ids.size()));
            for (std::size_t f2 = 0; f2 < R.free_ids.size(); ++f2) {
                std::size_t a = R.free_ids[f2];
                double acc = 0;
                sys.row(a, [&](std::size_t b, double w) {
                    if (R.pos[b] < 0) acc += 0.5 * w / psi(x[Idx(a)] - x[Idx(b)]) * x[Idx(b)];
                });
                c[Idx(f2)] = 2 * acc;
            }
            Vec xf = F.solve(c);
            Vec xn = x;
            for (std::size_t f2 = 0; f2 < R.free_ids.size(); ++f2) xn[Idx(R.free_ids[f2])] = std::clamp(xf[Idx(f2)], 0.0, 1.0);
            double fn = energy(sys, xn, pen).value;
            ++iters;
            bool small = f - fn < opt.tol * std::abs(f);
            if (fn <= f) {
                x = xn;
            }
            if (small || fn > f) break;
            f = fn;
        }
    }
    return x;
}

// The p = 2 minimum eigenpair of the form by inverse iteration.
struct EigenResult {
    Vec x;
    double mu = 0;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
};

inline EigenResult inverse_iteration(const PairSystem& sys, const SolverOptions& opt) {
    Mask none(sys.size(), 0);
    Restricted R = restrict_to(sys, none);
    Factor F = plain_factor(sys, R);
    const Idx n = Idx(sys.size());
    Vec x = Vec::Ones(n) / std::sqrt(double(n));
    EigenResult er;
    double mu = 0;
    for (int it = 0; it < std::max(opt.max_iter, 100); ++it) {
        Vec y = F.solve(x);
        double ny = y.norm();
        if (!(ny > 0) || !std::isfinite(ny)) throw ConvergenceError("inverse iteration breakdown");
        y /= ny;
        Vec Ly = F.apply(y);
        double mun = y.dot(Ly);
        er.residual = (Ly - mun * y).norm() / mun;
        x = y;
        er.iterations = it + 1;
        bool stable = it > 0 && std::abs(mun - mu) <= 1e-15 * mun;
        mu = mun;
        if (er.residual < 1e-11 || (stable && er.residual < 1e-8)) break;
    }
    if (x.sum() < 0) x = -x;
    er.x = x;
    er.mu = mu;
    er.converged = er.residual < 1e-8;
    return er;
}

inline Mask sys_mask(const PairSystem& sys, const Mask& box_mask) {
    Mask m(sys.size(), 0);
    for (std::size_t a = 0; a < sys.size(); ++a) m[a] = box_mask[sys.idx[a]];
    return m;
}

inline Mask box_mask(const PairSystem& sys, const Box& box, const Mask& m) {
    Mask out(box.size(), 0);
    for (std::size_t a = 0; a < sys.size(); ++a) out[sys.idx[a]] = m[a];
    return out;
}

// Shared p = 1 minimisation over sets: relaxation (when small), level-set extraction, flip polish.
inline MinimizeResult p1_set_problem(const PairSystem& sys, const Box& box, const Mask& fixed_in, const SetObjective& obj,
                                     const Vec* relaxed, const std::vector<Mask>& seeds) {
    Mask allowed(sys.size(), 1);
    double best = std::numeric_limits<double>::infinity();
    Mask best_set;
    int total_flips = 0;
    std::vector<Mask> starts = seeds;
    if (relaxed) {
        double v = 0;
        starts.insert(starts.begin(), best_level_set(sys, *relaxed, fixed_in, obj, v));
    }
    for (const auto& s0 : starts) {
        SetState st(sys);
        double count = 0;
        for (std::size_t k = 0; k < sys.size(); ++k)
            if (s0[k] || fixed_in[k]) {
                st.flip(k);
                if (obj.region && (*obj.region)[k]) count += 1;
            }
        total_flips += flip_search(st, obj, fixed_in, allowed, count);
        double v = obj.eval(st.exact_perimeter(), count);
        if (v < best) {
            best = v;
            best_set = st.members();
        }
    }
    MinimizeResult r;
    r.value = best;
    r.iterations = total_flips;
    r.residual = 0;
    r.converged = std::isfinite(best);
    r.level_set = box_mask(sys, box, best_set);
    Vec x = Vec::Zero(Idx(sys.size()));
    double count = 0;
    for (std::size_t k = 0; k < sys.size(); ++k) {
        x[Idx(k)] = best_set[k];
        if (obj.region && (*obj.region)[k] && best_set[k]) count += 1;
    }
    if (obj.ratio && count > 0) x /= std::pow(count * obj.cell, obj.inv_q);
    r.minimizer = scatter(sys, box, x);
    return r;
}

inline void check_nested(const Mask& sigma, const Mask& env, const Box& box) {
    if (sigma.size() != box.size() || env.size() != box.size()) throw DomainError("sets must share one box");
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        if (!sigma[k]) continue;
        if (!env[k]) throw DomainError("sigma must be contained in env");
        int i = box.ix(k), j = box.iy(k);
        for (int dj = box.dim == 2 ? -1 : 0; dj <= (box.dim == 2 ? 1 : 0); ++dj)
            for (int di = -1; di <= 1; ++di) {
                int ii = i + di, jj = j + dj;
                if (ii < 0 || jj < 0 || ii >= box.n[0] || jj >= box.n[1] || !env[box.index(ii, jj)])
                    throw DomainError("sigma touches the env boundary (needs one env ring)");
            }
    }
}

// Capacity on a prepared system (nonlocal or local).
inline MinimizeResult capacity_on(const PairSystem& sys, const Box& box, const Mask& sigma_box, double p, const SolverOptions& opt) {
    Mask fixed = sys_mask(sys, sigma_box);
    MinimizeResult r;
    const bool empty = std::none_of(fixed.begin(), fixed.end(), [](std::uint8_t v) { return v != 0; });
    if (empty) {
        r.minimizer = LatticeFunction(box);
        r.converged = true;
        r.method = "capacity(empty sigma)";
        r.level_set = Mask(box.size(), 0);
        return r;
    }
    Restricted R = restrict_to(sys, fixed);
    Vec x = Vec::Zero(Idx(sys.size()));
    for (std::size_t a = 0; a < sys.size(); ++a)
        if (fixed[a]) x[Idx(a)] = 1;
    const bool dense_ok = sys.mode() != PairSystem::Mode::Table;

    auto p2_solve = [&](Vec& y, int& iters, double& res) {
        Vec c = coupling(sys, R, y);
        Vec xf;
        if (dense_ok) {
            Factor F = plain_factor(sys, R);
            xf = F.solve(c);
            res = (F.apply(xf) - c).norm() / std::max(c.norm(), 1e-300);
            iters = 1;
        } else {
            xf = cg_solve(sys, R, c, 1e-12, 5000, iters, res);
        }
        for (std::size_t f = 0; f < R.free_ids.size(); ++f) y[Idx(R.free_ids[f])] = std::clamp(xf[Idx(f)], 0.0, 1.0);
    };

    if (p == 2) {
        int it = 0;
        double res = 0;
        p2_solve(x, it, res);
        r.method = dense_ok ? "capacity(p=2, direct)" : "capacity(p=2, cg)";
        r.iterations = it;
        r.residual = res;
        r.converged = res <= opt.residual_tol;
        r.value = energy(sys, x, Penalty{2, 0}).value;
        r.minimizer = scatter(sys, box, x);
    } else if (p > 1) {
        if (!dense_ok) throw DomainError("support too large for the p != 2 capacity solver");
        int it = 0;
        double res = 0;
        p2_solve(x, it, res);  // start from the quadratic potential
        auto nr = newton_minimize(sys, R, p, 1.0, Vec::Zero(Idx(sys.size())), x, 0.0, 1.0, opt);
        r.method = "capacity(p>1, projected newton descent)";
        r.iterations = nr.iterations;
        r.residual = nr.residual;
        r.converged = nr.converged;
        r.value = energy(sys, nr.x, Penalty{p, 0}).value;
        r.minimizer = scatter(sys, box, nr.x);
    } else {
        SetObjective obj;
        std::vector<Mask> seeds{fixed};
        Vec relaxed;
        int it = 0;
        bool have = false;
        if (dense_ok && R.free_ids.size() <= opt.relax_limit) {
            double res = 0;
            p2_solve(x, it, res);
            relaxed = irls_p1(sys, R, x, opt, it);
            have = true;
        } else {
            Mask d1 = dilate(sys, box, fixed);
            seeds.push_back(d1);
            seeds.push_back(dilate(sys, box, d1));
        }
        r = p1_set_problem(sys, box, fixed, obj, have ? &relaxed : nullptr, seeds);
        r.iterations += it;
        r.method = have ? "capacity(p=1, smoothed IRLS + level sets + flips)" : "capacity(p=1, set flips)";
    }
    finish(r, opt);
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------- public API

// cap_{s,p}(sigma; env). Both sets live in the same box (env's box must carry the padding).
inline MinimizeResult capacity(const Mask& sigma, const LatticeDomain& env, const FracParams& prm, const SolverOptions& opt = {}) {
    detail::check_nested(sigma, env.active, env.box);
    auto kw = std::make_shared<const KernelWeights>(assemble_kernel(env.box, prm, opt.near_band));
    auto sys = PairSystem::nonlocal(kw, env.active);
    return detail::capacity_on(sys, env.box, sigma, prm.p, opt);
}

inline MinimizeResult capacity(const LatticeDomain& sigma, const LatticeDomain& env, const FracParams& prm, const SolverOptions& opt = {}) {
    if (!sigma.box.same_cells(env.box)) throw DomainError("sigma and env must share one box");
    return capacity(sigma.active, env, prm, opt);
}

inline MinimizeResult local_capacity(const Mask& sigma, const LatticeDomain& env, double p, const SolverOptions& opt = {}) {
    detail::check_nested(sigma, env.active, env.box);
    auto sys = PairSystem::local(env.box, env.active, p);
    return detail::capacity_on(sys, env.box, sigma, p, opt);
}

namespace detail {

inline MinimizeResult frequency_on(const PairSystem& sys, const Box& box, double p, double q, const SolverOptions& opt) {
    if (sys.size() == 0) throw DomainError("frequency needs a nonempty domain");
    MinimizeResult r;
    const double cell = sys.cell_volume();
    if (p == 2 && q == 2) {
        auto er = inverse_iteration(sys, opt);
        r.value = er.mu / cell;
        Vec x = er.x / std::sqrt(cell * er.x.squaredNorm());
        r.minimizer = scatter(sys, box, x);
        r.iterations = er.iterations;
        r.residual = er.residual;
        r.converged = er.converged;
        r.method = "frequency(p=q=2, inverse iteration)";
    } else if (p == 2) {
        // nonlinear inverse power method: numerator and denominator are both 2-homogeneous,
        // so x <- L^{-1} x^{q-1} decreases the quotient monotonically
        Mask none(sys.size(), 0);
        Restricted R = restrict_to(sys, none);
        Factor F = plain_factor(sys, R);
        Vec x = inverse_iteration(sys, opt).x.cwiseAbs();
        auto quotient = [&](const Vec& y) { return y.dot(F.apply(y)) / std::pow(weighted_lq(y, q, cell, nullptr), 2); };
        double f = quotient(x);
        int it = 0;
        double rel = 0;
        for (; it < opt.max_iter; ++it) {
            Vec g = x.cwiseMax(0.0).array().pow(q - 1).matrix();
            Vec y = F.solve(g).cwiseMax(0.0);
            y /= weighted_lq(y, q, cell, nullptr);
            double fy = quotient(y);
            rel = (f - fy) / std::abs(fy);
            x = y;
            f = fy;
            if (rel < 1e-2 * opt.tol) break;
        }
        r.value = energy(sys, x, Penalty{2, 0}).value / std::pow(weighted_lq(x, q, cell, nullptr), 2);
        r.minimizer = scatter(sys, box, x);
        r.iterations = it + 1;
        r.residual = std::max(rel, 0.0);
        r.converged = rel < 1e-2 * opt.tol;
        r.method = "frequency(p=2, nonlinear inverse power)";
    } else if (p > 1) {
        auto er = inverse_iteration(sys, opt);
        auto rr = ratio_descent(sys, Penalty{p, 0}, q, nullptr, er.x, opt);
        r.value = rr.value;
        r.minimizer = scatter(sys, box, rr.x);
        r.iterations = rr.iterations;
        r.residual = rr.residual;
        r.converged = rr.converged;
        r.method = "frequency(projected normalized descent)";
    } else {
        // p = 1: minimisers are indicators, lambda_{1,q} = min P(O)/|O|^{1/q}
        SetObjective obj;
        obj.ratio = true;
        obj.inv_q = 1.0 / q;
        obj.cell = cell;
        Mask all(sys.size(), 1);
        obj.region = &all;
        Mask none(sys.size(), 0);
        std::vector<Mask> seeds{all};
        Vec relaxed;
        bool have = false;
        if (sys.mode() != PairSystem::Mode::Table && sys.size() <= opt.relax_limit) {
            auto er = inverse_iteration(sys, opt);
            relaxed = er.x;
            have = true;
        }
        r = p1_set_problem(sys, box, none, obj, have ? &relaxed : nullptr, seeds);
        r.method = "frequency(p=1, level sets + flips)";
    }
    finish(r, opt);
    return r;
}

}  // namespace detail

// lambda^s_{p,q}(omega).
inline MinimizeResult frequency(const LatticeDomain& omega, const FracParams& prm, const SolverOptions& opt = {}) {
    auto kw = std::make_shared<const KernelWeights>(assemble_kernel(omega.box, prm, opt.near_band));
    auto sys = PairSystem::nonlocal(kw, omega.active);
    return detail::frequency_on(sys, omega.box, prm.p, prm.q, opt);
}

// lambda_p(omega) for the local p-Dirichlet energy (q = p).
inline MinimizeResult local_frequency(const LatticeDomain& omega, double p, const SolverOptions& opt = {}) {
    auto sys = PairSystem::local(omega.box, omega.active, p);
    return detail::frequency_on(sys, omega.box, p, p, opt);
}

// Torsion function of B_r inside B_R (both centred at the origin) on spacing h.
inline MinimizeResult torsion(double r, double R, const FracParams& prm, double h, const SolverOptions& opt = {}) {
    if (!(0 < r && r <= R)) throw DomainError("torsion needs 0 < r <= R");
    if (!(prm.p > 1)) throw DomainError("torsion needs p > 1");
    Point o{0, 0};
    auto omega = build_domain(Shape::ball(o, R, prm.dim), h);
    Mask inner = rasterize(Shape::ball(o, r, prm.dim), omega.box);
    auto kw = std::make_shared<const KernelWeights>(assemble_kernel(omega.box, prm, opt.near_band));
    auto sys = PairSystem::nonlocal(kw, omega.active);
    if (sys.mode() == PairSystem::Mode::Table) throw DomainError("support too large for the torsion solver");
    const double cell = sys.cell_volume();
    detail::Vec b = detail::Vec::Zero(detail::Idx(sys.size()));
    for (std::size_t a = 0; a < sys.size(); ++a)
        if (inner[sys.idx[a]]) b[detail::Idx(a)] = cell;
    Mask none(sys.size(), 0);
    auto Rr = detail::restrict_to(sys, none);
    MinimizeResult res;
    // quadratic start (exact when p = 2): L V = b
    detail::Factor F = detail::plain_factor(sys, Rr);
    detail::Vec x = F.solve(b);
    if (prm.p == 2) {
        res.residual = (F.apply(x) - b).norm() / b.norm();
        res.iterations = 1;
        res.converged = res.residual <= opt.residual_tol;
        res.method = "torsion(p=2, direct)";
    } else {
        // rescale the start to the p-homogeneous optimum along its ray
        double E = energy(sys, x.cwiseMax(0.0), Penalty{prm.p, 0}).value, B = b.dot(x.cwiseMax(0.0));
        x = x.cwiseMax(0.0) * std::pow(B / E, 1.0 / (prm.p - 1));
        auto nr = detail::newton_minimize(sys, Rr, prm.p, 1.0 / prm.p, b, x, 0.0, std::numeric_limits<double>::infinity(), opt);
        x = nr.x;
        res.iterations = nr.iterations;
        res.residual = nr.residual;
        res.converged = nr.converged;
        res.method = "torsion(projected newton descent)";
    }
    res.value = energy(sys, x, Penalty{prm.p, 0}).value / prm.p - b.dot(x);
    res.minimizer = scatter(sys, omega.box, x);
    detail::finish(res, opt);
    return res;
}

struct TorsionSummary {
    double integral = 0;   // int_{B_r} V
    double energy = 0;     // [V]^p
    double rel_gap = 0;    // |int V - [V]^p| / [V]^p
    double min_value = 0;  // min V
};

inline TorsionSummary torsion_identity(const MinimizeResult& t, double r, const FracParams& prm, int near_band = 2) {
    const auto& V = t.minimizer;
    Mask inner = rasterize(Shape::ball({0, 0}, r, prm.dim), V.box);
    TorsionSummary s;
    std::vector<double> vals;
    for (std::size_t k = 0; k < inner.size(); ++k)
        if (inner[k]) vals.push_back(V.values[k]);
    s.integral = std::pow(V.box.h, V.box.dim) * pairwise_sum(vals);
    s.energy = gagliardo_p(V, assemble_kernel(V.box, prm, near_band), prm.p).value;
    s.rel_gap = std::abs(s.integral - s.energy) / s.energy;
    s.min_value = *std::min_element(V.values.begin(), V.values.end());
    return s;
}

// h_s(E; Omega) = min P_s(O) / |O cap E| over O subset of Omega.
inline MinimizeResult cheeger(const Mask& e_region, const LatticeDomain& omega, double s, const SolverOptions& opt = {}) {
    if (e_region.size() != omega.box.size()) throw DomainError("E must share omega's box");
    for (std::size_t k = 0; k < e_region.size(); ++k)
        if (e_region[k] && !omega.active[k]) throw DomainError("E must be contained in omega");
    FracParams prm(omega.box.dim, s, 1.0, 1.0);
    auto kw = std::make_shared<const KernelWeights>(assemble_kernel(omega.box, prm, opt.near_band));
    auto sys = PairSystem::nonlocal(kw, omega.active);
    Mask E = detail::sys_mask(sys, e_region);
    if (std::none_of(E.begin(), E.end(), [](std::uint8_t v) { return v != 0; })) throw DomainError("E has no lattice cell");
    detail::SetObjective obj;
    obj.ratio = true;
    obj.inv_q = 1.0;
    obj.cell = sys.cell_volume();
    obj.region = &E;
    Mask none(sys.size(), 0), all(sys.size(), 1);
    std::vector<Mask> seeds{E, all};
    detail::Vec relaxed;
    bool have = false;
    int it = 0;
    if (sys.mode() != PairSystem::Mode::Table && sys.size() <= opt.relax_limit) {
        // eps-smoothed descent of E_eps(phi)/||phi||_{L^1(E)}, warm-started along the schedule
        auto er = detail::inverse_iteration(sys, opt);
        detail::Vec x = er.x;
        SolverOptions o2 = opt;
        o2.max_iter = 300;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            double scale = x.cwiseAbs().maxCoeff();
            auto rr = detail::ratio_descent(sys, Penalty{1, eps * scale}, 1.0, &E, x, o2);
            x = rr.x;
            it += rr.iterations;
        }
        relaxed = x;
        have = true;
    }
    auto r = detail::p1_set_problem(sys, omega.box, none, obj, have ? &relaxed : nullptr, seeds);
    r.iterations += it;
    r.method = "cheeger(smoothed descent + level sets + flips)";
    detail::finish(r, opt);
    return r;
}

}  // namespace frac
