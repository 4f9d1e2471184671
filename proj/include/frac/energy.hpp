#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "frac/kernel.hpp"
#include "frac/lattice.hpp"
#include "frac/params.hpp"

namespace frac {

struct EnergyValue {
    double value = 0;
    double interior = 0;  // pairs of box cells
    double tail = 0;      // exterior of the box
};

// Largest support for which pair weights are cached in a dense matrix.
inline constexpr std::size_t kDenseLimit = 3500;

// Energy  E(x) = sum_{a != b} w_ab |x_a - x_b|^p + 2 sum_a (ext_a + tau_a) |x_a|^p
// of a function supported on n cells; ext collects pairs with the zero region inside the box.
class PairSystem {
public:
    enum class Mode { Dense, Table, Sparse };

    int dim = 1;
    double h = 1;
    std::vector<std::size_t> idx;  // box index of each unknown
    std::vector<double> ext;       // pairs with zero cells inside the box
    std::vector<double> tau;       // exterior of the box

    std::size_t size() const { return idx.size(); }
    Mode mode() const { return mode_; }
    double cell_volume() const { return std::pow(h, dim); }
    double boundary(std::size_t a) const { return ext[a] + tau[a]; }

    double w(std::size_t a, std::size_t b) const {
        if (mode_ == Mode::Dense) return W_(Eigen::Index(a), Eigen::Index(b));
        if (mode_ == Mode::Table) return kw_->weight(idx[a], idx[b]);
        for (std::size_t k = rowptr_[a]; k < rowptr_[a + 1]; ++k)
            if (nbr_[k] == b) return wt_[k];
        return 0;
    }

    // Calls f(b, w_ab) for every b != a with w_ab != 0, in increasing b order.
    template <class F>
    void row(std::size_t a, F&& f) const {
        const std::size_t n = idx.size();
        if (mode_ == Mode::Dense) {
            const double* col = W_.data() + a * n;  // symmetric: column a == row a
            for (std::size_t b = 0; b < n; ++b)
                if (b != a) f(b, col[b]);
        } else if (mode_ == Mode::Table) {
            const Box& bx = kw_->box;
            int ia = bx.ix(idx[a]), ja = bx.iy(idx[a]);
            for (std::size_t b = 0; b < n; ++b)
                if (b != a) f(b, kw_->scale * kw_->unit(ia - bx.ix(idx[b]), ja - bx.iy(idx[b])));
        } else {
            for (std::size_t k = rowptr_[a]; k < rowptr_[a + 1]; ++k) f(nbr_[k], wt_[k]);
        }
    }

    // Nonlocal system on the support mask (cells allowed to be nonzero).
    static PairSystem nonlocal(std::shared_ptr<const KernelWeights> kw, const Mask& support) {
        const Box& bx = kw->box;
        if (support.size() != bx.size()) throw DomainError("support mask does not match kernel box");
        PairSystem ps;
        ps.dim = bx.dim;
        ps.h = bx.h;
        for (std::size_t k = 0; k < support.size(); ++k)
            if (support[k]) ps.idx.push_back(k);
        const std::size_t n = ps.idx.size();
        std::vector<std::size_t> outside;
        for (std::size_t k = 0; k < support.size(); ++k)
            if (!support[k]) outside.push_back(k);
        ps.ext.assign(n, 0.0);
        ps.tau.assign(n, 0.0);
        std::vector<double> buf(outside.size());
        for (std::size_t a = 0; a < n; ++a) {
            std::size_t ka = ps.idx[a];
            for (std::size_t t = 0; t < outside.size(); ++t) buf[t] = kw->weight(ka, outside[t]);
            ps.ext[a] = pairwise_sum(buf);
            ps.tau[a] = kw->tail[ka];
        }
        ps.kw_ = kw;
        if (n <= kDenseLimit) {
            ps.mode_ = Mode::Dense;
            ps.W_.setZero(Eigen::Index(n), Eigen::Index(n));
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    if (a != b) ps.W_(Eigen::Index(a), Eigen::Index(b)) = kw->weight(ps.idx[a], ps.idx[b]);
        } else {
            ps.mode_ = Mode::Table;
        }
        return ps;
    }

    static PairSystem nonlocal(const KernelWeights& kw, const Mask& support) {
        return nonlocal(std::make_shared<const KernelWeights>(kw), support);
    }

    // Local Dirichlet energy sum_edges h^{N-p} |u_i - u_j|^p on the nearest-neighbour stencil.
    static PairSystem local(const Box& bx, const Mask& support, double p) {
        if (support.size() != bx.size()) throw DomainError("support mask does not match box");
        PairSystem ps;
        ps.dim = bx.dim;
        ps.h = bx.h;
        ps.mode_ = Mode::Sparse;
        std::vector<long> pos(bx.size(), -1);
        for (std::size_t k = 0; k < support.size(); ++k)
            if (support[k]) {
                pos[k] = long(ps.idx.size());
                ps.idx.push_back(k);
            }
        const double c = std::pow(bx.h, bx.dim - p);
        const std::size_t n = ps.idx.size();
        ps.ext.assign(n, 0.0);
        ps.tau.assign(n, 0.0);
        ps.rowptr_.assign(n + 1, 0);
        for (std::size_t a = 0; a < n; ++a) {
            int i = bx.ix(ps.idx[a]), j = bx.iy(ps.idx[a]);
            const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
            for (int t = 0; t < 2 * bx.dim; ++t) {
                int ii = i + di[t], jj = j + dj[t];
                long other = -1;
                if (ii >= 0 && ii < bx.n[0] && jj >= 0 && jj < bx.n[1]) other = pos[bx.index(ii, jj)];
                if (other >= 0) {
                    ps.nbr_.push_back(std::size_t(other));
                    ps.wt_.push_back(0.5 * c);
                } else {
                    ps.ext[a] += 0.5 * c;
                }
            }
            ps.rowptr_[a + 1] = ps.nbr_.size();
            // keep neighbour order increasing for deterministic sums
            std::vector<std::pair<std::size_t, double>> tmp;
            for (std::size_t k = ps.rowptr_[a]; k < ps.rowptr_[a + 1]; ++k) tmp.emplace_back(ps.nbr_[k], ps.wt_[k]);
            std::sort(tmp.begin(), tmp.end());
            for (std::size_t k = 0; k < tmp.size(); ++k) {
                ps.nbr_[ps.rowptr_[a] + k] = tmp[k].first;
                ps.wt_[ps.rowptr_[a] + k] = tmp[k].second;
            }
        }
        return ps;
    }

    // Matrix L with E(x) = x^T L x when p = 2.
    Eigen::MatrixXd quadratic_form() const {
        const std::size_t n = size();
        if (n > 6000) throw DomainError("support too large for a dense quadratic form");
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
        for (std::size_t a = 0; a < n; ++a) {
            double diag = 0;
            row(a, [&](std::size_t b, double wab) {
                L(Eigen::Index(a), Eigen::Index(b)) = -2 * wab;
                diag += wab;
            });
            L(Eigen::Index(a), Eigen::Index(a)) = 2 * (diag + boundary(a));
        }
        return L;
    }

    std::vector<double> row_sums() const {
        std::vector<double> r(size(), 0.0);
        for (std::size_t a = 0; a < size(); ++a) row(a, [&](std::size_t, double wab) { r[a] += wab; });
        return r;
    }

private:
    Mode mode_ = Mode::Dense;
    std::shared_ptr<const KernelWeights> kw_;
    Eigen::MatrixXd W_;
    std::vector<std::size_t> rowptr_, nbr_;
    std::vector<double> wt_;
};

// phi(t) = |t|^p, or sqrt(t^2+eps^2) - eps when p = 1 and eps > 0.
struct Penalty {
    double p = 2, eps = 0;
    double operator()(double t) const {
        if (p == 1) return eps > 0 ? std::sqrt(t * t + eps * eps) - eps : std::abs(t);
        if (p == 2) return t * t;
        return std::pow(std::abs(t), p);
    }
    double d1(double t) const {
        if (p == 1) return eps > 0 ? t / std::sqrt(t * t + eps * eps) : (t > 0) - (t < 0);
        if (p == 2) return 2 * t;
        return p * std::pow(std::abs(t), p - 1) * ((t > 0) - (t < 0));
    }
    // Second derivative, regularised by delta where it blows up (p < 2).
    double d2(double t, double delta) const {
        if (p == 1) {
            double e = std::max(eps, delta);
            return e * e / std::pow(t * t + e * e, 1.5);
        }
        if (p == 2) return 2;
        return p * (p - 1) * std::pow(t * t + delta * delta, 0.5 * (p - 2));
    }
};

inline EnergyValue energy(const PairSystem& sys, const Eigen::VectorXd& x, Penalty pen) {
    const std::size_t n = sys.size();
    std::vector<double> rows(n), ext(n), tl(n);
    for (std::size_t a = 0; a < n; ++a) {
        double acc = 0, xa = x[Eigen::Index(a)];
        sys.row(a, [&](std::size_t b, double wab) { acc += wab * pen(xa - x[Eigen::Index(b)]); });
        rows[a] = acc;
        double fa = pen(xa);
        ext[a] = 2 * sys.ext[a] * fa;
        tl[a] = 2 * sys.tau[a] * fa;
    }
    EnergyValue ev;
    ev.interior = pairwise_sum(rows) + pairwise_sum(ext);
    ev.tail = pairwise_sum(tl);
    ev.value = ev.interior + ev.tail;
    return ev;
}

inline Eigen::VectorXd energy_gradient(const PairSystem& sys, const Eigen::VectorXd& x, Penalty pen) {
    const std::size_t n = sys.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(Eigen::Index(n));
    for (std::size_t a = 0; a < n; ++a) {
        double acc = 0, xa = x[Eigen::Index(a)];
        sys.row(a, [&](std::size_t b, double wab) { acc += wab * pen.d1(xa - x[Eigen::Index(b)]); });
        g[Eigen::Index(a)] = 2 * acc + 2 * sys.boundary(a) * pen.d1(xa);
    }
    return g;
}

// Dense Hessian of the energy (regularised for p < 2).
inline Eigen::MatrixXd energy_hessian(const PairSystem& sys, const Eigen::VectorXd& x, Penalty pen, double delta) {
    const std::size_t n = sys.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t a = 0; a < n; ++a) {
        double diag = 0, xa = x[Eigen::Index(a)];
        sys.row(a, [&](std::size_t b, double wab) {
            double c = 2 * wab * pen.d2(xa - x[Eigen::Index(b)], delta);
            H(Eigen::Index(a), Eigen::Index(b)) = -c;
            diag += c;
        });
        H(Eigen::Index(a), Eigen::Index(a)) = diag + 2 * sys.boundary(a) * pen.d2(xa, delta);
    }
    return H;
}

// ---------------------------------------------------------------- public functionals

inline Mask support_of(const LatticeFunction& u) {
    Mask m(u.values.size(), 0);
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (!std::isfinite(u.values[k])) throw DomainError("function values must be finite");
        m[k] = u.values[k] != 0.0;
    }
    return m;
}

inline Eigen::VectorXd gather(const PairSystem& sys, const LatticeFunction& u) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(Eigen::Index(sys.size()));
    for (std::size_t a = 0; a < sys.size(); ++a) x[Eigen::Index(a)] = u.values[sys.idx[a]];
    return x;
}

inline LatticeFunction scatter(const PairSystem& sys, const Box& box, const Eigen::VectorXd& x) {
    LatticeFunction u(box);
    for (std::size_t a = 0; a < sys.size(); ++a) u.values[sys.idx[a]] = x[Eigen::Index(a)];
    return u;
}

inline EnergyValue gagliardo_p(const LatticeFunction& u, const KernelWeights& kw, double p) {
    if (!u.box.same_cells(kw.box) || u.box.h != kw.box.h) throw DomainError("domain/kernel mismatch");
    auto sys = PairSystem::nonlocal(std::make_shared<const KernelWeights>(kw), support_of(u));
    if (sys.size() == 0) return {};
    return energy(sys, gather(sys, u), Penalty{p, 0});
}

inline EnergyValue gagliardo_p(const LatticeFunction& u, const FracParams& prm, int near_band = 2) {
    return gagliardo_p(u, assemble_kernel(u.box, prm, near_band), prm.p);
}

// Cells of the box whose centers lie in the open ball B_r(c).
inline Mask ball_cells(const Box& box, const Point& c, double r, bool closed = false) {
    return rasterize(Shape::ball(c, r, box.dim, closed), box);
}

// Discrete  int_{B_r(c)} int_{R^N} |u(x)-u(y)|^p k(x,y) dy dx; x ranges over box cells in the ball.
inline EnergyValue strip_seminorm_p(const LatticeFunction& u, const Point& c, double r, const KernelWeights& kw, double p) {
    if (!u.box.same_cells(kw.box)) throw DomainError("domain/kernel mismatch");
    Mask ball = ball_cells(u.box, c, r);
    Mask supp = support_of(u);
    bool any = false;
    for (std::size_t k = 0; k < ball.size(); ++k) any = any || ball[k];
    if (!any) throw DomainError("ball contains no lattice cell");
    Penalty pen{p, 0};
    std::vector<std::size_t> S;
    for (std::size_t k = 0; k < supp.size(); ++k)
        if (supp[k]) S.push_back(k);
    std::vector<double> inner, tl;
    for (std::size_t i = 0; i < ball.size(); ++i) {
        if (!ball[i]) continue;
        double ui = u.values[i];
        if (supp[i]) {
            // all box partners: zero cells contribute |u_i|^p
            double acc = 0;
            for (std::size_t j = 0; j < u.values.size(); ++j)
                if (j != i) acc += kw.weight(i, j) * pen(ui - u.values[j]);
            inner.push_back(acc);
            tl.push_back(kw.tail[i] * pen(ui));
        } else {
            double acc = 0;
            for (std::size_t j : S) acc += kw.weight(i, j) * pen(u.values[j]);
            inner.push_back(acc);
        }
    }
    EnergyValue ev;
    ev.interior = pairwise_sum(inner);
    ev.tail = pairwise_sum(tl);
    ev.value = ev.interior + ev.tail;
    return ev;
}

inline double frac_perimeter(const LatticeDomain& A, const KernelWeights& kw) {
    if (!A.box.same_cells(kw.box)) throw DomainError("domain/kernel mismatch");
    std::vector<double> rows;
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < A.active.size(); ++k)
        if (!A.active[k]) out.push_back(k);
    std::vector<double> buf(out.size());
    for (std::size_t i = 0; i < A.active.size(); ++i) {
        if (!A.active[i]) continue;
        for (std::size_t t = 0; t < out.size(); ++t) buf[t] = kw.weight(i, out[t]);
        rows.push_back(2 * (pairwise_sum(buf) + kw.tail[i]));
    }
    return pairwise_sum(rows);
}

inline KernelWeights perimeter_kernel(const Box& box, double s, int near_band = 2) {
    return assemble_kernel(box, FracParams(box.dim, s, 1.0, 1.0), near_band);
}

inline double frac_perimeter(const LatticeDomain& A, double s, int near_band = 2) {
    return frac_perimeter(A, perimeter_kernel(A.box, s, near_band));
}

inline double lq_norm(const LatticeFunction& u, double q, const Mask& region) {
    if (region.size() != u.values.size()) throw DomainError("region does not match box");
    std::vector<double> t;
    for (std::size_t k = 0; k < region.size(); ++k)
        if (region[k]) t.push_back(std::pow(std::abs(u.values[k]), q));
    if (t.empty()) throw DomainError("empty region");
    return std::pow(std::pow(u.box.h, u.box.dim) * pairwise_sum(t), 1.0 / q);
}

inline double average(const LatticeFunction& u, const Mask& region) {
    if (region.size() != u.values.size()) throw DomainError("region does not match box");
    std::vector<double> t;
    for (std::size_t k = 0; k < region.size(); ++k)
        if (region[k]) t.push_back(u.values[k]);
    if (t.empty()) throw DomainError("empty region");
    return pairwise_sum(t) / double(t.size());
}

inline double mask_measure(const Mask& m, const Box& box) {
    return double(std::count(m.begin(), m.end(), std::uint8_t(1))) * std::pow(box.h, box.dim);
}

}  // namespace frac
