#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "frac/solvers.hpp"

namespace frac {

// Centers live on the half-lattice x = m h / 2. Cell g then sits at half-offset 2g + 1 - m.
struct HalfPoint {
    long m[2] = {0, 0};
    Point at(double h, int dim) const { return {0.5 * h * double(m[0]), dim == 2 ? 0.5 * h * double(m[1]) : 0.0}; }
};

inline HalfPoint snap_half(const Point& x, double h, int dim) {
    HalfPoint q;
    for (int a = 0; a < dim; ++a) {
        double t = 2 * x[std::size_t(a)] / h;
        q.m[a] = std::lround(t);
        if (std::abs(t - double(q.m[a])) > 1e-9 * std::max(1.0, std::abs(t)))
            throw DomainError("ball centers must lie on the half-lattice (cell centers and midpoints)");
    }
    return q;
}

namespace detail {

// Distance from x to the closed cell square of global cell g.
inline double dist_to_cell(const Point& x, const CellIndex& g, double h, int dim) {
    double d2 = 0;
    for (int a = 0; a < dim; ++a) {
        double lo = double(g[std::size_t(a)]) * h, hi = lo + h, xa = x[std::size_t(a)];
        double d = std::max({lo - xa, 0.0, xa - hi});
        d2 += d * d;
    }
    return std::sqrt(d2);
}

// Inactive cells that touch an active one (8-neighbourhood); nearest inactive squares are among them.
inline std::vector<CellIndex> frontier(const LatticeDomain& om) {
    const Box& b = om.box;
    std::vector<CellIndex> out;
    for (std::size_t k = 0; k < b.size(); ++k) {
        if (om.active[k]) continue;
        int i = b.ix(k), j = b.iy(k);
        bool touch = false;
        for (int dj = b.dim == 2 ? -1 : 0; dj <= (b.dim == 2 ? 1 : 0) && !touch; ++dj)
            for (int di = -1; di <= 1 && !touch; ++di) {
                int ii = i + di, jj = j + dj;
                if (ii >= 0 && jj >= 0 && ii < b.n[0] && jj < b.n[1] && om.active[b.index(ii, jj)]) touch = true;
            }
        if (touch) out.push_back(b.global(k));
    }
    return out;
}

inline bool active_global(const LatticeDomain& om, CellIndex g) {
    if (om.box.dim == 1) g[1] = 0;
    return om.box.contains_global(g) && om.active[om.box.local(g)];
}

}  // namespace detail

struct CenterRadius {
    Point center{0, 0};
    double radius = 0;
};

// Distance from x to the complement of omega (union of inactive cell squares).
inline double local_inradius(const LatticeDomain& om, const Point& x) {
    auto fr = detail::frontier(om);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : fr) best = std::min(best, detail::dist_to_cell(x, g, om.box.h, om.box.dim));
    return std::isfinite(best) ? best : 0.0;
}

// Candidate centers with their local inradius, sorted by decreasing inradius then by position.
inline std::vector<std::pair<HalfPoint, double>> ranked_centers(const LatticeDomain& om, int stride = 1, bool midpoints = true) {
    const Box& b = om.box;
    if (om.count() == 0) throw DomainError("empty domain");
    auto fr = detail::frontier(om);
    const long step = (midpoints ? 1 : 2) * std::max(1, stride);
    std::vector<std::pair<HalfPoint, double>> out;
    long y0 = b.dim == 2 ? 2 * b.lo[1] : 0, y1 = b.dim == 2 ? 2 * (b.lo[1] + b.n[1]) : 0;
    long x0 = 2 * b.lo[0], x1 = 2 * (b.lo[0] + b.n[0]);
    long start = midpoints ? 0 : 1;  // odd half-index is a cell center
    for (long my = (b.dim == 2 ? y0 + start : 0); my <= y1; my += (b.dim == 2 ? step : 1)) {
        for (long mx = x0 + start; mx <= x1; mx += step) {
            HalfPoint q;
            q.m[0] = mx;
            q.m[1] = my;
            // every cell whose closed square holds the point must be active
            bool inside = true;
            for (long ey = 0; ey <= (b.dim == 2 && my % 2 == 0 ? 1 : 0) && inside; ++ey)
                for (long ex = 0; ex <= (mx % 2 == 0 ? 1 : 0) && inside; ++ex) {
                    CellIndex g{(mx % 2 == 0 ? mx / 2 - 1 + ex : (mx - 1) / 2), 0};
                    if (b.dim == 2) g[1] = my % 2 == 0 ? my / 2 - 1 + ey : (my - 1) / 2;
                    inside = detail::active_global(om, g);
                }
            if (!inside) continue;
            Point x = q.at(b.h, b.dim);
            double rho = std::numeric_limits<double>::infinity();
            for (const auto& g : fr) rho = std::min(rho, detail::dist_to_cell(x, g, b.h, b.dim));
            if (rho > 0 && std::isfinite(rho)) out.emplace_back(q, rho);
        }
        if (b.dim == 1) break;
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& c) { return a.second > c.second; });
    return out;
}

// r_Omega: largest ball inside omega over half-lattice centers (exact for lattice geometry).
inline double inradius(const LatticeDomain& om) {
    auto c = ranked_centers(om);
    return c.empty() ? 0.0 : c.front().second;
}

inline CenterRadius inradius_witness(const LatticeDomain& om) {
    auto c = ranked_centers(om);
    if (c.empty()) return {};
    return {c.front().first.at(om.box.h, om.box.dim), c.front().second};
}

struct NegligibleResult {
    bool negligible = false;
    double lhs = 0;  // cap(B_r \ Omega; B_2r)
    double rhs = 0;  // gamma cap(B_r; B_2r)
    std::size_t removed_cells = 0;
};

// Negligibility tests for one domain and one parameter set; capacities are cached by the
// lattice-invariant geometry (offset class, radius, removed pattern).
class NegligibilityTester {
public:
    NegligibilityTester(LatticeDomain omega, FracParams prm, bool local = false, SolverOptions opt = {})
        : om_(std::move(omega)), prm_(prm), local_(local), opt_(opt) {}

    std::size_t solves() const { return solves_; }
    std::size_t evaluations() const { return evals_; }
    const LatticeDomain& domain() const { return om_; }
    const FracParams& params() const { return prm_; }

    NegligibleResult test(const Point& x0, double r, double gamma) {
        if (!(gamma > 0 && gamma < 1)) throw DomainError("gamma must lie in (0,1)");
        if (!(r > 0)) throw DomainError("radius must be positive");
        const double h = om_.box.h;
        const int dim = om_.box.dim;
        HalfPoint q = snap_half(x0, h, dim);
        ++evals_;
        Geo& G = geometry(q, r);
        // removed cells of the closed ball, as offsets from the box origin
        std::vector<std::size_t> removed;
        const Box& b = G.env.box;
        for (std::size_t k = 0; k < b.size(); ++k) {
            if (!G.ball[k]) continue;
            CellIndex g = b.global(k);
            if (!detail::active_global(om_, g)) removed.push_back(k);
        }
        NegligibleResult res;
        res.removed_cells = removed.size();
        res.rhs = gamma * full_capacity(G);
        if (removed.empty()) {
            res.lhs = 0;
        } else {
            if (r < 1.5 * h) throw DomainError("radius below lattice resolution (needs r >= 1.5 h)");
            auto key = std::make_tuple(G.key, removed);
            auto it = lhs_cache_.find(key);
            if (it != lhs_cache_.end()) {
                res.lhs = it->second;
            } else {
                Mask sig(b.size(), 0);
                for (auto k : removed) sig[k] = 1;
                res.lhs = solve(G, sig);
                lhs_cache_.emplace(key, res.lhs);
            }
        }
        res.negligible = res.lhs <= res.rhs;
        return res;
    }

private:
    using GeoKey = std::tuple<long, long, double>;  // offset parity per axis, radius
    struct Geo {
        GeoKey key;
        LatticeDomain env;  // B_2r open
        Mask ball;          // closed B_r
        std::shared_ptr<const KernelWeights> kw;
        double cap_full = -1;
    };

    Geo& geometry(const HalfPoint& q, double r) {
        const double h = om_.box.h;
        const int dim = om_.box.dim;
        long par[2] = {((q.m[0] % 2) + 2) % 2, dim == 2 ? ((q.m[1] % 2) + 2) % 2 : 0};
        GeoKey gk{par[0], par[1], r};
        // Cell windows are translation copies for equal keys; only the origin differs.
        const double R2 = 4 * r / h;  // 2r in half units
        const long K = long(std::ceil(R2 / 2)) + 1;
        long c0 = (q.m[0] - par[0]) / 2, c1 = dim == 2 ? (q.m[1] - par[1]) / 2 : 0;
        long pad = std::max<long>(3, long(std::ceil(0.25 * double(2 * K + 1))));
        Box b;
        b.dim = dim;
        b.h = h;
        b.lo = {c0 - K - pad, dim == 2 ? c1 - K - pad : 0};
        b.n = {int(2 * K + 1 + 2 * pad), dim == 2 ? int(2 * K + 1 + 2 * pad) : 1};
        auto it = geo_.find(gk);
        if (it != geo_.end()) {
            it->second.env.box = b;  // relocate the cached window
            return it->second;
        }
        Geo G;
        G.key = gk;
        G.env.box = b;
        G.env.active.assign(b.size(), 0);
        G.ball.assign(b.size(), 0);
        const double rb = 2 * r / h, rb2 = rb * rb, re2 = 4 * rb2;
        for (std::size_t k = 0; k < b.size(); ++k) {
            CellIndex g = b.global(k);
            double dx = double(2 * g[0] + 1 - q.m[0]), dy = dim == 2 ? double(2 * g[1] + 1 - q.m[1]) : 0.0;
            double d2 = dx * dx + dy * dy;
            if (d2 < re2 * (1 - 1e-12)) G.env.active[k] = 1;
            if (d2 <= rb2 * (1 + 1e-12)) G.ball[k] = 1;
        }
        if (!local_) G.kw = std::make_shared<const KernelWeights>(assemble_kernel(b, prm_, opt_.near_band));
        return geo_.emplace(gk, std::move(G)).first->second;
    }

    double solve(const Geo& G, const Mask& sigma) {
        ++solves_;
        detail::check_nested(sigma, G.env.active, G.env.box);
        if (local_) {
            auto sys = PairSystem::local(G.env.box, G.env.active, prm_.p);
            return detail::capacity_on(sys, G.env.box, sigma, prm_.p, opt_).value;
        }
        // the cached kernel was assembled on the first window of this key; weights are translation invariant
        auto sys = PairSystem::nonlocal(G.kw, G.env.active);
        return detail::capacity_on(sys, G.kw->box, sigma, prm_.p, opt_).value;
    }

    double full_capacity(Geo& G) {
        if (G.cap_full < 0) {
            if (G.env.box.h * 1.5 > std::get<2>(G.key)) throw DomainError("radius below lattice resolution (needs r >= 1.5 h)");
            G.cap_full = solve(G, G.ball);
        }
        return G.cap_full;
    }

    LatticeDomain om_;
    FracParams prm_;
    bool local_ = false;
    SolverOptions opt_;
    std::map<GeoKey, Geo> geo_;
    std::map<std::tuple<GeoKey, std::vector<std::size_t>>, double> lhs_cache_;
    std::size_t solves_ = 0, evals_ = 0;
};

inline NegligibleResult negligible(const CenterRadius& ball, const LatticeDomain& omega, const FracParams& prm, double gamma,
                                   const SolverOptions& opt = {}) {
    NegligibilityTester t(omega, prm, false, opt);
    return t.test(ball.center, ball.radius, gamma);
}

struct InradiusConfig {
    int center_stride = 1;
    bool midpoints = true;
    std::size_t max_centers = 64;
    double r_max = 0;  // 0: 1.5 x diameter of the active bounding box
    bool local = false;  // local p-capacity instead of the fractional one
    SolverOptions solver;
};

struct InradiusResult {
    double r_lower = 0;  // certified: witness ball is negligible
    double r_upper = std::numeric_limits<double>::infinity();  // heuristic (radial monotonicity assumed)
    CenterRadius witness;
    std::size_t samples = 0;
    std::size_t centers = 0;
    bool budget_exhausted = false;
    bool upper_is_heuristic = true;
    std::vector<CenterRadius> found;       // every ball that tested negligible
    std::vector<std::size_t> found_removed;  // its number of removed cells
};

inline InradiusResult capacitary_inradius(NegligibilityTester& T, double gamma, const InradiusConfig& cfg = {}) {
    const LatticeDomain& om = T.domain();
    const double h = om.box.h, dr = 0.5 * h;
    const int dim = om.box.dim;
    auto ranked = ranked_centers(om, cfg.center_stride, cfg.midpoints);
    InradiusResult R;
    if (ranked.empty()) throw DomainError("empty domain");
    R.witness = {ranked.front().first.at(h, dim), ranked.front().second};
    R.r_lower = ranked.front().second;
    double r_max = cfg.r_max;
    if (!(r_max > 0)) {
        long lo[2] = {std::numeric_limits<long>::max(), std::numeric_limits<long>::max()}, hi[2] = {0, 0};
        hi[0] = hi[1] = std::numeric_limits<long>::min();
        for (auto k : om.cells()) {
            auto g = om.box.global(k);
            for (int a = 0; a < 2; ++a) {
                lo[a] = std::min(lo[a], g[std::size_t(a)]);
                hi[a] = std::max(hi[a], g[std::size_t(a)]);
            }
        }
        double ex = double(hi[0] - lo[0] + 1) * h, ey = double(hi[1] - lo[1] + 1) * (dim == 2 ? h : 0.0);
        r_max = 1.5 * std::hypot(ex, ey) + 2 * h;
    }
    const std::size_t before = T.evaluations();
    double worst_fail = 0;
    bool all_failed = true;
    auto pass = [&](const Point& x, double r) {
        auto t = T.test(x, r, gamma);
        if (t.negligible) {
            R.found.push_back({x, r});
            R.found_removed.push_back(t.removed_cells);
        }
        return t.negligible;
    };
    std::size_t used = 0;
    for (const auto& [q, rho] : ranked) {
        if (used >= cfg.max_centers) {
            R.budget_exhausted = true;
            break;
        }
        ++used;
        Point x = q.at(h, dim);
        // radii on the h/2 grid, strictly above the current certificate
        long k = std::max<long>(long(std::floor(R.r_lower / dr + 1e-9)) + 1, 3);
        if (!pass(x, k * dr)) {
            worst_fail = std::max(worst_fail, k * dr);
            continue;
        }
        long good = k, step = 1, bad = -1;
        while (true) {
            long kk = good + step;
            if (kk * dr > r_max) break;
            if (pass(x, kk * dr)) {
                good = kk;
                step *= 2;
            } else {
                bad = kk;
                break;
            }
        }
        if (bad < 0) {
            all_failed = false;
        } else {
            while (bad - good > 1) {
                long mid = (good + bad) / 2;
                if (pass(x, mid * dr))
                    good = mid;
                else
                    bad = mid;
            }
            worst_fail = std::max(worst_fail, bad * dr);
        }
        if (good * dr > R.r_lower) {
            R.r_lower = good * dr;
            R.witness = {x, good * dr};
        }
    }
    R.centers = used;
    R.samples = T.evaluations() - before;
    R.r_upper = all_failed ? std::max(worst_fail, R.r_lower) : std::numeric_limits<double>::infinity();
    return R;
}

inline InradiusResult capacitary_inradius(const LatticeDomain& omega, const FracParams& prm, double gamma, const InradiusConfig& cfg = {}) {
    NegligibilityTester T(omega, prm, cfg.local, cfg.solver);
    return capacitary_inradius(T, gamma, cfg);
}

}  // namespace frac
