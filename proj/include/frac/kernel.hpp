#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "frac/lattice.hpp"
#include "frac/params.hpp"

namespace frac {

namespace quad {

struct Rule {
    std::vector<double> x, w;  // nodes and weights on [0,1]
};

// Gauss-Legendre rule on [0,1] (Newton on the Legendre recurrence).
inline Rule gauss_legendre(int n) {
    Rule r;
    r.x.resize(std::size_t(n));
    r.w.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[std::size_t(i)] = 0.5 * (1 - z);
        r.w[std::size_t(i)] = 1.0 / ((1 - z * z) * dp * dp);
    }
    return r;
}

inline const Rule& gl(int n) {
    static const Rule r4 = gauss_legendre(4), r16 = gauss_legendre(16), r24 = gauss_legendre(24);
    if (n == 4) return r4;
    if (n == 16) return r16;
    return r24;
}

}  // namespace quad

namespace detail {

inline double tent(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

// Second antiderivative of |x|^b (b > -2, b != -1).
inline double F2(double x, double b) { return std::pow(std::abs(x), b + 2) / ((b + 1) * (b + 2)); }

// int_R |z|^b (1-|z-d|)_+ dz  for integer d.
inline double moment_1d(long d, double b) {
    double ad = double(std::labs(d));
    if (ad > 50) {
        double b2 = b * (b - 1), d2 = 1.0 / (ad * ad);
        return std::pow(ad, b) * (1 + b2 / 12 * d2 + b2 * (b - 2) * (b - 3) / 360 * d2 * d2);
    }
    return F2(ad + 1, b) - 2 * F2(ad, b) + F2(ad - 1, b);
}

// int over the unit square with lower-left integer corner (x0,y0) of |z|^b T(z1-d1) T(z2-d2).
inline double square_moment(long x0, long y0, long d1, long d2, double b) {
    auto g = [&](double z1, double z2) { return tent(z1 - double(d1)) * tent(z2 - double(d2)); };
    bool corner = (x0 == 0 || x0 == -1) && (y0 == 0 || y0 == -1);
    if (corner) {
        // Origin is a corner: Duffy split, radial integral in closed form.
        double s1 = x0 == 0 ? 1.0 : -1.0, s2 = y0 == 0 ? 1.0 : -1.0;
        double c00 = g(0, 0), c10 = g(s1, 0), c01 = g(0, s2), c11 = g(s1, s2);
        double g00 = c00, g10 = c10 - c00, g01 = c01 - c00, g11 = c11 - c10 - c01 + c00;
        const auto& r = quad::gl(24);
        double acc = 0;
        for (std::size_t k = 0; k < r.x.size(); ++k) {
            double v = r.x[k];
            double rad = std::pow(1 + v * v, 0.5 * b);
            double t1 = g00 / (b + 2) + (g10 + v * g01) / (b + 3) + v * g11 / (b + 4);
            double t2 = g00 / (b + 2) + (v * g10 + g01) / (b + 3) + v * g11 / (b + 4);
            acc += r.w[k] * rad * (t1 + t2);
        }
        return acc;
    }
    const auto& r = quad::gl(24);
    double acc = 0;
    for (std::size_t a = 0; a < r.x.size(); ++a)
        for (std::size_t c = 0; c < r.x.size(); ++c) {
            double z1 = double(x0) + r.x[a], z2 = double(y0) + r.x[c];
            acc += r.w[a] * r.w[c] * std::pow(z1 * z1 + z2 * z2, 0.5 * b) * g(z1, z2);
        }
    return acc;
}

inline double moment_2d(long d1, long d2, double b) {
    double acc = 0;
    for (long x0 = d1 - 1; x0 <= d1; ++x0)
        for (long y0 = d2 - 1; y0 <= d2; ++y0) acc += square_moment(x0, y0, d1, d2, b);
    return acc;
}

}  // namespace detail

// int_{R^N} |z|^b prod_k (1-|z_k-d_k|)_+ dz, i.e. int over cell_0 x cell_d of |x-y|^b (unit cells).
inline double cell_pair_moment(int dim, long d1, long d2, double b) {
    return dim == 1 ? detail::moment_1d(d1, b) : detail::moment_2d(d1, d2, b);
}

// Tensor 4-point Gauss on cell_0 x cell_d of |x-y|^b (unit cells); used only in tests.
inline double cell_pair_gauss4(int dim, long d1, long d2, double b) {
    const auto& r = quad::gl(4);
    double acc = 0;
    if (dim == 1) {
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                acc += r.w[i] * r.w[j] * std::pow(std::abs(double(d1) + r.x[j] - r.x[i]), b);
        return acc;
    }
    for (std::size_t i1 = 0; i1 < 4; ++i1)
        for (std::size_t i2 = 0; i2 < 4; ++i2)
            for (std::size_t j1 = 0; j1 < 4; ++j1)
                for (std::size_t j2 = 0; j2 < 4; ++j2) {
                    double z1 = double(d1) + r.x[j1] - r.x[i1], z2 = double(d2) + r.x[j2] - r.x[i2];
                    acc += r.w[i1] * r.w[i2] * r.w[j1] * r.w[j2] * std::pow(z1 * z1 + z2 * z2, 0.5 * b);
                }
    return acc;
}

// Near-pair rule. CellPair: exact cell-pair integral of the kernel (finite iff sp < 1).
// MomentMatched: weight reproducing the exact energy of affine functions (used when sp >= 1).
enum class Scheme { CellPair, MomentMatched };

struct KernelWeights {
    Box box;
    double s = 0.5, p = 2.0;
    int near_band = 2;
    Scheme scheme = Scheme::CellPair;
    double exponent = 0;  // N + sp
    double scale = 1;     // h^{N-sp}
    std::vector<double> table;  // unit-spacing weight by (|di|, |dj|), table[0] unused
    std::vector<double> tail;   // tau_i per box cell

    int dim() const { return box.dim; }
    double unit(int di, int dj) const { return table[std::size_t(std::abs(di)) + std::size_t(box.n[0]) * std::size_t(std::abs(dj))]; }
    double weight(std::size_t a, std::size_t b) const {
        return scale * unit(box.ix(a) - box.ix(b), box.iy(a) - box.iy(b));
    }
};

// Exterior integral I(x) = int_{R^N \ box} |x-y|^{-(N+sp)} dy, split as the closed form outside the
// largest inscribed ball minus a numerically integrated ring.
inline double tail_integral(const Point& x, const Box& box, double sp) {
    Point o = box.origin();
    double X0 = o[0], X1 = o[0] + box.n[0] * box.h;
    double dl = x[0] - X0, dr = X1 - x[0];
    if (!(dl > 0 && dr > 0)) throw DomainError("tail node on or outside box boundary");
    if (box.dim == 1) {
        double rho = std::min(dl, dr), far = std::max(dl, dr);
        // ball part 2/sp rho^{-sp}; ring is the half-line segment between rho and far
        return (2.0 / sp) * std::pow(rho, -sp) - (std::pow(rho, -sp) - std::pow(far, -sp)) / sp;
    }
    double Y0 = o[1], Y1 = o[1] + box.n[1] * box.h;
    double db = x[1] - Y0, dt = Y1 - x[1];
    if (!(db > 0 && dt > 0)) throw DomainError("tail node on or outside box boundary");
    double rho = std::min(std::min(dl, dr), std::min(db, dt));
    // Polar form: I = (1/sp) int_0^{2pi} rho_box(theta)^{-sp} dtheta. For a wall at distance d with
    // the ray angle phi measured from the wall normal, rho_box = d / cos(phi).
    const auto& r = quad::gl(16);
    auto ring_piece = [&](double d, double phimax) {
        // int_0^phimax (rho^{-sp} - (d/cos phi)^{-sp}) dphi on two panels
        double acc = 0;
        double split[3] = {0, 0.5 * phimax, phimax};
        for (int pnl = 0; pnl < 2; ++pnl) {
            double a = split[pnl], len = split[pnl + 1] - split[pnl];
            for (std::size_t k = 0; k < r.x.size(); ++k) {
                double phi = a + len * r.x[k];
                acc += r.w[k] * len * (std::pow(rho, -sp) - std::pow(d / std::cos(phi), -sp));
            }
        }
        return acc;
    };
    double walls[4][3] = {{dr, db, dt}, {dl, db, dt}, {dt, dl, dr}, {db, dl, dr}};
    double ring = 0;
    for (auto& w : walls) {
        ring += ring_piece(w[0], std::atan2(w[1], w[0]));
        ring += ring_piece(w[0], std::atan2(w[2], w[0]));
    }
    return (2.0 * std::numbers::pi / sp) * std::pow(rho, -sp) - ring / sp;
}

inline double tail_weight(const Point& node, const Box& box, const FracParams& prm) {
    return std::pow(box.h, box.dim) * tail_integral(node, box, prm.sp());
}

inline KernelWeights assemble_kernel(const Box& box, const FracParams& prm, int near_band = 2, int threads = 1) {
    if (near_band < 1) throw DomainError("near_band must be >= 1");
    if (prm.dim != box.dim) throw DomainError("params and box dimensions differ");
    KernelWeights kw;
    kw.box = box;
    kw.s = prm.s;
    kw.p = prm.p;
    kw.near_band = near_band;
    const int N = box.dim;
    const double sp = prm.sp(), a = N + sp;
    kw.exponent = a;
    kw.scale = std::pow(box.h, N - sp);
    kw.scheme = sp < 1 ? Scheme::CellPair : Scheme::MomentMatched;
    const int nx = box.n[0], ny = box.n[1];
    kw.table.assign(std::size_t(nx) * std::size_t(ny), 0.0);
    kw.tail.assign(box.size(), 0.0);

    double self_share = 0;
    if (kw.scheme == Scheme::MomentMatched) self_share = cell_pair_moment(N, 0, 0, prm.p - a) / (2.0 * N);

    auto unit_weight = [&](int di, int dj) -> double {
        bool near = std::max(di, dj) <= near_band;
        double dist2 = double(di) * di + double(dj) * dj;
        if (kw.scheme == Scheme::CellPair) {
            // 1D closed form is cheap and exact for every offset.
            if (N == 1 || near) return cell_pair_moment(N, di, dj, -a);
        } else if (near) {
            double w = cell_pair_moment(N, di, dj, prm.p - a) / std::pow(dist2, 0.5 * prm.p);
            if (di + dj == 1) w += self_share;
            return w;
        }
        return std::pow(dist2, -0.5 * a);
    };

    auto work = [&](int t, int T) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                std::size_t k = std::size_t(i) + std::size_t(nx) * std::size_t(j);
                if (int(k % std::size_t(T)) != t) continue;
                if (i != 0 || j != 0) kw.table[k] = unit_weight(i, j);
                kw.tail[k] = tail_weight(box.center(k), box, prm);
            }
        }
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    return kw;
}

}  // namespace frac
