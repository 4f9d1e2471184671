#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "frac/params.hpp"

namespace frac {

using Point = std::array<double, 2>;
using CellIndex = std::array<long, 2>;
using Mask = std::vector<std::uint8_t>;

// Rectangular window [lo, lo+n) of the global lattice. Cell k has center (k+1/2)h.
struct Box {
    int dim = 1;
    double h = 1.0;
    CellIndex lo{0, 0};
    std::array<int, 2> n{1, 1};

    std::size_t size() const { return std::size_t(n[0]) * std::size_t(n[1]); }
    std::size_t index(int i, int j) const { return std::size_t(i) + std::size_t(n[0]) * std::size_t(j); }
    int ix(std::size_t k) const { return int(k % std::size_t(n[0])); }
    int iy(std::size_t k) const { return int(k / std::size_t(n[0])); }
    CellIndex global(std::size_t k) const { return {lo[0] + ix(k), dim == 2 ? lo[1] + iy(k) : 0}; }
    Point center(std::size_t k) const {
        Point c{(double(lo[0] + ix(k)) + 0.5) * h, 0.0};
        if (dim == 2) c[1] = (double(lo[1] + iy(k)) + 0.5) * h;
        return c;
    }
    Point origin() const { return {double(lo[0]) * h, dim == 2 ? double(lo[1]) * h : 0.0}; }
    bool contains_global(const CellIndex& g) const {
        if (g[0] < lo[0] || g[0] >= lo[0] + n[0]) return false;
        if (dim == 2 && (g[1] < lo[1] || g[1] >= lo[1] + n[1])) return false;
        return true;
    }
    std::size_t local(const CellIndex& g) const {
        return index(int(g[0] - lo[0]), dim == 2 ? int(g[1] - lo[1]) : 0);
    }
    // Same index window on a grid with spacing h*r.
    Box rescaled(double r) const {
        Box b = *this;
        b.h = h * r;
        return b;
    }
    bool same_cells(const Box& o) const { return dim == o.dim && lo == o.lo && n == o.n; }
};

struct LatticeDomain {
    Box box;
    Mask active;

    std::size_t count() const { return std::size_t(std::count(active.begin(), active.end(), std::uint8_t(1))); }
    double measure() const { return double(count()) * std::pow(box.h, box.dim); }
    std::vector<std::size_t> cells() const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < active.size(); ++k)
            if (active[k]) out.push_back(k);
        return out;
    }
    LatticeDomain rescaled(double r) const { return {box.rescaled(r), active}; }
};

struct LatticeFunction {
    Box box;
    std::vector<double> values;

    LatticeFunction() = default;
    explicit LatticeFunction(const Box& b, double fill = 0.0) : box(b), values(b.size(), fill) {}
    LatticeFunction(const Box& b, std::vector<double> v) : box(b), values(std::move(v)) {
        if (values.size() != box.size()) throw DomainError("function size does not match box");
    }
    LatticeFunction rescaled(double r) const { return {box.rescaled(r), values}; }
};

inline LatticeFunction indicator(const LatticeDomain& d) {
    LatticeFunction f(d.box);
    for (std::size_t k = 0; k < d.active.size(); ++k) f.values[k] = d.active[k] ? 1.0 : 0.0;
    return f;
}

// ---------------------------------------------------------------- shapes

struct MaskData {
    int dim = 1;
    double h = 0;
    int nx = 0, ny = 1;
    Mask bits;  // row-major, row j = 0 first
};

struct Shape {
    enum class Kind { Interval, Ball, Annulus, Rect, Slab, Punctured, Mask, Union } kind = Kind::Interval;
    int dim = 1;
    std::vector<double> args;
    bool closed = false;  // Ball only: closed ball |x-c| <= r
    std::vector<Shape> children;
    std::vector<CellIndex> removed;
    std::shared_ptr<const MaskData> mask;

    static Shape interval(double a, double b) {
        if (!(a < b)) throw DomainError("interval needs a < b");
        Shape s;
        s.kind = Kind::Interval;
        s.dim = 1;
        s.args = {a, b};
        return s;
    }
    static Shape ball(const Point& c, double r, int dim, bool closed = false) {
        if (!(r > 0)) throw DomainError("ball radius must be positive");
        Shape s;
        s.kind = Kind::Ball;
        s.dim = dim;
        s.args = {c[0], dim == 2 ? c[1] : 0.0, r};
        s.closed = closed;
        return s;
    }
    static Shape annulus(const Point& c, double r_in, double r_out, int dim) {
        if (!(0 <= r_in && r_in < r_out)) throw DomainError("annulus needs 0 <= r_in < r_out");
        Shape s;
        s.kind = Kind::Annulus;
        s.dim = dim;
        s.args = {c[0], dim == 2 ? c[1] : 0.0, r_in, r_out};
        return s;
    }
    static Shape rect(double x0, double y0, double x1, double y1) {
        if (!(x0 < x1 && y0 < y1)) throw DomainError("rect needs x0 < x1 and y0 < y1");
        Shape s;
        s.kind = Kind::Rect;
        s.dim = 2;
        s.args = {x0, y0, x1, y1};
        return s;
    }
    // (-L,L)^{N-1} x (-w,w); in N = 2 this is (-L,L) x (-w,w).
    static Shape slab(double L, double w, int dim = 2) {
        if (!(L > 0 && w > 0)) throw DomainError("slab needs L > 0 and w > 0");
        Shape s;
        s.kind = Kind::Slab;
        s.dim = dim;
        s.args = {L, w};
        return s;
    }
    static Shape punctured(Shape inner, std::vector<CellIndex> cells) {
        Shape s;
        s.kind = Kind::Punctured;
        s.dim = inner.dim;
        s.children = {std::move(inner)};
        s.removed = std::move(cells);
        return s;
    }
    static Shape from_mask(std::shared_ptr<const MaskData> m) {
        Shape s;
        s.kind = Kind::Mask;
        s.dim = m->dim;
        s.mask = std::move(m);
        return s;
    }
    static Shape unite(std::vector<Shape> parts) {
        if (parts.empty()) throw DomainError("union of nothing");
        Shape s;
        s.kind = Kind::Union;
        s.dim = parts.front().dim;
        for (auto& p : parts)
            if (p.dim != s.dim) throw DomainError("union of shapes with different dimensions");
        s.children = std::move(parts);
        return s;
    }

    bool contains(const Point& x) const {
        switch (kind) {
            case Kind::Interval: return x[0] > args[0] && x[0] < args[1];
            case Kind::Ball: {
                double d2 = sq(x[0] - args[0]) + (dim == 2 ? sq(x[1] - args[1]) : 0.0);
                return closed ? d2 <= args[2] * args[2] : d2 < args[2] * args[2];
            }
            case Kind::Annulus: {
                double d2 = sq(x[0] - args[0]) + (dim == 2 ? sq(x[1] - args[1]) : 0.0);
                return d2 > args[2] * args[2] && d2 < args[3] * args[3];
            }
            case Kind::Rect: return x[0] > args[0] && x[0] < args[2] && x[1] > args[1] && x[1] < args[3];
            case Kind::Slab:
                if (dim == 1) return std::abs(x[0]) < args[1];
                return std::abs(x[0]) < args[0] && std::abs(x[1]) < args[1];
            case Kind::Punctured: return children[0].contains(x);
            case Kind::Mask: {
                long i = long(std::floor(x[0] / mask->h));
                long j = dim == 2 ? long(std::floor(x[1] / mask->h)) : 0;
                if (i < 0 || i >= mask->nx || j < 0 || j >= mask->ny) return false;
                return mask->bits[std::size_t(i) + std::size_t(mask->nx) * std::size_t(j)] != 0;
            }
            case Kind::Union:
                for (const auto& c : children)
                    if (c.contains(x)) return true;
                return false;
        }
        return false;
    }

    // Axis-aligned bounds {xmin, ymin, xmax, ymax}.
    std::array<double, 4> bounds() const {
        switch (kind) {
            case Kind::Interval: return {args[0], 0, args[1], 0};
            case Kind::Ball: return {args[0] - args[2], args[1] - args[2], args[0] + args[2], args[1] + args[2]};
            case Kind::Annulus: return {args[0] - args[3], args[1] - args[3], args[0] + args[3], args[1] + args[3]};
            case Kind::Rect: return {args[0], args[1], args[2], args[3]};
            case Kind::Slab:
                if (dim == 1) return {-args[1], 0, args[1], 0};
                return {-args[0], -args[1], args[0], args[1]};
            case Kind::Punctured: return children[0].bounds();
            case Kind::Mask: return {0, 0, mask->nx * mask->h, mask->ny * mask->h};
            case Kind::Union: {
                auto b = children[0].bounds();
                for (const auto& c : children) {
                    auto cb = c.bounds();
                    b = {std::min(b[0], cb[0]), std::min(b[1], cb[1]), std::max(b[2], cb[2]), std::max(b[3], cb[3])};
                }
                return b;
            }
        }
        return {0, 0, 0, 0};
    }

    // Cells removed after rasterization (punctures, possibly nested).
    void collect_removed(std::vector<CellIndex>& out) const {
        if (kind == Kind::Punctured) {
            out.insert(out.end(), removed.begin(), removed.end());
            children[0].collect_removed(out);
        }
    }

private:
    static double sq(double v) { return v * v; }
};

// Active mask of a shape over an existing box (cells outside the box are dropped).
inline Mask rasterize(const Shape& shape, const Box& box) {
    if (shape.dim != box.dim) throw DomainError("shape and box dimensions differ");
    Mask m(box.size(), 0);
    for (std::size_t k = 0; k < box.size(); ++k) m[k] = shape.contains(box.center(k)) ? 1 : 0;
    std::vector<CellIndex> rem;
    shape.collect_removed(rem);
    for (auto g : rem) {
        if (box.dim == 1) g[1] = 0;
        if (box.contains_global(g)) m[box.local(g)] = 0;
    }
    return m;
}

struct DomainOptions {
    int min_padding = 3;
    // Extra padding as a fraction of the largest active extent; keeps the tail term in its
    // asymptotic regime so refinement converges at a physical rate.
    double padding_fraction = 0.25;
    bool check_resolution = true;
};

// Re-embed a set of active global cells in a padded box.
inline LatticeDomain embed_cells(int dim, double h, const std::vector<CellIndex>& cells, const DomainOptions& opt = {}) {
    if (cells.empty()) throw DomainError("empty shape: no active cell");
    CellIndex lo = cells.front(), hi = cells.front();
    for (const auto& c : cells)
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    long ext = hi[0] - lo[0] + 1;
    if (dim == 2) ext = std::max(ext, hi[1] - lo[1] + 1);
    if (opt.check_resolution) {
        for (int a = 0; a < dim; ++a)
            if (hi[a] - lo[a] + 1 < 3) throw DomainError("spacing too coarse: fewer than 3 active cells per axis");
    }
    long pad = std::max<long>(opt.min_padding, long(std::ceil(opt.padding_fraction * double(ext))));
    pad = std::max<long>(pad, 1);
    Box b;
    b.dim = dim;
    b.h = h;
    b.lo = {lo[0] - pad, dim == 2 ? lo[1] - pad : 0};
    b.n = {int(hi[0] - lo[0] + 1 + 2 * pad), dim == 2 ? int(hi[1] - lo[1] + 1 + 2 * pad) : 1};
    LatticeDomain d{b, Mask(b.size(), 0)};
    for (auto c : cells) {
        if (dim == 1) c[1] = 0;
        d.active[b.local(c)] = 1;
    }
    return d;
}

inline LatticeDomain build_domain(const Shape& shape, double h, const DomainOptions& opt = {}) {
    if (!(h > 0)) throw DomainError("spacing must be positive");
    if (shape.kind == Shape::Kind::Mask && std::abs(shape.mask->h - h) > 1e-12 * h)
        throw DomainError("mask spacing differs from requested h");
    auto bd = shape.bounds();
    Box scan;
    scan.dim = shape.dim;
    scan.h = h;
    long i0 = long(std::floor(bd[0] / h)) - 1, i1 = long(std::ceil(bd[2] / h)) + 1;
    long j0 = 0, j1 = 0;
    if (shape.dim == 2) {
        j0 = long(std::floor(bd[1] / h)) - 1;
        j1 = long(std::ceil(bd[3] / h)) + 1;
    }
    scan.lo = {i0, j0};
    scan.n = {int(i1 - i0 + 1), int(j1 - j0 + 1)};
    Mask m = rasterize(shape, scan);
    std::vector<CellIndex> cells;
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m[k]) cells.push_back(scan.global(k));
    return embed_cells(shape.dim, h, cells, opt);
}

// Cells of `shape` inside `box`, as a domain sharing that box.
inline LatticeDomain domain_in_box(const Shape& shape, const Box& box) { return {box, rasterize(shape, box)}; }

// ---------------------------------------------------------------- FRACMASK v1

inline MaskData parse_mask(std::istream& in) {
    auto fail = [](const std::string& why) -> MaskData { throw ParseError("FRACMASK: " + why); };
    std::string line;
    if (!std::getline(in, line) || line != "FRACMASK v1") return fail("bad header line");
    if (!std::getline(in, line)) return fail("missing size line");
    std::istringstream hs(line);
    std::vector<std::string> tok;
    for (std::string t; hs >> t;) tok.push_back(t);
    for (char c : line)
        if (c != ' ' && !std::isgraph(static_cast<unsigned char>(c))) return fail("bad character in size line");
    MaskData md;
    auto to_int = [&](const std::string& t) {
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(t, &pos);
        } catch (...) {
            fail("bad integer '" + t + "'");
        }
        if (pos != t.size() || v <= 0 || v > 100000) fail("bad integer '" + t + "'");
        return int(v);
    };
    if (tok.size() < 3) return fail("size line needs 'N h nx [ny]'");
    md.dim = to_int(tok[0]);
    if (md.dim != 1 && md.dim != 2) return fail("N must be 1 or 2");
    if (tok.size() != std::size_t(md.dim == 1 ? 3 : 4)) return fail("size line has wrong token count");
    try {
        std::size_t pos = 0;
        md.h = std::stod(tok[1], &pos);
        if (pos != tok[1].size()) throw 0;
    } catch (...) {
        return fail("bad spacing");
    }
    if (!(md.h > 0) || !std::isfinite(md.h)) return fail("spacing must be positive");
    md.nx = to_int(tok[2]);
    md.ny = md.dim == 2 ? to_int(tok[3]) : 1;
    md.bits.reserve(std::size_t(md.nx) * std::size_t(md.ny));
    for (int j = 0; j < md.ny; ++j) {
        if (!std::getline(in, line)) return fail("missing row");
        if (line.size() != std::size_t(md.nx)) return fail("row length mismatch");
        for (char c : line) {
            if (c != '0' && c != '1') return fail("row characters must be 0 or 1");
            md.bits.push_back(c == '1' ? 1 : 0);
        }
    }
    while (std::getline(in, line))
        if (!line.empty()) return fail("trailing content after rows");
    return md;
}

inline MaskData load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mask file " + path);
    return parse_mask(in);
}

// Writes the active cells of a domain relative to the box origin.
inline void write_mask(std::ostream& out, const LatticeDomain& d) {
    out << "FRACMASK v1\n" << d.box.dim << ' ';
    std::ostringstream hs;
    hs.precision(17);
    hs << d.box.h;
    out << hs.str() << ' ' << d.box.n[0];
    if (d.box.dim == 2) out << ' ' << d.box.n[1];
    out << '\n';
    for (int j = 0; j < d.box.n[1]; ++j) {
        for (int i = 0; i < d.box.n[0]; ++i) out << (d.active[d.box.index(i, j)] ? '1' : '0');
        out << '\n';
    }
}

}  // namespace frac
