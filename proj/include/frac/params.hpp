#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace frac {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Bad argument or out-of-domain request.
struct DomainError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    using Error::Error;
};

// Volume of the unit ball in R^n. omega(0) = 1.
inline double omega(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

// Sobolev exponent p*_s = Np/(N-sp) (infinite when sp >= N).
inline double sobolev_exponent(int dim, double s, double p) {
    double d = dim - s * p;
    if (d <= 0) return std::numeric_limits<double>::infinity();
    return dim * p / d;
}

struct FracParams {
    int dim = 1;
    double s = 0.5;
    double p = 2.0;
    double q = 2.0;
    std::optional<double> gamma;
    bool allow_supercritical = false;

    FracParams() = default;
    FracParams(int dim_, double s_, double p_, double q_, std::optional<double> gamma_ = std::nullopt,
               bool allow_supercritical_ = false)
        : dim(dim_), s(s_), p(p_), q(q_), gamma(gamma_), allow_supercritical(allow_supercritical_) {
        validate();
    }

    double sp() const { return s * p; }
    // Exponent of the kernel |x-y|^{-(N+sp)}.
    double exponent() const { return dim + s * p; }
    // Scaling exponent of lambda: lambda(B_r) = lambda(B_1) r^{-alpha}.
    double alpha() const { return s * p - dim + dim * p / q; }
    bool conformal() const { return std::abs(s * p - dim) < 1e-12; }

    void validate() const {
        if (dim != 1 && dim != 2) throw DomainError("dimension must be 1 or 2");
        if (!(s > 0 && s < 1)) throw DomainError("s must lie in (0,1)");
        if (!(p >= 1)) throw DomainError("p must be >= 1");
        if (!(q >= 1)) throw DomainError("q must be >= 1");
        if (gamma && !(*gamma > 0 && *gamma < 1)) throw DomainError("gamma must lie in (0,1)");
        if (allow_supercritical) return;
        double sp_ = s * p;
        if (sp_ > dim + 1e-12) throw DomainError("sp > N requires allow_supercritical");
        if (sp_ < dim - 1e-12) {
            if (q > sobolev_exponent(dim, s, p) * (1 + 1e-12)) throw DomainError("q exceeds p*_s");
        } else if (!std::isfinite(q)) {
            throw DomainError("q must be finite when sp = N");
        }
    }

    // Extra requirement for Maz'ya-Poincare-Sobolev and main-theorem use.
    void require_p_le_q() const {
        if (p > q + 1e-12) throw DomainError("operation requires p <= q");
    }
};

// Pairwise (tree) summation; deterministic and insensitive to long sequential drift.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 16) {
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += x[i];
        return acc;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace frac
