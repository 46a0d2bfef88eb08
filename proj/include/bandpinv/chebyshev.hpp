#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace bandpinv {

/// Chebyshev polynomial of the first kind, T_j(y), by the three-term
/// recurrence (valid for all real y).
inline double cheb_T(int j, double y) {
    if (j < 0) throw std::invalid_argument("cheb_T: negative degree");
    if (j == 0) return 1.0;
    double prev = 1.0, cur = y;
    for (int k = 2; k <= j; ++k) {
        const double next = 2.0 * y * cur - prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

namespace detail {

/**
 * ceil with a one-sided guard: values within 1e-9 above an integer round
 * down to it. Exponent arguments here are ratios of distances that are
 * integral in exact arithmetic but carry float noise (fl(3h)/h = 3+eps);
 * a raw ceil would jump a whole step and silently tighten a bound, which
 * is the unsound direction for error-vs-bound verification.
 */
inline double ceil_guard(double x) { return std::ceil(x - 1e-9); }

inline void require_interval(double a, double b, const char* who) {
    if (!(a > 0.0) || !(b > a))
        throw std::invalid_argument(std::string(who) + ": need 0 < a < b, got a=" +
                                    std::to_string(a) + " b=" + std::to_string(b));
}

/// Degenerate (single-point) spectrum: b - a below 1e-12 * b.
inline bool degenerate_interval(double a, double b) {
    return b - a < 1e-12 * b;
}

} // namespace detail

/**
 * Odd polynomial approximant of 1/x on [-b,-a] u [a,b]:
 *
 *   p(x) = scale * x * (alpha + beta * sum_{j=0}^{n} t^j T_j(y(x))),
 *   y(x) = c - (2/(b^2-a^2)) x^2,
 *
 * with t = (b-a)/(b+a), c = (b^2+a^2)/(b^2-a^2), scale = 2/(b^2-a^2),
 * alpha = -2t/(1-t^2), beta = 4t/(1-t^2). Degree 2n+1; sup-error on the
 * domain is at most g(n) (see decay_bound). The degenerate single-point
 * case returns the exact inverse p(x) = x/(ab) instead.
 */
struct OddPolySpec {
    int n = 0;
    double a = 0, b = 0;
    double t = 0, c = 0, scale = 0, alpha = 0, beta = 0;
    bool degenerate = false;

    int degree() const { return degenerate ? 1 : 2 * n + 1; }
};

inline OddPolySpec odd_pinv_poly(int n, double a, double b) {
    if (n < 0) throw std::invalid_argument("odd_pinv_poly: negative degree index");
    if (!(a > 0.0) || !(b >= a))
        throw std::invalid_argument("odd_pinv_poly: need 0 < a <= b");
    OddPolySpec s;
    s.n = n;
    s.a = a;
    s.b = b;
    if (detail::degenerate_interval(a, b)) {
        s.degenerate = true;
        return s;
    }
    s.t = (b - a) / (b + a);
    s.c = (b * b + a * a) / (b * b - a * a);
    s.scale = 2.0 / (b * b - a * a);
    const double omt2 = 1.0 - s.t * s.t;
    s.alpha = -2.0 * s.t / omt2;
    s.beta = 4.0 * s.t / omt2;
    return s;
}

/// Evaluate the odd approximant. The Chebyshev sum is accumulated in the
/// scaled basis U_j = t^j T_j(y), whose recurrence
/// U_{j+1} = 2ty U_j - t^2 U_{j-1} keeps every intermediate bounded even
/// where |y| > 1 (i.e. for arguments outside [a,b], such as 0).
inline double eval(const OddPolySpec& s, double x) {
    if (s.degenerate) return x / (s.a * s.b);
    const double y = s.c - 2.0 / (s.b * s.b - s.a * s.a) * (x * x);
    double acc = 1.0; // U_0
    if (s.n >= 1) {
        double prev = 1.0, cur = s.t * y; // U_0, U_1
        acc += cur;
        for (int j = 2; j <= s.n; ++j) {
            const double next = 2.0 * s.t * y * cur - s.t * s.t * prev;
            prev = cur;
            cur = next;
            acc += cur;
        }
    }
    return s.scale * x * (s.alpha + s.beta * acc);
}

/**
 * PSD-side approximant of 1/x on [a,b]: the Chebyshev expansion
 *
 *   q(x) = (1/sqrt(ab)) * (1 + 2 sum_{k=1}^{n} t^k T_k(y(x))),
 *   y(x) = (a + b - 2x)/(b - a),  t = (sqrt(b)-sqrt(a))/(sqrt(b)+sqrt(a)).
 *
 * Degree n; sup-error on [a,b] equals (2 sqrt(b)/(sqrt(b)+sqrt(a))) h(n),
 * which is at most 2 h(n) (see decay_bound). Degenerate case: q(x) = 1/a.
 */
struct PsdPolySpec {
    int n = 0;
    double a = 0, b = 0;
    double t = 0, c = 0;
    bool degenerate = false;

    int degree() const { return degenerate ? 0 : n; }
};

inline PsdPolySpec psd_pinv_poly(int n, double a, double b) {
    if (n < 0) throw std::invalid_argument("psd_pinv_poly: negative degree index");
    if (!(a > 0.0) || !(b >= a))
        throw std::invalid_argument("psd_pinv_poly: need 0 < a <= b");
    PsdPolySpec s;
    s.n = n;
    s.a = a;
    s.b = b;
    if (detail::degenerate_interval(a, b)) {
        s.degenerate = true;
        return s;
    }
    const double sa = std::sqrt(a), sb = std::sqrt(b);
    s.t = (sb - sa) / (sb + sa);
    s.c = (a + b) / (b - a);
    return s;
}

inline double eval(const PsdPolySpec& s, double x) {
    if (s.degenerate) return 1.0 / s.a;
    const double y = (s.a + s.b - 2.0 * x) / (s.b - s.a);
    double acc = 0.0;
    if (s.n >= 1) {
        double prev = 1.0, cur = s.t * y; // t^0 T_0, t^1 T_1
        acc += cur;
        for (int k = 2; k <= s.n; ++k) {
            const double next = 2.0 * s.t * y * cur - s.t * s.t * prev;
            prev = cur;
            cur = next;
            acc += cur;
        }
    }
    return (1.0 + 2.0 * acc) / std::sqrt(s.a * s.b);
}

namespace detail {

/// Coefficients of t^j T_j(alpha + beta*u) as a polynomial in u, for
/// j = 0..n, by the recurrence in coefficient space.
inline std::vector<std::vector<double>> scaled_cheb_coeffs(int n, double t, double alpha,
                                                           double beta) {
    std::vector<std::vector<double>> T(static_cast<std::size_t>(n) + 1);
    T[0] = {1.0};
    if (n >= 1) T[1] = {t * alpha, t * beta};
    for (int j = 2; j <= n; ++j) {
        const auto& p1 = T[j - 1];
        const auto& p2 = T[j - 2];
        std::vector<double> next(p1.size() + 1, 0.0);
        for (std::size_t k = 0; k < p1.size(); ++k) {
            next[k] += 2.0 * t * alpha * p1[k];
            next[k + 1] += 2.0 * t * beta * p1[k];
        }
        for (std::size_t k = 0; k < p2.size(); ++k) next[k] -= t * t * p2[k];
        T[j] = std::move(next);
    }
    return T;
}

} // namespace detail

/// Full monomial coefficient vector (index = power of x, length degree+1).
/// Even-power entries are identically zero: the polynomial is x times a
/// polynomial in x^2 by construction.
inline std::vector<double> monomial_coefficients(const OddPolySpec& s) {
    if (s.degenerate) return {0.0, 1.0 / (s.a * s.b)};
    // y(x) = c - (2/(b^2-a^2)) x^2: expand in u = x^2.
    const auto T = detail::scaled_cheb_coeffs(s.n, s.t, s.c, -2.0 / (s.b * s.b - s.a * s.a));
    std::vector<double> phi(static_cast<std::size_t>(s.n) + 1, 0.0);
    for (int j = 0; j <= s.n; ++j)
        for (std::size_t k = 0; k < T[static_cast<std::size_t>(j)].size(); ++k)
            phi[k] += s.beta * T[static_cast<std::size_t>(j)][k];
    phi[0] += s.alpha;
    std::vector<double> out(static_cast<std::size_t>(2 * s.n + 2), 0.0);
    for (std::size_t k = 0; k < phi.size(); ++k) out[2 * k + 1] = s.scale * phi[k];
    return out;
}

inline std::vector<double> monomial_coefficients(const PsdPolySpec& s) {
    if (s.degenerate) return {1.0 / s.a};
    // y(x) = (a+b)/(b-a) - (2/(b-a)) x
    const auto T = detail::scaled_cheb_coeffs(s.n, s.t, s.c, -2.0 / (s.b - s.a));
    std::vector<double> out(static_cast<std::size_t>(s.n) + 1, 0.0);
    out[0] = 1.0;
    for (int k = 1; k <= s.n; ++k)
        for (std::size_t p = 0; p < T[static_cast<std::size_t>(k)].size(); ++p)
            out[p] += 2.0 * T[static_cast<std::size_t>(k)][p];
    const double root = std::sqrt(s.a * s.b);
    for (double& c : out) c /= root;
    return out;
}

/// max |1/x - p(x)| over a uniform grid on [a, b] (endpoints included).
template <class PolySpec>
inline double max_abs_error_on_grid(const PolySpec& s, double a, double b, int points = 10001) {
    if (points < 2) throw std::invalid_argument("max_abs_error_on_grid: need at least 2 points");
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / (points - 1);
        worst = std::max(worst, std::abs(1.0 / x - eval(s, x)));
    }
    return worst;
}

/**
 * Decay / approximation bound family on an interval 0 < a < b.
 *
 *  f1(omega)  : PSD off-diagonal bound, exponent ceil(omega)
 *  f2(omega)  : general bound, exponent ceil((omega-1)/2)
 *  g(n)       : odd-approximant sup-error at degree 2n+1, exponent n+1
 *  h(n)       : PSD-approximant reference error at degree n, exponent n+1
 *  demko      : classical PSD-inverse comparison bound, exponent ceil((omega-1)/2)
 *  shin       : companion comparison bound, exponent ceil((omega-1)/2)
 */
enum class BoundKind { f1, f2, g, h, demko, shin };

inline double decay_bound(BoundKind kind, double arg, double a, double b) {
    detail::require_interval(a, b, "decay_bound");
    const double sa = std::sqrt(a), sb = std::sqrt(b);
    switch (kind) {
        case BoundKind::f1: {
            const double c0 = (sb + sa) * (sb + sa) / (2.0 * a * b);
            const double base = (sb - sa) / (sb + sa);
            return c0 * std::pow(base, detail::ceil_guard(arg));
        }
        case BoundKind::h: {
            const double c0 = (sb + sa) * (sb + sa) / (2.0 * a * b);
            const double base = (sb - sa) / (sb + sa);
            return c0 * std::pow(base, arg + 1.0);
        }
        case BoundKind::f2: {
            const double c0 = 4.0 * std::pow(b + a, 1.5) / (a * b * std::sqrt(b - a));
            const double base = (b - a) / (b + a);
            return c0 * std::pow(base, detail::ceil_guard((arg - 1.0) / 2.0));
        }
        case BoundKind::g: {
            const double c0 = 4.0 * std::pow(b + a, 1.5) / (a * b * std::sqrt(b - a));
            const double base = (b - a) / (b + a);
            return c0 * std::pow(base, arg + 1.0);
        }
        case BoundKind::demko: {
            const double c0 = (a + b) * (a + b) / (2.0 * a * a * b);
            const double base = (b - a) / (b + a);
            return c0 * std::pow(base, detail::ceil_guard((arg - 1.0) / 2.0));
        }
        case BoundKind::shin: {
            const double c0 = b / (a * a);
            const double base = (b * b - a * a) / (b * b + a * a);
            return c0 * std::pow(base, detail::ceil_guard((arg - 1.0) / 2.0));
        }
    }
    throw std::logic_error("decay_bound: unhandled kind");
}

} // namespace bandpinv
