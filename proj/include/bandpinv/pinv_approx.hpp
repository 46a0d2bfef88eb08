#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandpinv/backend.hpp"
#include "bandpinv/block_matrix.hpp"
#include "bandpinv/chebyshev.hpp"
#include "bandpinv/metric.hpp"

namespace bandpinv {

/// Moore-Penrose pseudoinverse by SVD with a relative rank cutoff.
/// A zero matrix maps to the zero matrix of transposed shape.
inline Eigen::MatrixXd exact_pinv(const Eigen::MatrixXd& A, double rank_tol = 1e-10,
                                  const DenseBackend& be = default_backend()) {
    if (A.size() == 0) return Eigen::MatrixXd(A.cols(), A.rows());
    const SvdFactors f = svd_factors(A, rank_tol, be);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.cols(), A.rows());
    for (Eigen::Index k = 0; k < f.numerical_rank; ++k)
        out.noalias() +=
            (1.0 / f.singular_values(k)) * f.right_vectors.col(k) * f.left_vectors.col(k).transpose();
    return out;
}

enum class PinvMode { auto_detect, general, psd };

inline const char* to_string(PinvMode m) {
    switch (m) {
        case PinvMode::auto_detect: return "auto";
        case PinvMode::general: return "general";
        case PinvMode::psd: return "psd";
    }
    return "?";
}

struct ApproxReport {
    double kappa = 0;           ///< requested bandwidth of the approximant
    double kappa_bar = 0;       ///< certified bandwidth of the input
    PinvMode mode_used = PinvMode::general;
    int n_used = 0;             ///< polynomial index (degree 2n+1 general, n psd)
    double a = 0, b = 0;        ///< singular-value enclosure used
    double error_2norm = 0;     ///< ||pinv(A) - approx||_2
    double bound = 0;           ///< certified bound: f2(omega) general, f1(omega) psd
    double bound_used_for_testing = 0; ///< f2(omega) general, 2*f1(omega) psd
    double bound_demko = 0;
    double bound_shin = 0;
};

struct PinvOptions {
    PinvMode mode = PinvMode::auto_detect;
    std::optional<std::pair<double, double>> interval; ///< caller-certified [a,b]
    double rank_tol = 1e-10;
};

struct ApproxResult {
    BandedBlockMatrix approx;
    ApproxReport report;
};

namespace detail {

inline Eigen::MatrixXd pinv_from_factors(const SvdFactors& f, Eigen::Index rows_of_A,
                                         Eigen::Index cols_of_A) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cols_of_A, rows_of_A);
    for (Eigen::Index k = 0; k < f.numerical_rank; ++k)
        out.noalias() +=
            (1.0 / f.singular_values(k)) * f.right_vectors.col(k) * f.left_vectors.col(k).transpose();
    return out;
}

inline bool numerically_symmetric(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) return false;
    const double scale = A.size() ? A.cwiseAbs().maxCoeff() : 0.0;
    if (scale == 0.0) return true;
    return (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

/// Accumulate sum_{j=j0}^{n} t^j T_j(Y) for a square Y via the scaled
/// recurrence U_{j+1} = 2tY U_j - t^2 U_{j-1}; intermediates stay bounded
/// because t^j T_j(y) <= (1 + t^{2j})/2 on the relevant range.
inline Eigen::MatrixXd scaled_cheb_matrix_sum(const Eigen::MatrixXd& Y, double t, int n, int j0,
                                              const DenseBackend& be) {
    const Eigen::Index d = Y.rows();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(d, d); // U_0
    if (j0 == 0) acc += prev;
    if (n == 0) return acc;
    Eigen::MatrixXd cur = t * Y; // U_1
    if (1 >= j0) acc += cur;
    for (int j = 2; j <= n; ++j) {
        Eigen::MatrixXd next = 2.0 * t * be.multiply(Y, cur) - t * t * prev;
        prev = std::move(cur);
        cur = std::move(next);
        if (j >= j0) acc += cur;
    }
    return acc;
}

} // namespace detail

namespace detail {

/// Per-matrix work shared across approx_pinv calls on the same input:
/// the input's SVD, the exact pseudoinverse, and the resolved mode.
struct ApproxContext {
    SvdFactors factors;
    Eigen::MatrixXd exact;
    PinvMode mode = PinvMode::general;
};

/// Resolve auto mode: psd iff A is square with matching partitions,
/// symmetric to 1e-10, lambda_min >= -1e-10 ||A||_2, and numerically full
/// rank; otherwise general. (The psd-path polynomial has q(0) != 0, so a
/// nontrivial null space must take the odd path, which annihilates it.)
inline PinvMode resolve_mode(const BandedBlockMatrix& A, PinvMode requested,
                             const SvdFactors& factors, const DenseBackend& be) {
    if (requested == PinvMode::general) return PinvMode::general;
    const bool symmetric = numerically_symmetric(A.data) && A.rows.same_layout(A.cols);
    if (requested == PinvMode::psd) {
        if (!symmetric)
            throw std::invalid_argument("approx_pinv: psd mode requires a symmetric matrix");
        const Eigen::VectorXd lam = be.sym_eigenvalues(0.5 * (A.data + A.data.transpose()));
        if (lam.minCoeff() < -1e-10 * lam.cwiseAbs().maxCoeff())
            throw std::invalid_argument("approx_pinv: psd mode on an indefinite matrix");
        return PinvMode::psd;
    }
    if (!symmetric) return PinvMode::general;
    const Eigen::VectorXd lam = be.sym_eigenvalues(0.5 * (A.data + A.data.transpose()));
    const bool near_psd = lam.minCoeff() >= -1e-10 * lam.cwiseAbs().maxCoeff();
    const bool full_rank = factors.numerical_rank == A.data.rows();
    return (near_psd && full_rank) ? PinvMode::psd : PinvMode::general;
}

inline ApproxContext make_context(const BandedBlockMatrix& A, PinvMode requested, double rank_tol,
                                  const DenseBackend& be) {
    ApproxContext ctx;
    ctx.factors = svd_factors(A.data, rank_tol, be);
    if (ctx.factors.numerical_rank == 0)
        throw std::invalid_argument("approx_pinv: zero matrix has no spectral enclosure");
    ctx.exact = pinv_from_factors(ctx.factors, A.data.rows(), A.data.cols());
    ctx.mode = resolve_mode(A, requested, ctx.factors, be);
    return ctx;
}

} // namespace detail

/**
 * Banded approximation of the Moore-Penrose pseudoinverse.
 *
 * Given a bandwidth-certified A and a target bandwidth kappa, builds a
 * kappa-banded Atil with the shape and partitions of pinv(A) and reports
 * the achieved error next to the certified bound family. The approximant
 * is a polynomial in A:
 *   - general mode: the odd approximant applied through the Gram matrix,
 *     Atil = scale*(alpha I + beta sum_j t^j T_j(Y)) A^T with
 *     Y = cI - (2/(b^2-a^2)) A^T A, degree index n0 = max(0, ceil((omega-3)/2));
 *   - psd mode: Atil = (I + 2 sum_k t^k T_k(Y)) / sqrt(ab) with
 *     Y = ((a+b)I - 2A)/(b-a), degree n = max(0, ceil(omega-1));
 * then truncate_to_band(Atil, kappa), where omega = kappa/kappa_bar.
 */
inline ApproxResult approx_pinv(const BandedBlockMatrix& A, double kappa, const PinvOptions& opt,
                                const DenseBackend& be, const detail::ApproxContext& ctx) {
    if (!(kappa >= 0)) throw std::invalid_argument("approx_pinv: negative target bandwidth");
    const double measured = require_certificate(A, "approx_pinv");
    const double kappa_bar = measured > 0 ? measured : 1.0; // diagonal input: one step = one block
    const double omega = kappa / kappa_bar;

    double a, b;
    if (opt.interval) {
        a = opt.interval->first;
        b = opt.interval->second;
        if (!(a > 0) || !(b >= a))
            throw std::invalid_argument("approx_pinv: interval must satisfy 0 < a <= b");
    } else {
        a = ctx.factors.singular_values(ctx.factors.numerical_rank - 1);
        b = ctx.factors.singular_values(0);
    }
    const PinvMode mode = ctx.mode;

    ApproxReport rep;
    rep.kappa = kappa;
    rep.kappa_bar = kappa_bar;
    rep.mode_used = mode;
    rep.a = a;
    rep.b = b;

    const bool degenerate = detail::degenerate_interval(a, b);
    Eigen::MatrixXd approx_data;
    if (mode == PinvMode::psd) {
        const int n = std::max(0, static_cast<int>(detail::ceil_guard(omega - 1.0)));
        rep.n_used = n;
        if (degenerate) {
            approx_data =
                Eigen::MatrixXd::Identity(A.data.rows(), A.data.cols()) * (1.0 / a);
        } else {
            const PsdPolySpec ps = psd_pinv_poly(n, a, b);
            const Eigen::MatrixXd Y =
                ((a + b) * Eigen::MatrixXd::Identity(A.data.rows(), A.data.cols()) - 2.0 * A.data) /
                (b - a);
            const Eigen::MatrixXd tail = detail::scaled_cheb_matrix_sum(Y, ps.t, n, 1, be);
            approx_data = (Eigen::MatrixXd::Identity(Y.rows(), Y.cols()) + 2.0 * tail) /
                          std::sqrt(a * b);
        }
    } else {
        const int n0 = std::max(0, static_cast<int>(detail::ceil_guard((omega - 3.0) / 2.0)));
        rep.n_used = n0;
        if (degenerate) {
            approx_data = A.data.transpose() / (a * b);
        } else {
            const OddPolySpec ps = odd_pinv_poly(n0, a, b);
            const Eigen::MatrixXd gram = be.multiply(A.data.transpose(), A.data);
            const Eigen::MatrixXd Y =
                ps.c * Eigen::MatrixXd::Identity(gram.rows(), gram.cols()) -
                (2.0 / (b * b - a * a)) * gram;
            const Eigen::MatrixXd sum = detail::scaled_cheb_matrix_sum(Y, ps.t, n0, 0, be);
            Eigen::MatrixXd S =
                ps.scale * (ps.alpha * Eigen::MatrixXd::Identity(Y.rows(), Y.cols()) + ps.beta * sum);
            approx_data = be.multiply(S, A.data.transpose());
        }
    }

    BandedBlockMatrix approx =
        truncate_to_band(make_banded(A.cols, A.rows, std::move(approx_data)), kappa);

    rep.error_2norm = spectral_norm(ctx.exact - approx.data, be);

    if (degenerate) {
        // Single-point spectrum: the approximant is the exact inverse up to
        // roundoff; certify a machine-precision allowance instead of the
        // bound family, which is undefined at a = b.
        rep.bound = rep.bound_used_for_testing = rep.bound_demko = rep.bound_shin = 1e-12 / a;
    } else if (mode == PinvMode::psd) {
        rep.bound = decay_bound(BoundKind::f1, omega, a, b);
        rep.bound_used_for_testing = 2.0 * rep.bound;
        rep.bound_demko = decay_bound(BoundKind::demko, omega, a, b);
        rep.bound_shin = decay_bound(BoundKind::shin, omega, a, b);
    } else {
        rep.bound = decay_bound(BoundKind::f2, omega, a, b);
        rep.bound_used_for_testing = rep.bound;
        rep.bound_demko = decay_bound(BoundKind::demko, omega, a, b);
        rep.bound_shin = decay_bound(BoundKind::shin, omega, a, b);
    }
    return ApproxResult{std::move(approx), rep};
}

/// Single-call form: factors the input, resolves the mode, and builds one
/// approximant. Batched callers should build a detail::ApproxContext once.
inline ApproxResult approx_pinv(const BandedBlockMatrix& A, double kappa,
                                const PinvOptions& opt = {},
                                const DenseBackend& be = default_backend()) {
    return approx_pinv(A, kappa, opt, be, detail::make_context(A, opt.mode, opt.rank_tol, be));
}

struct VerifySummary {
    std::vector<ApproxReport> reports;
    double noise_floor = 0.0;          ///< 1e-14 * ||pinv(A)||_2
    bool monotone_nonincreasing = true; ///< errors above the floor never increase with kappa
    bool all_within_bound = true;       ///< error <= bound_used_for_testing everywhere
};

/// Run approx_pinv over a list of target bandwidths and summarize the
/// error trend. Errors at machine scale (below the noise floor) are
/// exempt from the monotonicity flag.
inline VerifySummary verify_bound(const BandedBlockMatrix& A, const std::vector<double>& kappas,
                                  const PinvOptions& opt = {},
                                  const DenseBackend& be = default_backend()) {
    VerifySummary out;
    const detail::ApproxContext ctx = detail::make_context(A, opt.mode, opt.rank_tol, be);
    double pinv_norm = 0.0;
    for (double k : kappas) {
        ApproxResult r = approx_pinv(A, k, opt, be, ctx);
        pinv_norm = std::max(pinv_norm, 1.0 / r.report.a);
        if (r.report.error_2norm > r.report.bound_used_for_testing) out.all_within_bound = false;
        out.reports.push_back(r.report);
    }
    out.noise_floor = 1e-14 * pinv_norm;
    double prev = std::numeric_limits<double>::infinity();
    for (const ApproxReport& r : out.reports) {
        if (r.error_2norm > out.noise_floor && r.error_2norm > prev * (1.0 + 1e-12))
            out.monotone_nonincreasing = false;
        prev = std::max(r.error_2norm, out.noise_floor);
    }
    return out;
}

struct DecayEntry {
    double distance = 0; ///< set distance between the node groups
    double measured = 0; ///< ||pinv(A)[rows(V1), cols(V2)]||_2
    double bound = 0;    ///< f_mode((distance - 1)/kappa_bar, a, b)
};

struct DecayProfile {
    PinvMode mode_used = PinvMode::general;
    double a = 0, b = 0, kappa_bar = 1;
    std::vector<DecayEntry> entries;
};

/**
 * Off-diagonal decay of the exact pseudoinverse: for each pair of node
 * groups (V1, V2), the spectral norm of the pinv(A) submatrix indexed by
 * V1's blocks (as rows) and V2's blocks (as columns), next to the decay
 * bound at the set distance. Row blocks of pinv(A) follow A's column
 * partition and vice versa.
 */
inline DecayProfile offdiag_decay(
    const BandedBlockMatrix& A,
    const std::vector<std::pair<std::vector<NodeId>, std::vector<NodeId>>>& pairs,
    const PinvOptions& opt = {}, const DenseBackend& be = default_backend()) {
    const double measured = require_certificate(A, "offdiag_decay");
    const double kappa_bar = measured > 0 ? measured : 1.0;
    const MetricSpace& space = A.rows.space();

    const detail::ApproxContext ctx = detail::make_context(A, opt.mode, opt.rank_tol, be);
    double a, b;
    if (opt.interval) {
        a = opt.interval->first;
        b = opt.interval->second;
    } else {
        a = ctx.factors.singular_values(ctx.factors.numerical_rank - 1);
        b = ctx.factors.singular_values(0);
    }
    const PinvMode mode = ctx.mode;
    const Eigen::MatrixXd& pinv = ctx.exact;

    DecayProfile prof;
    prof.mode_used = mode;
    prof.a = a;
    prof.b = b;
    prof.kappa_bar = kappa_bar;

    for (const auto& [V1, V2] : pairs) {
        if (V1.empty() || V2.empty())
            throw std::invalid_argument("offdiag_decay: empty node group");
        Eigen::Index nr = 0, nc = 0;
        for (NodeId v : V1) nr += A.cols.size(space.index_of(v));
        for (NodeId v : V2) nc += A.rows.size(space.index_of(v));
        Eigen::MatrixXd sub(nr, nc);
        Eigen::Index ro = 0;
        for (NodeId v1 : V1) {
            const std::size_t i = space.index_of(v1);
            Eigen::Index co = 0;
            for (NodeId v2 : V2) {
                const std::size_t j = space.index_of(v2);
                sub.block(ro, co, A.cols.size(i), A.rows.size(j)) =
                    pinv.block(A.cols.offset(i), A.rows.offset(j), A.cols.size(i), A.rows.size(j));
                co += A.rows.size(j);
            }
            ro += A.cols.size(i);
        }
        DecayEntry e;
        e.distance = set_distance(space, V1, V2);
        e.measured = spectral_norm(sub, be);
        e.bound = decay_bound(mode == PinvMode::psd ? BoundKind::f1 : BoundKind::f2,
                              (e.distance - 1.0) / kappa_bar, a, b);
        prof.entries.push_back(e);
    }
    return prof;
}

} // namespace bandpinv
