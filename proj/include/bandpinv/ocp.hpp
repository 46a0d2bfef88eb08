#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandpinv/backend.hpp"
#include "bandpinv/block_matrix.hpp"
#include "bandpinv/metric.hpp"

namespace bandpinv {

/// Time-dependent source term. Indicator supports are closed intervals.
struct TimeSignal {
    enum class Kind { zero, constant, indicator };
    Kind kind = Kind::zero;
    Eigen::VectorXd value; ///< constant value / indicator plateau (empty = ones)
    double lo = 0, hi = 0; ///< indicator support

    Eigen::VectorXd at(double t, Eigen::Index dim) const {
        switch (kind) {
            case Kind::zero: return Eigen::VectorXd::Zero(dim);
            case Kind::constant: return plateau(dim);
            case Kind::indicator:
                return (t >= lo && t <= hi) ? plateau(dim) : Eigen::VectorXd::Zero(dim);
        }
        return Eigen::VectorXd::Zero(dim);
    }

    /// integral of ||signal(t)||^2 over [from, to]
    double sq_mass(double from, double to, Eigen::Index dim) const {
        if (to <= from || kind == Kind::zero) return 0.0;
        double lo_eff = from, hi_eff = to;
        if (kind == Kind::indicator) {
            lo_eff = std::max(from, lo);
            hi_eff = std::min(to, hi);
            if (hi_eff <= lo_eff) return 0.0;
        }
        return plateau(dim).squaredNorm() * (hi_eff - lo_eff);
    }

    /// support as an interval (full window for constants)
    std::pair<double, double> support(double T) const {
        if (kind == Kind::indicator) return {lo, hi};
        return {0.0, T};
    }

private:
    Eigen::VectorXd plateau(Eigen::Index dim) const {
        if (value.size() == 0) return Eigen::VectorXd::Ones(dim);
        if (value.size() != dim)
            throw std::invalid_argument("TimeSignal: value has dimension " +
                                        std::to_string(value.size()) + ", expected " +
                                        std::to_string(dim));
        return value;
    }
};

/// Closed-loop decay certificate: gains plus constants L, alpha with
/// ||e^{(Lambda - B K_stab) t}|| and ||e^{(Lambda - K_det C) t}|| below
/// L e^{-alpha t}, and all system/gain norms below L.
struct StabilityCert {
    Eigen::MatrixXd K_stab; ///< n_u x n_s
    Eigen::MatrixXd K_det;  ///< n_s x n_y
    double L = 0;
    double alpha = 0;
};

struct OcpScenario {
    Eigen::MatrixXd Lambda; ///< n_s x n_s
    Eigen::MatrixXd B;      ///< n_s x n_u
    Eigen::MatrixXd C;      ///< n_y x n_s
    double T = 0;
    Eigen::VectorXd sbar;      ///< initial state
    Eigen::VectorXd lambdabar; ///< terminal adjoint
    TimeSignal q, r, d;
    std::optional<StabilityCert> cert;

    Eigen::Index ns() const { return Lambda.rows(); }
    Eigen::Index nu() const { return B.cols(); }
    Eigen::Index ny() const { return C.rows(); }

    void validate() const {
        if (Lambda.rows() != Lambda.cols()) throw std::invalid_argument("scenario: Lambda not square");
        if (B.rows() != ns()) throw std::invalid_argument("scenario: B row count != n_s");
        if (C.cols() != ns()) throw std::invalid_argument("scenario: C column count != n_s");
        if (!(T > 0)) throw std::invalid_argument("scenario: horizon T must be positive");
        if (sbar.size() != ns()) throw std::invalid_argument("scenario: sbar dimension != n_s");
        if (lambdabar.size() != ns())
            throw std::invalid_argument("scenario: lambdabar dimension != n_s");
        if (cert) {
            if (cert->K_stab.rows() != nu() || cert->K_stab.cols() != ns())
                throw std::invalid_argument("scenario: K_stab must be n_u x n_s");
            if (cert->K_det.rows() != ns() || cert->K_det.cols() != ny())
                throw std::invalid_argument("scenario: K_det must be n_s x n_y");
            if (!(cert->L > 0) || !(cert->alpha > 0))
                throw std::invalid_argument("scenario: cert needs L > 0 and alpha > 0");
        }
    }
};

/// Stability constant of the discrete saddle operator:
/// dtilde = L(1+2L) sqrt(alpha^2 + L^4 (1+L)^2) / alpha^2
///        + (L^2 (1+2L)^2 / alpha^2) max(1, L^2 (1+L)^2 / (1+2L)^2).
inline double dtilde(double L, double alpha) {
    if (!(L > 0) || !(alpha > 0)) throw std::invalid_argument("dtilde: need L > 0, alpha > 0");
    const double a2 = alpha * alpha;
    const double first = L * (1.0 + 2.0 * L) * std::sqrt(a2 + std::pow(L, 4) * std::pow(1.0 + L, 2)) / a2;
    const double second = (L * L * std::pow(1.0 + 2.0 * L, 2) / a2) *
                          std::max(1.0, L * L * std::pow(1.0 + L, 2) / std::pow(1.0 + 2.0 * L, 2));
    return first + second;
}

/// Mesh-weighted Euclidean norm sqrt(h) * ||v||_2.
inline double h_norm(const Eigen::VectorXd& v, double h) {
    if (!(h > 0)) throw std::invalid_argument("h_norm: mesh width must be positive");
    return std::sqrt(h) * v.norm();
}

/**
 * Check a StabilityCert against its scenario by direct sampling: all
 * norm caps ||Lambda||, ||B||, ||C||, ||K_stab||, ||K_det|| <= L, and
 * ||e^{Phi t}||_2 <= L e^{-alpha t} for both closed-loop matrices at 200
 * sample times on [0, max(T, 10/alpha)]. Returns the list of failures
 * (empty = verified).
 */
inline std::vector<std::string> check_stability_cert(const OcpScenario& sc,
                                                     const DenseBackend& be = default_backend()) {
    sc.validate();
    if (!sc.cert) return {"no certificate attached"};
    const StabilityCert& ct = *sc.cert;
    std::vector<std::string> issues;
    auto cap = [&](const char* name, const Eigen::MatrixXd& M) {
        const double n2 = spectral_norm(M, be);
        if (n2 > ct.L * (1.0 + 1e-12))
            issues.push_back(std::string(name) + " norm " + std::to_string(n2) + " exceeds L");
    };
    cap("Lambda", sc.Lambda);
    cap("B", sc.B);
    cap("C", sc.C);
    cap("K_stab", ct.K_stab);
    cap("K_det", ct.K_det);

    const Eigen::MatrixXd phi_stab = sc.Lambda - sc.B * ct.K_stab;
    const Eigen::MatrixXd phi_det = sc.Lambda - ct.K_det * sc.C;
    const double horizon = std::max(sc.T, 10.0 / ct.alpha);
    constexpr int samples = 200;
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::MatrixXd& phi = pass == 0 ? phi_stab : phi_det;
        for (int i = 0; i < samples; ++i) {
            const double t = horizon * static_cast<double>(i) / (samples - 1);
            const Eigen::MatrixXd expm = (phi * t).exp();
            const double lhs = spectral_norm(expm, be);
            const double rhs = ct.L * std::exp(-ct.alpha * t);
            if (lhs > rhs * (1.0 + 1e-9) + 1e-12) {
                issues.push_back(std::string(pass == 0 ? "stabilizer" : "detector") +
                                 " decay fails at t=" + std::to_string(t) + ": " +
                                 std::to_string(lhs) + " > " + std::to_string(rhs));
                break;
            }
        }
    }
    return issues;
}

/**
 * Forward-Euler discretization of the control problem on N steps,
 * assembled as the symmetric one-step-banded system H z = p with
 * unknowns ordered z = [s_0..s_N, u_0..u_{N-1}, lambda_0..lambda_N]:
 *
 *   s_k rows (k<N):  C^T C s_k + (lambda_k - lambda_{k+1})/h - Lambda^T lambda_{k+1} = q(t_k)
 *   s_N row:         lambda_N / h = lambdabar / h
 *   u_k rows:        u_k - B^T lambda_{k+1} = r(t_k)
 *   lambda_0 row:    s_0 / h = sbar / h
 *   lambda_k rows:   (s_k - s_{k-1})/h - Lambda s_{k-1} - B u_{k-1} = d(t_k)
 *
 * This is exactly [[G, F^T],[F, 0]] for G = blockdiag(C^T C ... C^T C, 0, I)
 * and F the dynamics rows, and it is the transposed-coupling completion
 * that makes H symmetric by construction (the u_k row pairs with
 * lambda_{k+1}, the multiplier of the constraint u_k enters).
 */
class DiscretizedOcp {
public:
    DiscretizedOcp(const OcpScenario& sc, int N) : scenario_(sc), N_(N) {
        sc.validate();
        if (N < 2) throw std::invalid_argument("DiscretizedOcp: need at least 2 steps");
        h_ = sc.T / N;
        ns_ = sc.ns();
        nu_ = sc.nu();
        const Eigen::Index dim = dimension();
        H_ = Eigen::MatrixXd::Zero(dim, dim);
        p_ = Eigen::VectorXd::Zero(dim);

        const Eigen::MatrixXd CtC = sc.C.transpose() * sc.C;
        const Eigen::MatrixXd Ins = Eigen::MatrixXd::Identity(ns_, ns_);
        const Eigen::MatrixXd sub = -Ins / h_ - sc.Lambda; // couples s_{k-1} in the lambda_k row

        for (int k = 0; k < N_; ++k)
            H_.block(s_offset(k), s_offset(k), ns_, ns_) = CtC;
        for (int k = 0; k < N_; ++k)
            H_.block(u_offset(k), u_offset(k), nu_, nu_) = Eigen::MatrixXd::Identity(nu_, nu_);

        for (int k = 0; k <= N_; ++k) {
            H_.block(l_offset(k), s_offset(k), ns_, ns_) = Ins / h_;
            H_.block(s_offset(k), l_offset(k), ns_, ns_) = Ins / h_;
            if (k >= 1) {
                H_.block(l_offset(k), s_offset(k - 1), ns_, ns_) = sub;
                H_.block(s_offset(k - 1), l_offset(k), ns_, ns_) = sub.transpose();
                H_.block(l_offset(k), u_offset(k - 1), ns_, nu_) = -sc.B;
                H_.block(u_offset(k - 1), l_offset(k), nu_, ns_) = -sc.B.transpose();
            }
        }

        for (int k = 0; k < N_; ++k) {
            p_.segment(s_offset(k), ns_) = sc.q.at(time(k), ns_);
            p_.segment(u_offset(k), nu_) = sc.r.at(time(k), nu_);
        }
        p_.segment(s_offset(N_), ns_) = sc.lambdabar / h_;
        p_.segment(l_offset(0), ns_) = sc.sbar / h_;
        for (int k = 1; k <= N_; ++k)
            p_.segment(l_offset(k), ns_) = sc.d.at(time(k), ns_);
    }

    const OcpScenario& scenario() const { return scenario_; }
    int N() const { return N_; }
    double h() const { return h_; }
    Eigen::Index ns() const { return ns_; }
    Eigen::Index nu() const { return nu_; }
    double time(int k) const { return h_ * k; }
    Eigen::Index dimension() const { return 2 * ns_ * (N_ + 1) + nu_ * N_; }

    Eigen::Index s_offset(int k) const { return static_cast<Eigen::Index>(k) * ns_; }
    Eigen::Index u_offset(int k) const { return ns_ * (N_ + 1) + static_cast<Eigen::Index>(k) * nu_; }
    Eigen::Index l_offset(int k) const {
        return ns_ * (N_ + 1) + nu_ * N_ + static_cast<Eigen::Index>(k) * ns_;
    }

    const Eigen::MatrixXd& H() const { return H_; }
    const Eigen::VectorXd& p() const { return p_; }

    /// Primal block G of the saddle form (s and u rows/columns).
    Eigen::MatrixXd primal_block() const {
        const Eigen::Index nz = ns_ * (N_ + 1) + nu_ * N_;
        return H_.topLeftCorner(nz, nz);
    }
    /// Constraint block F of the saddle form (lambda rows, s/u columns).
    Eigen::MatrixXd constraint_block() const {
        const Eigen::Index nz = ns_ * (N_ + 1) + nu_ * N_;
        return H_.bottomLeftCorner(ns_ * (N_ + 1), nz);
    }

    /**
     * Permutation gathering each time node's unknowns [s_k, u_k, lambda_k]
     * into one contiguous group: entry r of the result is the
     * solver-ordering index that lands at grouped position r.
     */
    std::vector<Eigen::Index> node_perm() const {
        std::vector<Eigen::Index> P;
        P.reserve(static_cast<std::size_t>(dimension()));
        for (int k = 0; k <= N_; ++k) {
            for (Eigen::Index i = 0; i < ns_; ++i) P.push_back(s_offset(k) + i);
            if (k < N_)
                for (Eigen::Index i = 0; i < nu_; ++i) P.push_back(u_offset(k) + i);
            for (Eigen::Index i = 0; i < ns_; ++i) P.push_back(l_offset(k) + i);
        }
        return P;
    }

    /// Per-node block sizes of the grouped ordering.
    std::vector<Eigen::Index> node_sizes() const {
        std::vector<Eigen::Index> sizes(static_cast<std::size_t>(N_) + 1, 2 * ns_ + nu_);
        sizes.back() = 2 * ns_;
        return sizes;
    }

    /**
     * The same operator as a banded block matrix over the discrete time
     * line (node k at t_k, one block per node in the grouped ordering).
     * Bandwidth measures to h: every coupling is within one time step.
     */
    BandedBlockMatrix banded() const {
        std::vector<double> points(static_cast<std::size_t>(N_) + 1);
        for (int k = 0; k <= N_; ++k) points[static_cast<std::size_t>(k)] = time(k);
        auto space = std::make_shared<const MetricSpace>(line_metric(points));
        BlockPartition part(space, node_sizes());
        const auto P = node_perm();
        const Eigen::Index dim = dimension();
        Eigen::MatrixXd data(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r)
            for (Eigen::Index c = 0; c < dim; ++c)
                data(r, c) = H_(P[static_cast<std::size_t>(r)], P[static_cast<std::size_t>(c)]);
        BandedBlockMatrix out = make_banded(part, part, std::move(data));
        measure_bandwidth(out);
        return out;
    }

private:
    OcpScenario scenario_;
    int N_;
    double h_ = 0;
    Eigen::Index ns_ = 0, nu_ = 0;
    Eigen::MatrixXd H_;
    Eigen::VectorXd p_;
};

enum class SolveMethod { auto_pick, dense, banded };

struct SolveOptions {
    SolveMethod method = SolveMethod::auto_pick;
    double residual_tol = 1e-9; ///< relative residual required of the solution
};

struct SolutionProfile {
    int N = 0;
    double h = 0;
    std::vector<double> times;
    Eigen::VectorXd z; ///< solver ordering [s; u; lambda]
    Eigen::MatrixXd s, lambda; ///< ns x (N+1)
    Eigen::MatrixXd u;         ///< nu x N
    std::vector<double> s_norms, u_norms, lambda_norms;
    double residual_rel = 0;
    const char* method_used = "";
};

namespace detail {

/// Block-tridiagonal elimination in the grouped-by-node ordering. The
/// pivot blocks are factored with partial pivoting; a near-singular
/// pivot aborts (caller falls back to the dense path).
inline Eigen::VectorXd solve_block_tridiag(const DiscretizedOcp& ocp, const Eigen::VectorXd& rhs) {
    const auto P = ocp.node_perm();
    const auto sizes = ocp.node_sizes();
    const std::size_t M = sizes.size();
    const Eigen::MatrixXd& H = ocp.H();

    std::vector<Eigen::Index> offs(M + 1, 0);
    for (std::size_t k = 0; k < M; ++k) offs[k + 1] = offs[k] + sizes[k];

    auto gather = [&](Eigen::Index r0, Eigen::Index c0, Eigen::Index nr, Eigen::Index nc) {
        Eigen::MatrixXd blk(nr, nc);
        for (Eigen::Index i = 0; i < nr; ++i)
            for (Eigen::Index j = 0; j < nc; ++j)
                blk(i, j) = H(P[static_cast<std::size_t>(r0 + i)], P[static_cast<std::size_t>(c0 + j)]);
        return blk;
    };

    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lus;
    lus.reserve(M);
    std::vector<Eigen::MatrixXd> uppers(M > 0 ? M - 1 : 0);
    std::vector<Eigen::VectorXd> bhat(M);

    Eigen::MatrixXd Dhat;
    for (std::size_t k = 0; k < M; ++k) {
        Eigen::MatrixXd D = gather(offs[k], offs[k], sizes[k], sizes[k]);
        Eigen::VectorXd b(sizes[k]);
        for (Eigen::Index i = 0; i < sizes[k]; ++i)
            b(i) = rhs(P[static_cast<std::size_t>(offs[k] + i)]);
        if (k > 0) {
            const Eigen::MatrixXd lower = uppers[k - 1].transpose(); // symmetric operator
            D.noalias() -= lower * lus[k - 1].solve(uppers[k - 1]);
            b.noalias() -= lower * lus[k - 1].solve(bhat[k - 1]);
        }
        Dhat = std::move(D);
        lus.emplace_back(Dhat);
        if (lus.back().rcond() < 1e-13)
            throw std::runtime_error("solve_block_tridiag: near-singular pivot block at node " +
                                     std::to_string(k));
        bhat[k] = std::move(b);
        if (k + 1 < M) uppers[k] = gather(offs[k], offs[k + 1], sizes[k], sizes[k + 1]);
    }

    Eigen::VectorXd x_grp(offs[M]);
    Eigen::VectorXd xk = lus[M - 1].solve(bhat[M - 1]);
    x_grp.segment(offs[M - 1], sizes[M - 1]) = xk;
    for (std::size_t k = M - 1; k-- > 0;) {
        Eigen::VectorXd rhs_k = bhat[k] - uppers[k] * x_grp.segment(offs[k + 1], sizes[k + 1]);
        x_grp.segment(offs[k], sizes[k]) = lus[k].solve(rhs_k);
    }

    Eigen::VectorXd z(ocp.dimension());
    for (Eigen::Index r = 0; r < z.size(); ++r) z(P[static_cast<std::size_t>(r)]) = x_grp(r);
    return z;
}

} // namespace detail

/**
 * Solve H z = p. auto_pick uses the block-tridiagonal path for large N
 * and falls back to dense LU (with iterative refinement) whenever the
 * banded path aborts or misses the residual tolerance. A system that
 * still misses the tolerance after refinement is reported singular with
 * its smallest singular value.
 */
inline SolutionProfile solve(const DiscretizedOcp& ocp, const SolveOptions& opt = {},
                             const DenseBackend& be = default_backend()) {
    const Eigen::VectorXd& p = ocp.p();
    const double pnorm = p.norm();
    auto rel_residual = [&](const Eigen::VectorXd& z) {
        const double scale = pnorm > 0 ? pnorm : 1.0;
        return (ocp.H() * z - p).norm() / scale;
    };

    Eigen::VectorXd z;
    const char* used = "";
    bool have = false;
    if (opt.method == SolveMethod::banded ||
        (opt.method == SolveMethod::auto_pick && ocp.N() >= 256)) {
        try {
            z = detail::solve_block_tridiag(ocp, p);
            if (rel_residual(z) <= opt.residual_tol) {
                used = "banded";
                have = true;
            } else if (opt.method == SolveMethod::banded) {
                throw std::runtime_error("solve: banded path missed the residual tolerance");
            }
        } catch (const std::runtime_error&) {
            if (opt.method == SolveMethod::banded) throw;
        }
    }
    if (!have) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(ocp.H());
        z = lu.solve(p);
        for (int round = 0; round < 2 && rel_residual(z) > opt.residual_tol; ++round)
            z += lu.solve(p - ocp.H() * z);
        used = "dense";
        if (rel_residual(z) > opt.residual_tol) {
            const Eigen::VectorXd lam = be.sym_eigenvalues(ocp.H());
            const double sigma_min = lam.cwiseAbs().minCoeff();
            throw std::runtime_error(
                "solve: system numerically singular, smallest singular value " +
                std::to_string(sigma_min));
        }
    }

    SolutionProfile prof;
    prof.N = ocp.N();
    prof.h = ocp.h();
    prof.z = std::move(z);
    prof.residual_rel = rel_residual(prof.z);
    prof.method_used = used;
    prof.s.resize(ocp.ns(), ocp.N() + 1);
    prof.lambda.resize(ocp.ns(), ocp.N() + 1);
    prof.u.resize(ocp.nu(), ocp.N());
    for (int k = 0; k <= ocp.N(); ++k) {
        prof.times.push_back(ocp.time(k));
        prof.s.col(k) = prof.z.segment(ocp.s_offset(k), ocp.ns());
        prof.lambda.col(k) = prof.z.segment(ocp.l_offset(k), ocp.ns());
        prof.s_norms.push_back(prof.s.col(k).norm());
        prof.lambda_norms.push_back(prof.lambda.col(k).norm());
        if (k < ocp.N()) {
            prof.u.col(k) = prof.z.segment(ocp.u_offset(k), ocp.nu());
            prof.u_norms.push_back(prof.u.col(k).norm());
        }
    }
    return prof;
}

struct StabilityRow {
    int N = 0;
    double h = 0;
    double sigma_min = 0;
    double norm_Hinv = 0; ///< 1 / sigma_min
    double dtilde_value = std::numeric_limits<double>::quiet_NaN();
    bool within_2dtilde = false;
};

/// sigma_min(H) and ||H^{-1}||_2 over a mesh family; with a certificate,
/// also the dtilde constant and the ||H^{-1}|| <= 2 dtilde verdict.
inline std::vector<StabilityRow> stability_sweep(const OcpScenario& sc, const std::vector<int>& Ns,
                                                 const DenseBackend& be = default_backend()) {
    sc.validate();
    std::vector<StabilityRow> rows;
    for (int N : Ns) {
        DiscretizedOcp ocp(sc, N);
        const Eigen::VectorXd lam = be.sym_eigenvalues(ocp.H());
        StabilityRow row;
        row.N = N;
        row.h = ocp.h();
        row.sigma_min = lam.cwiseAbs().minCoeff();
        row.norm_Hinv = 1.0 / row.sigma_min;
        if (sc.cert) {
            row.dtilde_value = dtilde(sc.cert->L, sc.cert->alpha);
            row.within_2dtilde = row.norm_Hinv <= 2.0 * row.dtilde_value;
        }
        rows.push_back(row);
    }
    return rows;
}

struct ConsistencyRow {
    int N = 0;
    double h = 0;
    double residual_hnorm = 0;
};

/**
 * Consistency of the discretization: solve once on a reference mesh
 * (reference_N must be a common multiple of every N), subsample that
 * solution onto each coarse mesh, and report the h-norm of the coarse
 * residual H_N z_sub - p_N. First-order consistency shows as a roughly
 * halving column when N doubles.
 */
inline std::vector<ConsistencyRow> consistency_sweep(const OcpScenario& sc,
                                                     const std::vector<int>& Ns, int reference_N,
                                                     const DenseBackend& be = default_backend()) {
    sc.validate();
    for (int N : Ns)
        if (N <= 0 || reference_N % N != 0)
            throw std::invalid_argument("consistency_sweep: reference_N must be a multiple of each N");
    DiscretizedOcp ref(sc, reference_N);
    const SolutionProfile zref = solve(ref, {}, be);

    std::vector<ConsistencyRow> rows;
    for (int N : Ns) {
        const int ratio = reference_N / N;
        DiscretizedOcp coarse(sc, N);
        Eigen::VectorXd zsub(coarse.dimension());
        for (int k = 0; k <= N; ++k) {
            zsub.segment(coarse.s_offset(k), coarse.ns()) = zref.s.col(k * ratio);
            zsub.segment(coarse.l_offset(k), coarse.ns()) = zref.lambda.col(k * ratio);
            if (k < N) zsub.segment(coarse.u_offset(k), coarse.nu()) = zref.u.col(k * ratio);
        }
        ConsistencyRow row;
        row.N = N;
        row.h = coarse.h();
        row.residual_hnorm = h_norm(coarse.H() * zsub - coarse.p(), coarse.h());
        rows.push_back(row);
    }
    return rows;
}

struct DecayProbe {
    std::string label;
    double lo = 0, hi = 0; ///< response window [lo, hi] in time
};

struct DecayResponseRow {
    std::string label;
    double lo = 0, hi = 0;
    double response = 0; ///< h-norm of the solution restricted to the window
    double bound = std::numeric_limits<double>::quiet_NaN(); ///< needs a certificate
};

/**
 * Localized response of the solution: for each probe window I, the
 * restricted h-norm sqrt(sum_{t_k in I} h ||z_k||^2) next to the
 * exponential a-priori bound
 *   8 dtilde [ e^{-d(I,0)/4dt} ||sbar|| + e^{-d(I,T)/4dt} ||lambdabar||
 *             + sum_signals e^{-d(I,supp)/4dt} (integral ||signal||^2)^{1/2} ],
 * one term per source by linearity of the solve. Bounds require a
 * verified certificate; they are NaN otherwise.
 */
inline std::vector<DecayResponseRow> decay_experiment(const OcpScenario& sc, int N,
                                                      const std::vector<DecayProbe>& probes,
                                                      const DenseBackend& be = default_backend()) {
    sc.validate();
    DiscretizedOcp ocp(sc, N);
    const SolutionProfile prof = solve(ocp, {}, be);

    double dt = std::numeric_limits<double>::quiet_NaN();
    if (sc.cert && check_stability_cert(sc, be).empty()) dt = dtilde(sc.cert->L, sc.cert->alpha);

    auto interval_dist = [](double alo, double ahi, double blo, double bhi) {
        if (ahi < blo) return blo - ahi;
        if (bhi < alo) return alo - bhi;
        return 0.0;
    };

    std::vector<DecayResponseRow> rows;
    for (const DecayProbe& probe : probes) {
        DecayResponseRow row;
        row.label = probe.label;
        row.lo = probe.lo;
        row.hi = probe.hi;
        double acc = 0.0;
        for (int k = 0; k <= N; ++k) {
            const double t = ocp.time(k);
            if (t < probe.lo || t > probe.hi) continue;
            double sq = prof.s.col(k).squaredNorm() + prof.lambda.col(k).squaredNorm();
            if (k < N) sq += prof.u.col(k).squaredNorm();
            acc += ocp.h() * sq;
        }
        row.response = std::sqrt(acc);

        if (std::isfinite(dt)) {
            double bound = std::exp(-interval_dist(probe.lo, probe.hi, 0.0, 0.0) / (4.0 * dt)) *
                           sc.sbar.norm();
            bound += std::exp(-interval_dist(probe.lo, probe.hi, sc.T, sc.T) / (4.0 * dt)) *
                     sc.lambdabar.norm();
            const std::array<std::pair<const TimeSignal*, Eigen::Index>, 3> sources{
                std::pair<const TimeSignal*, Eigen::Index>{&sc.q, sc.ns()},
                {&sc.r, sc.nu()},
                {&sc.d, sc.ns()}};
            for (const auto& [sig, dim] : sources) {
                if (sig->kind == TimeSignal::Kind::zero) continue;
                const auto [slo, shi] = sig->support(sc.T);
                const double mass = sig->sq_mass(0.0, sc.T, dim);
                if (mass <= 0) continue;
                bound += std::exp(-interval_dist(probe.lo, probe.hi, slo, shi) / (4.0 * dt)) *
                         std::sqrt(mass);
            }
            row.bound = 8.0 * dt * bound;
        }
        rows.push_back(row);
    }
    return rows;
}

struct DecayFit {
    double rate = 0;      ///< negated least-squares slope of log(magnitude)
    double intercept = 0; ///< fitted log-magnitude at t = 0
    int points = 0;
};

/**
 * Least-squares exponential-decay rate of a magnitude track on a time
 * window. Requires at least 10 in-window samples, all positive (greater
 * than 1e-300, so the logarithm is meaningful).
 */
inline DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& mags,
                               double window_lo, double window_hi) {
    if (times.size() != mags.size())
        throw std::invalid_argument("fit_decay_rate: track lengths differ");
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window_lo || times[i] > window_hi) continue;
        if (!(mags[i] > 1e-300))
            throw std::invalid_argument("fit_decay_rate: nonpositive magnitude at t=" +
                                        std::to_string(times[i]));
        ts.push_back(times[i]);
        ys.push_back(std::log(mags[i]));
    }
    if (ts.size() < 10)
        throw std::invalid_argument("fit_decay_rate: only " + std::to_string(ts.size()) +
                                    " samples in window, need at least 10");
    const auto n = static_cast<double>(ts.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sy += ys[i];
        stt += ts[i] * ts[i];
        sty += ts[i] * ys[i];
    }
    const double denom = n * stt - st * st;
    if (denom <= 0) throw std::invalid_argument("fit_decay_rate: degenerate time window");
    const double slope = (n * sty - st * sy) / denom;
    DecayFit fit;
    fit.rate = -slope;
    fit.intercept = (sy - slope * st) / n;
    fit.points = static_cast<int>(ts.size());
    return fit;
}

/// Default fit window for boundary-driven decay: [0.15 T, 0.45 T].
inline std::pair<double, double> boundary_fit_window(double T) { return {0.15 * T, 0.45 * T}; }

/// Default fit window to the right of an interior source ending at
/// src_hi: [src_hi + 0.05 T, min(src_hi + 0.30 T, 0.9 T)].
inline std::pair<double, double> interior_fit_window(double T, double src_hi) {
    return {src_hi + 0.05 * T, std::min(src_hi + 0.30 * T, 0.9 * T)};
}

} // namespace bandpinv
