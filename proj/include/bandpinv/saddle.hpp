#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "bandpinv/backend.hpp"

namespace bandpinv {

/// Symmetric saddle-point system A = [[G, F^T], [F, 0]] for symmetric G
/// (n x n) and wide F (m x n, m <= n).
struct SaddleSystem {
    Eigen::MatrixXd G;
    Eigen::MatrixXd F;
    Eigen::MatrixXd A;
};

inline SaddleSystem assemble_saddle(const Eigen::MatrixXd& G, const Eigen::MatrixXd& F) {
    const Eigen::Index n = G.rows();
    if (G.cols() != n) throw std::invalid_argument("assemble_saddle: G not square");
    const double gscale = G.size() ? G.cwiseAbs().maxCoeff() : 0.0;
    if (gscale > 0 && (G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * gscale)
        throw std::invalid_argument("assemble_saddle: G not symmetric");
    const Eigen::Index m = F.rows();
    if (F.cols() != n)
        throw std::invalid_argument("assemble_saddle: F has " + std::to_string(F.cols()) +
                                    " columns, expected " + std::to_string(n));
    if (m > n) throw std::invalid_argument("assemble_saddle: F must be wide (m <= n)");

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + m, n + m);
    A.topLeftCorner(n, n) = 0.5 * (G + G.transpose());
    A.topRightCorner(n, m) = F.transpose();
    A.bottomLeftCorner(m, n) = F;
    return SaddleSystem{A.topLeftCorner(n, n), F, std::move(A)};
}

/**
 * The four spectral quantities the singular-value enclosure is built
 * from. Estimated from (G, F) by dense symmetric eigendecompositions:
 *   theta1 = max(lambda_max(G), 0)
 *   theta2 = lambda_min(F F^T)    (constraint-qualification margin)
 *   theta3 = lambda_max(F F^T)
 *   theta4 = lambda_min(G + F^T F) (second-order-condition margin)
 */
struct ThetaCertificate {
    double theta1 = 0, theta2 = 0, theta3 = 0, theta4 = 0;
};

inline ThetaCertificate estimate_thetas(const Eigen::MatrixXd& G, const Eigen::MatrixXd& F,
                                        double rank_tol = 1e-10,
                                        const DenseBackend& be = default_backend()) {
    const SaddleSystem sys = assemble_saddle(G, F); // reuse the shape/symmetry checks
    ThetaCertificate th;
    const Eigen::VectorXd lamG = be.sym_eigenvalues(sys.G);
    th.theta1 = std::max(lamG(lamG.size() - 1), 0.0);
    const Eigen::MatrixXd FFt = be.multiply(F, F.transpose());
    const Eigen::VectorXd lamFFt = be.sym_eigenvalues(FFt);
    th.theta2 = lamFFt(0);
    th.theta3 = lamFFt(lamFFt.size() - 1);
    const Eigen::MatrixXd K = sys.G + be.multiply(F.transpose(), F);
    const Eigen::VectorXd lamK = be.sym_eigenvalues(K);
    th.theta4 = lamK(0);

    if (th.theta2 <= rank_tol * std::max(1.0, th.theta3))
        throw std::invalid_argument(
            "estimate_thetas: constraint rows numerically rank deficient (LICQ fails), "
            "lambda_min(FF^T) = " + std::to_string(th.theta2));
    if (th.theta4 <= rank_tol * std::max(1.0, std::abs(lamK(lamK.size() - 1))))
        throw std::invalid_argument(
            "estimate_thetas: G + F^T F not positive definite (SOSC fails), lambda_min = " +
            std::to_string(th.theta4));
    return th;
}

struct SingularInterval {
    double lo = 0, hi = 0;
};

/// Certified enclosure of the singular values of [[G, F^T],[F, 0]]:
///   lo = 1 / ( sqrt((1 + theta1/theta2)/theta4) + max(1/theta4, theta1/theta2) )
///   hi = theta1 + sqrt(theta3)
inline SingularInterval singular_interval(const ThetaCertificate& th) {
    if (!(th.theta2 > 0) || !(th.theta4 > 0))
        throw std::invalid_argument("singular_interval: certificate requires theta2, theta4 > 0");
    const double ratio = th.theta1 / th.theta2;
    const double lo =
        1.0 / (std::sqrt((1.0 + ratio) / th.theta4) + std::max(1.0 / th.theta4, ratio));
    const double hi = th.theta1 + std::sqrt(th.theta3);
    return SingularInterval{lo, hi};
}

/// Rescaling map for systems certified as G + delta F^T F positive
/// definite: apply the enclosure to (G/delta, F/sqrt(delta)) instead.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> scale_saddle(const Eigen::MatrixXd& G,
                                                                const Eigen::MatrixXd& F,
                                                                double delta) {
    if (!(delta > 0)) throw std::invalid_argument("scale_saddle: delta must be positive");
    return {G / delta, F / std::sqrt(delta)};
}

} // namespace bandpinv
