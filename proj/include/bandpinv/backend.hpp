#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace bandpinv {

/// Result of a thin SVD: A = U * sigma.asDiagonal() * V^T, sigma descending.
struct SvdTriple {
    Eigen::MatrixXd U;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd V;
};

/**
 * Contract for the dense linear-algebra kernels the library relies on.
 *
 * Everything numerical funnels through these four operations so a caller
 * can substitute a different provider (tuned BLAS/LAPACK wrappers, a mock
 * that counts calls, ...) without touching the algorithms. The default
 * provider is Eigen.
 *
 * Requirements on a conforming provider:
 *  - svd: thin SVD with singular values sorted descending, factors
 *    orthonormal to ~1e-10.
 *  - multiply: exact-shape checked matrix product.
 *  - lu_solve: solve A x = b for square A (partial pivoting or better).
 *  - sym_eigenvalues: eigenvalues of a symmetric matrix, ascending.
 */
struct DenseBackend {
    std::function<SvdTriple(const Eigen::MatrixXd&)> svd;
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)> multiply;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)> lu_solve;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> sym_eigenvalues;
};

inline DenseBackend make_eigen_backend() {
    DenseBackend be;
    be.svd = [](const Eigen::MatrixXd& A) {
        SvdTriple out;
        if (A.rows() <= 32 && A.cols() <= 32) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
            out.U = svd.matrixU();
            out.sigma = svd.singularValues();
            out.V = svd.matrixV();
        } else {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
            out.U = svd.matrixU();
            out.sigma = svd.singularValues();
            out.V = svd.matrixV();
        }
        return out;
    };
    be.multiply = [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
        if (A.cols() != B.rows())
            throw std::invalid_argument("multiply: inner dimensions disagree");
        return A * B;
    };
    be.lu_solve = [](const Eigen::MatrixXd& A, const Eigen::VectorXd& b) -> Eigen::VectorXd {
        if (A.rows() != A.cols() || A.rows() != b.size())
            throw std::invalid_argument("lu_solve: shape mismatch");
        return Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);
    };
    be.sym_eigenvalues = [](const Eigen::MatrixXd& A) -> Eigen::VectorXd {
        if (A.rows() != A.cols())
            throw std::invalid_argument("sym_eigenvalues: matrix not square");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    };
    return be;
}

/// Process-wide default provider; tests may swap members and restore them.
inline DenseBackend& default_backend() {
    static DenseBackend be = make_eigen_backend();
    return be;
}

/// Spectral norm (largest singular value) through the backend.
inline double spectral_norm(const Eigen::MatrixXd& A, const DenseBackend& be = default_backend()) {
    if (A.size() == 0) return 0.0;
    const SvdTriple f = be.svd(A);
    return f.sigma.size() > 0 ? f.sigma(0) : 0.0;
}

} // namespace bandpinv
