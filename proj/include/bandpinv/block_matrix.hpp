#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandpinv/backend.hpp"
#include "bandpinv/metric.hpp"

namespace bandpinv {

/**
 * Assignment of one contiguous index range to every node of a metric
 * space. Ranges are stored as cumulative offsets in node order, so
 * disjointness and exact coverage of [0, dim) hold by construction.
 */
class BlockPartition {
public:
    BlockPartition() = default;

    BlockPartition(std::shared_ptr<const MetricSpace> space, std::vector<Eigen::Index> sizes,
                   bool allow_empty = false)
        : space_(std::move(space)) {
        if (!space_) throw std::invalid_argument("BlockPartition: null metric space");
        if (sizes.size() != space_->size())
            throw std::invalid_argument("BlockPartition: need one block size per node");
        offsets_.resize(sizes.size() + 1);
        offsets_[0] = 0;
        for (std::size_t p = 0; p < sizes.size(); ++p) {
            if (sizes[p] < 0 || (!allow_empty && sizes[p] == 0))
                throw std::invalid_argument("BlockPartition: block sizes must be positive");
            offsets_[p + 1] = offsets_[p] + sizes[p];
        }
    }

    const MetricSpace& space() const { return *space_; }
    const std::shared_ptr<const MetricSpace>& space_ptr() const { return space_; }

    std::size_t block_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    Eigen::Index dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
    Eigen::Index offset(std::size_t p) const { return offsets_.at(p); }
    Eigen::Index size(std::size_t p) const { return offsets_.at(p + 1) - offsets_.at(p); }

    bool same_layout(const BlockPartition& other) const {
        return space_ == other.space_ && offsets_ == other.offsets_;
    }

private:
    std::shared_ptr<const MetricSpace> space_;
    std::vector<Eigen::Index> offsets_;
};

inline BlockPartition uniform_partition(std::shared_ptr<const MetricSpace> space,
                                        Eigen::Index block_size) {
    if (!space) throw std::invalid_argument("uniform_partition: null metric space");
    return BlockPartition(space, std::vector<Eigen::Index>(space->size(), block_size));
}

/**
 * Dense matrix whose rows and columns are partitioned into blocks indexed
 * by the nodes of one shared metric space. `certified_bandwidth`, when
 * set, asserts that every block A[I_i, J_j] with d(i,j) above it is zero;
 * it is produced by measure_bandwidth or propagated by the algebra below.
 * The entries and partitions never change after construction.
 */
struct BandedBlockMatrix {
    BlockPartition rows;
    BlockPartition cols;
    Eigen::MatrixXd data;
    std::optional<double> certified_bandwidth;

    Eigen::Block<Eigen::MatrixXd> block(std::size_t i, std::size_t j) {
        return data.block(rows.offset(i), cols.offset(j), rows.size(i), cols.size(j));
    }
    Eigen::Block<const Eigen::MatrixXd> block(std::size_t i, std::size_t j) const {
        return data.block(rows.offset(i), cols.offset(j), rows.size(i), cols.size(j));
    }
};

inline BandedBlockMatrix make_banded(BlockPartition rows, BlockPartition cols,
                                     Eigen::MatrixXd data) {
    if (rows.space_ptr() != cols.space_ptr())
        throw std::invalid_argument("make_banded: row/column partitions index different spaces");
    if (data.rows() != rows.dim() || data.cols() != cols.dim())
        throw std::invalid_argument("make_banded: data is " + std::to_string(data.rows()) + "x" +
                                    std::to_string(data.cols()) + ", partitions give " +
                                    std::to_string(rows.dim()) + "x" + std::to_string(cols.dim()));
    return BandedBlockMatrix{std::move(rows), std::move(cols), std::move(data), std::nullopt};
}

/**
 * Smallest bandwidth certified by the entries: the largest d(i,j) over
 * blocks containing an entry above zero_tol (0 for a zero or purely
 * diagonal-block matrix). zero_tol < 0 selects the default
 * 1e-14 * max|entry|. Stores and returns the certificate.
 */
inline double measure_bandwidth(BandedBlockMatrix& A, double zero_tol = -1.0) {
    const std::size_t nb = A.rows.block_count();
    const double maxabs = A.data.size() == 0 ? 0.0 : A.data.cwiseAbs().maxCoeff();
    const double tol = zero_tol >= 0.0 ? zero_tol : 1e-14 * maxabs;
    double kappa = 0.0;
    const MetricSpace& space = A.rows.space();
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            if (A.rows.size(i) == 0 || A.cols.size(j) == 0) continue;
            if (A.block(i, j).cwiseAbs().maxCoeff() > tol)
                kappa = std::max(kappa, space.distance_by_index(i, j));
        }
    A.certified_bandwidth = kappa;
    return kappa;
}

inline double require_certificate(const BandedBlockMatrix& A, const char* who) {
    if (!A.certified_bandwidth)
        throw std::invalid_argument(std::string(who) +
                                    ": operand has no bandwidth certificate; run measure_bandwidth first");
    return *A.certified_bandwidth;
}

/// Product; certified bandwidth adds (kappa_A + kappa_C).
inline BandedBlockMatrix band_product(const BandedBlockMatrix& A, const BandedBlockMatrix& C,
                                      const DenseBackend& be = default_backend()) {
    if (!A.cols.same_layout(C.rows))
        throw std::invalid_argument("band_product: A's column partition differs from C's row partition");
    const double ka = require_certificate(A, "band_product");
    const double kc = require_certificate(C, "band_product");
    BandedBlockMatrix out{A.rows, C.cols, be.multiply(A.data, C.data), ka + kc};
    return out;
}

/// Sum; certified bandwidth is max(kappa_A, kappa_B).
inline BandedBlockMatrix band_add(const BandedBlockMatrix& A, const BandedBlockMatrix& B) {
    if (!A.rows.same_layout(B.rows) || !A.cols.same_layout(B.cols))
        throw std::invalid_argument("band_add: partitions differ");
    const double ka = require_certificate(A, "band_add");
    const double kb = require_certificate(B, "band_add");
    return BandedBlockMatrix{A.rows, A.cols, A.data + B.data, std::max(ka, kb)};
}

/// Transpose keeps the bandwidth (the metric is symmetric).
inline BandedBlockMatrix band_transpose(const BandedBlockMatrix& A) {
    return BandedBlockMatrix{A.cols, A.rows, A.data.transpose(), A.certified_bandwidth};
}

/// Zero every block with d(i,j) > kappa; result is certified at kappa.
inline BandedBlockMatrix truncate_to_band(const BandedBlockMatrix& A, double kappa) {
    if (kappa < 0) throw std::invalid_argument("truncate_to_band: negative bandwidth");
    BandedBlockMatrix out{A.rows, A.cols, A.data, kappa};
    const std::size_t nb = A.rows.block_count();
    const MetricSpace& space = A.rows.space();
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nb; ++j)
            if (space.distance_by_index(i, j) > kappa) out.block(i, j).setZero();
    return out;
}

/// Thin SVD bundled with the numerical rank at a relative cutoff.
struct SvdFactors {
    Eigen::MatrixXd left_vectors;
    Eigen::VectorXd singular_values; ///< descending
    Eigen::MatrixXd right_vectors;
    Eigen::Index numerical_rank = 0; ///< #{sigma > rank_tol * sigma_max}
};

inline SvdFactors svd_factors(const Eigen::MatrixXd& M, double rank_tol = 1e-10,
                              const DenseBackend& be = default_backend()) {
    if (M.size() == 0) throw std::invalid_argument("svd_factors: empty matrix");
    SvdTriple f = be.svd(M);
    SvdFactors out{std::move(f.U), std::move(f.sigma), std::move(f.V), 0};
    const double cut = out.singular_values.size() > 0 ? rank_tol * out.singular_values(0) : 0.0;
    for (Eigen::Index k = 0; k < out.singular_values.size(); ++k)
        if (out.singular_values(k) > cut) ++out.numerical_rank;
    return out;
}

struct SpectralInterval {
    double a = 0.0; ///< smallest singular value above the rank cutoff
    double b = 0.0; ///< largest singular value
    Eigen::Index rank = 0;
};

/**
 * Enclosing interval [a, b] of the nonzero singular values at the given
 * relative rank cutoff. Errors on an (effectively) zero matrix, which has
 * no nonzero spectrum to enclose.
 */
inline SpectralInterval spectral_interval(const Eigen::MatrixXd& M, double rank_tol = 1e-10,
                                          const DenseBackend& be = default_backend()) {
    const SvdFactors f = svd_factors(M, rank_tol, be);
    if (f.numerical_rank == 0)
        throw std::invalid_argument("spectral_interval: matrix has no nonzero singular values");
    return SpectralInterval{f.singular_values(f.numerical_rank - 1), f.singular_values(0),
                            f.numerical_rank};
}

inline SpectralInterval spectral_interval(const BandedBlockMatrix& A, double rank_tol = 1e-10,
                                          const DenseBackend& be = default_backend()) {
    return spectral_interval(A.data, rank_tol, be);
}

} // namespace bandpinv
