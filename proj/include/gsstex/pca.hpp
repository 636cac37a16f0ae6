#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "gsstex/error.hpp"

namespace gsstex {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PCAModel {
    Eigen::VectorXd mean;        // in_dim
    Eigen::MatrixXd basis;       // in_dim x out_dim, orthonormal columns
    Eigen::VectorXd eigenvalues; // out_dim, descending

    std::size_t in_dim() const noexcept { return static_cast<std::size_t>(basis.rows()); }
    std::size_t out_dim() const noexcept { return static_cast<std::size_t>(basis.cols()); }

    /// basis^T (x - mean)
    Eigen::VectorXd apply(std::span<const double> x) const {
        if (x.size() != in_dim())
            throw DataError("pca input has " + std::to_string(x.size()) + " dims, model expects " +
                            std::to_string(in_dim()));
        const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        return basis.transpose() * (v - mean);
    }

    /// Projects every row of `rows` (n x in_dim).
    template <typename Derived>
    RowMatrix apply_rows(const Eigen::MatrixBase<Derived>& rows) const {
        if (static_cast<std::size_t>(rows.cols()) != in_dim())
            throw DataError("pca input dimension mismatch");
        RowMatrix out = (rows.template cast<double>().rowwise() - mean.transpose()) * basis;
        return out;
    }

    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coords) const { return mean + basis * coords; }
};

/// Top-out_dim eigenbasis of the sample covariance of `pool` (one sample per
/// row). Columns are ordered by descending eigenvalue and signed so that each
/// column's largest-magnitude entry is positive.
template <typename Derived>
PCAModel fit_pca(const Eigen::MatrixBase<Derived>& pool, std::size_t out_dim) {
    const auto n = static_cast<std::size_t>(pool.rows());
    const auto dim = static_cast<std::size_t>(pool.cols());
    if (out_dim == 0 || out_dim > dim)
        throw ConfigError("pca output dimension " + std::to_string(out_dim) + " must be in [1, " +
                          std::to_string(dim) + "]");
    if (n <= out_dim)
        throw DataError("pca needs more than " + std::to_string(out_dim) + " samples, got " + std::to_string(n));
    if (!pool.allFinite()) throw DataError("pca training pool contains non-finite values");

    PCAModel model;
    model.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    constexpr Eigen::Index kBlock = 4096;
    const Eigen::Index rows = pool.rows();
    for (Eigen::Index i = 0; i < rows; i += kBlock) {
        const Eigen::Index b = std::min(kBlock, rows - i);
        model.mean += pool.middleRows(i, b).template cast<double>().colwise().sum().transpose();
    }
    model.mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < rows; i += kBlock) {
        const Eigen::Index b = std::min(kBlock, rows - i);
        const Eigen::MatrixXd centered =
            pool.middleRows(i, b).template cast<double>().rowwise() - model.mean.transpose();
        cov.noalias() += centered.transpose() * centered;
    }
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
    const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
    const double largest = std::max(values(values.size() - 1), 0.0);
    const double threshold = std::max(largest, 1e-300) * 1e-12 * static_cast<double>(dim);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values(i) > threshold) ++rank;
    if (rank < out_dim)
        throw NumericError("pca pool has rank " + std::to_string(rank) + ", below requested " +
                           std::to_string(out_dim) + " components");

    model.basis.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(out_dim));
    model.eigenvalues.resize(static_cast<Eigen::Index>(out_dim));
    for (std::size_t c = 0; c < out_dim; ++c) {
        const Eigen::Index src = static_cast<Eigen::Index>(dim - 1 - c);
        Eigen::VectorXd col = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col(arg) < 0) col = -col;
        model.basis.col(static_cast<Eigen::Index>(c)) = col;
        model.eigenvalues(static_cast<Eigen::Index>(c)) = values(src);
    }
    return model;
}

}  // namespace gsstex
