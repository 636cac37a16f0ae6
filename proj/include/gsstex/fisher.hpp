#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gsstex/error.hpp"
#include "gsstex/gmm.hpp"
#include "gsstex/pca.hpp"

namespace gsstex {

/// Responsibilities below this are skipped during accumulation.
inline constexpr double kPosteriorFloor = 1e-10;

/// Raw Fisher statistics of a set of (already projected) descriptors.
/// Layout: all first-order blocks (component-major, dim-minor), then all
/// second-order blocks in the same order; length 2 * k * dim.
///   first:  1/(N sqrt(w_k))    sum_x gamma_k(x) (x_d - mu_kd) / sigma_kd
///   second: 1/(N sqrt(2 w_k))  sum_x gamma_k(x) ((x_d - mu_kd)^2 / sigma_kd^2 - 1)
inline std::vector<double> fisher_statistics(const GMMModel& gmm, const RowMatrix& projected) {
    const auto n = projected.rows();
    if (n == 0) throw DataError("cannot encode an empty descriptor set");
    const auto k = static_cast<Eigen::Index>(gmm.components());
    const auto d = static_cast<Eigen::Index>(gmm.dim());
    if (projected.cols() != d) throw DataError("descriptor dimension does not match the GMM");

    std::vector<double> fv(static_cast<std::size_t>(2 * k * d), 0.0);
    double* first = fv.data();
    double* second = fv.data() + k * d;
    RowMatrix inv_sigma = gmm.variances.cwiseSqrt().cwiseInverse();
    std::vector<double> gamma(static_cast<std::size_t>(k));

    for (Eigen::Index i = 0; i < n; ++i) {
        const double* x = projected.row(i).data();
        gmm.posteriors(x, gamma.data());
        for (Eigen::Index c = 0; c < k; ++c) {
            const double g = gamma[static_cast<std::size_t>(c)];
            if (g < kPosteriorFloor) continue;
            const double* mu = gmm.means.row(c).data();
            const double* is = inv_sigma.row(c).data();
            double* f1 = first + c * d;
            double* f2 = second + c * d;
            for (Eigen::Index j = 0; j < d; ++j) {
                const double z = (x[j] - mu[j]) * is[j];
                f1[j] += g * z;
                f2[j] += g * (z * z - 1.0);
            }
        }
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        const double w = gmm.weights(c);
        const double s1 = 1.0 / (static_cast<double>(n) * std::sqrt(w));
        const double s2 = 1.0 / (static_cast<double>(n) * std::sqrt(2.0 * w));
        for (Eigen::Index j = 0; j < d; ++j) {
            first[c * d + j] *= s1;
            second[c * d + j] *= s2;
        }
    }
    return fv;
}

/// Signed power normalization followed by global L2 normalization.
inline void improve_fisher_vector(std::vector<double>& fv, double power = 0.5) {
    double norm2 = 0.0;
    for (double& v : fv) {
        v = std::copysign(std::pow(std::abs(v), power), v);
        norm2 += v * v;
    }
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw NumericError("fisher vector has zero or non-finite norm");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : fv) v *= inv;
}

/// PCA projection, Fisher statistics, then the improved normalization.
template <typename Derived>
std::vector<double> fisher_vector(const PCAModel& pca, const GMMModel& gmm, const Eigen::MatrixBase<Derived>& descriptors,
                                  double power = 0.5) {
    if (descriptors.rows() == 0) throw DataError("cannot encode an empty descriptor set");
    auto fv = fisher_statistics(gmm, pca.apply_rows(descriptors));
    improve_fisher_vector(fv, power);
    return fv;
}

}  // namespace gsstex
