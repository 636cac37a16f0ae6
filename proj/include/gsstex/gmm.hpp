#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gsstex/error.hpp"
#include "gsstex/parallel.hpp"
#include "gsstex/pca.hpp"

namespace gsstex {

/// Diagonal-covariance Gaussian mixture. Rows of means/variances are
/// components.
struct GMMModel {
    Eigen::VectorXd weights;  // k
    RowMatrix means;          // k x dim
    RowMatrix variances;      // k x dim

    std::size_t components() const noexcept { return static_cast<std::size_t>(means.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(means.cols()); }

    /// log(w_k) + log N(x | mu_k, diag(var_k)) for every component.
    void log_joint(const double* x, double* out) const {
        const auto k = means.rows(), d = means.cols();
        for (Eigen::Index c = 0; c < k; ++c) {
            const double* mu = means.row(c).data();
            const double* var = variances.row(c).data();
            double quad = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) {
                const double diff = x[j] - mu[j];
                quad += diff * diff / var[j];
            }
            out[c] = log_norm_[static_cast<std::size_t>(c)] - 0.5 * quad;
        }
    }

    /// Posterior responsibilities of x; returns log p(x).
    double posteriors(const double* x, double* gamma) const {
        log_joint(x, gamma);
        const auto k = static_cast<std::size_t>(means.rows());
        const double peak = *std::max_element(gamma, gamma + k);
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            gamma[c] = std::exp(gamma[c] - peak);
            total += gamma[c];
        }
        for (std::size_t c = 0; c < k; ++c) gamma[c] /= total;
        return peak + std::log(total);
    }

    /// Recomputes cached normalizers; call after editing parameters.
    void refresh() {
        const auto k = means.rows(), d = means.cols();
        log_norm_.assign(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index c = 0; c < k; ++c) {
            double s = std::log(weights(c)) - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
            for (Eigen::Index j = 0; j < d; ++j) s -= 0.5 * std::log(variances(c, j));
            log_norm_[static_cast<std::size_t>(c)] = s;
        }
    }

private:
    std::vector<double> log_norm_;
};

struct GMMOptions {
    std::size_t components = 256;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 100;
    double relative_tolerance = 1e-5;
    /// Floor on every variance, as a fraction of the mean per-dimension pool variance.
    double variance_floor_ratio = 1e-4;
    std::size_t jobs = 1;
};

struct GMMFit {
    GMMModel model;
    /// Mean per-sample log-likelihood before each M-step.
    std::vector<double> log_likelihood;
    std::size_t iterations = 0;
    double variance_floor = 0.0;
};

namespace detail {

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center.
inline std::vector<std::size_t> kmeanspp_seeds(const RowMatrix& data, std::size_t k, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<std::size_t> seeds;
    seeds.reserve(k);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    seeds.push_back(pick(rng));
    while (seeds.size() < k) {
        const auto last = data.row(static_cast<Eigen::Index>(seeds.back()));
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], (data.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
            total += dist[i];
        }
        if (!(total > 0.0)) {
            seeds.push_back(pick(rng));  // fewer distinct points than components
            continue;
        }
        double target = unit(rng) * total;
        std::size_t chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= dist[i];
            if (target <= 0.0 && dist[i] > 0.0) {
                chosen = i;
                break;
            }
        }
        seeds.push_back(chosen);
    }
    return seeds;
}

/// Sufficient statistics relative to a fixed shift (the previous means), for
/// numerically stable variance updates.
struct EmStats {
    Eigen::VectorXd count;   // k
    RowMatrix first;         // k x d: sum gamma (x - shift)
    RowMatrix second;        // k x d: sum gamma (x - shift)^2
    double log_likelihood = 0.0;

    EmStats(Eigen::Index k, Eigen::Index d)
        : count(Eigen::VectorXd::Zero(k)), first(RowMatrix::Zero(k, d)), second(RowMatrix::Zero(k, d)) {}

    void add(const EmStats& o) {
        count += o.count;
        first += o.first;
        second += o.second;
        log_likelihood += o.log_likelihood;
    }
};

inline void accumulate_chunk(const GMMModel& model, const RowMatrix& data, Eigen::Index begin, Eigen::Index end,
                             EmStats& stats) {
    const auto k = model.means.rows(), d = model.means.cols();
    std::vector<double> gamma(static_cast<std::size_t>(k));
    for (Eigen::Index i = begin; i < end; ++i) {
        const double* x = data.row(i).data();
        stats.log_likelihood += model.posteriors(x, gamma.data());
        for (Eigen::Index c = 0; c < k; ++c) {
            const double g = gamma[static_cast<std::size_t>(c)];
            if (g == 0.0) continue;
            stats.count(c) += g;
            const double* mu = model.means.row(c).data();
            double* s1 = stats.first.row(c).data();
            double* s2 = stats.second.row(c).data();
            for (Eigen::Index j = 0; j < d; ++j) {
                const double diff = x[j] - mu[j];
                s1[j] += g * diff;
                s2[j] += g * diff * diff;
            }
        }
    }
}

}  // namespace detail

/// EM fit of a diagonal GMM with k-means++ initialization. Stops when the
/// relative gain of the mean log-likelihood drops below the tolerance or
/// after max_iterations. The E-step is chunked and reduced in chunk order,
/// so results do not depend on the job count.
inline GMMFit fit_gmm(const RowMatrix& data, const GMMOptions& opt) {
    const auto n = static_cast<std::size_t>(data.rows());
    const auto d = data.cols();
    const auto k = static_cast<Eigen::Index>(opt.components);
    if (opt.components == 0) throw ConfigError("gmm component count must be positive");
    if (n < 10 * opt.components)
        throw DataError("gmm with " + std::to_string(opt.components) + " components needs at least " +
                        std::to_string(10 * opt.components) + " samples, got " + std::to_string(n));
    if (!data.allFinite()) throw DataError("gmm training data contains non-finite values");

    const Eigen::RowVectorXd global_mean = data.colwise().mean();
    const Eigen::RowVectorXd global_var =
        (data.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(n);
    const double mean_var = global_var.mean();
    if (!(mean_var > 0.0)) throw DataError("gmm training data is degenerate (all samples identical)");

    GMMFit fit;
    fit.variance_floor = opt.variance_floor_ratio * mean_var;
    const double floor = fit.variance_floor;

    std::mt19937_64 rng(opt.seed);
    const auto seeds = detail::kmeanspp_seeds(data, opt.components, rng);

    // Hard-assignment initialization around the seeds.
    GMMModel& model = fit.model;
    model.means.resize(k, d);
    for (Eigen::Index c = 0; c < k; ++c) model.means.row(c) = data.row(static_cast<Eigen::Index>(seeds[static_cast<std::size_t>(c)]));
    {
        Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
        RowMatrix sum = RowMatrix::Zero(k, d), sq = RowMatrix::Zero(k, d);
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            Eigen::Index best = 0;
            (model.means.rowwise() - data.row(i)).rowwise().squaredNorm().minCoeff(&best);
            count(best) += 1.0;
            sum.row(best) += data.row(i);
            sq.row(best) += data.row(i).array().square().matrix();
        }
        model.weights.resize(k);
        model.variances.resize(k, d);
        for (Eigen::Index c = 0; c < k; ++c) {
            model.weights(c) = std::max(count(c), 1.0);
            if (count(c) >= 2.0) {
                const Eigen::RowVectorXd mu = sum.row(c) / count(c);
                model.means.row(c) = mu;
                model.variances.row(c) =
                    (sq.row(c) / count(c) - mu.array().square().matrix()).cwiseMax(floor);
            } else {
                model.variances.row(c) = global_var.cwiseMax(floor);
            }
        }
        model.weights /= model.weights.sum();
        model.refresh();
    }

    constexpr Eigen::Index kChunk = 2048;
    const Eigen::Index chunks = (data.rows() + kChunk - 1) / kChunk;
    const std::size_t jobs = std::max<std::size_t>(opt.jobs, 1);
    double previous = -std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
        detail::EmStats total(k, d);
        for (Eigen::Index wave = 0; wave < chunks; wave += static_cast<Eigen::Index>(jobs)) {
            const auto in_wave = static_cast<std::size_t>(std::min<Eigen::Index>(static_cast<Eigen::Index>(jobs), chunks - wave));
            std::vector<detail::EmStats> partial(in_wave, detail::EmStats(k, d));
            parallel_for(in_wave, jobs, [&](std::size_t j) {
                const Eigen::Index begin = (wave + static_cast<Eigen::Index>(j)) * kChunk;
                detail::accumulate_chunk(model, data, begin, std::min(begin + kChunk, data.rows()), partial[j]);
            });
            for (const auto& p : partial) total.add(p);
        }

        const double ll = total.log_likelihood / static_cast<double>(n);
        if (!std::isfinite(ll)) throw NumericError("gmm log-likelihood became non-finite");
        fit.log_likelihood.push_back(ll);
        fit.iterations = iter + 1;
        const bool converged =
            std::isfinite(previous) && (ll - previous) < opt.relative_tolerance * std::abs(previous);

        // M-step
        for (Eigen::Index c = 0; c < k; ++c) {
            const double nk = total.count(c);
            if (nk <= 0.0) {
                throw NumericError("gmm component " + std::to_string(c) + " lost all responsibility");
            }
            const Eigen::RowVectorXd shift = total.first.row(c) / nk;
            model.means.row(c) += shift;
            model.variances.row(c) =
                (total.second.row(c) / nk - shift.array().square().matrix()).cwiseMax(floor);
            model.weights(c) = nk / static_cast<double>(n);
        }
        model.weights /= model.weights.sum();
        model.refresh();
        if (converged) break;
        previous = ll;
    }
    return fit;
}

}  // namespace gsstex
