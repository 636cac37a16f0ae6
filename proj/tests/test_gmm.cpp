#include <gtest/gtest.h>

#include <random>

#include "gsstex/gmm.hpp"

using gsstex::RowMatrix;

namespace {

RowMatrix two_clusters(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix x(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double cx = i % 3 == 0 ? 5.0 : -2.0;
        x(i, 0) = cx + normal(rng);
        x(i, 1) = (i % 3 == 0 ? 1.0 : 4.0) + 0.5 * normal(rng);
    }
    return x;
}

RowMatrix mixture_data(std::size_t n, std::size_t d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> comp(0, 4);
    RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = comp(rng);
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = 3.0 * c * ((j + c) % 2 ? 1 : -1) + (1.0 + 0.3 * c) * normal(rng);
    }
    return x;
}

}  // namespace

TEST(Gmm, SingleComponentIsClosedForm) {
    const auto x = mixture_data(500, 3, 1);
    gsstex::GMMOptions opt;
    opt.components = 1;
    const auto fit = gsstex::fit_gmm(x, opt);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
    EXPECT_DOUBLE_EQ(fit.model.weights(0), 1.0);
    for (Eigen::Index j = 0; j < 3; ++j) {
        EXPECT_NEAR(fit.model.means(0, j), mean(j), 1e-12 * (1.0 + std::abs(mean(j))));
        EXPECT_NEAR(fit.model.variances(0, j), var(j), 1e-12 * var(j));
    }
}

TEST(Gmm, RecoversTwoClusters) {
    gsstex::GMMOptions opt;
    opt.components = 2;
    opt.seed = 7;
    const auto fit = gsstex::fit_gmm(two_clusters(3000, 2), opt);
    const auto& m = fit.model.means;
    const Eigen::Index a = m(0, 0) > m(1, 0) ? 0 : 1, b = 1 - a;
    EXPECT_NEAR(m(a, 0), 5.0, 0.1);
    EXPECT_NEAR(m(a, 1), 1.0, 0.1);
    EXPECT_NEAR(m(b, 0), -2.0, 0.1);
    EXPECT_NEAR(m(b, 1), 4.0, 0.1);
    EXPECT_NEAR(fit.model.weights(a), 1.0 / 3.0, 0.03);
}

TEST(Gmm, LogLikelihoodNeverDecreases) {
    for (unsigned run = 0; run < 20; ++run) {
        gsstex::GMMOptions opt;
        opt.components = 5;
        opt.seed = run;
        const auto fit = gsstex::fit_gmm(mixture_data(2000, 4, 100 + run), opt);
        ASSERT_GE(fit.log_likelihood.size(), 2u);
        for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
            EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-12 * std::abs(fit.log_likelihood[i - 1]))
                << "run " << run << " iteration " << i;
    }
}

TEST(Gmm, DeterministicAcrossJobCounts) {
    const auto x = mixture_data(9000, 3, 5);
    gsstex::GMMOptions opt;
    opt.components = 4;
    opt.seed = 11;
    const auto one = gsstex::fit_gmm(x, opt);
    opt.jobs = 3;
    const auto three = gsstex::fit_gmm(x, opt);
    EXPECT_EQ(one.log_likelihood, three.log_likelihood);
    EXPECT_TRUE(one.model.means == three.model.means);
    EXPECT_TRUE(one.model.variances == three.model.variances);
}

TEST(Gmm, ModelInvariants) {
    gsstex::GMMOptions opt;
    opt.components = 5;
    const auto fit = gsstex::fit_gmm(mixture_data(1000, 3, 9), opt);
    EXPECT_NEAR(fit.model.weights.sum(), 1.0, 1e-12);
    EXPECT_GT(fit.model.weights.minCoeff(), 0.0);
    EXPECT_GE(fit.model.variances.minCoeff(), fit.variance_floor);
    std::vector<double> gamma(5);
    const Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(3, 0.5);
    fit.model.posteriors(x.data(), gamma.data());
    double s = 0.0;
    for (double g : gamma) s += g;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Gmm, ErrorPaths) {
    gsstex::GMMOptions opt;
    opt.components = 4;
    EXPECT_THROW(gsstex::fit_gmm(mixture_data(39, 2, 1), opt), gsstex::DataError);
    EXPECT_THROW(gsstex::fit_gmm(RowMatrix::Constant(100, 2, 3.0), opt), gsstex::DataError);
    opt.components = 0;
    EXPECT_THROW(gsstex::fit_gmm(mixture_data(100, 2, 1), opt), gsstex::ConfigError);
}
