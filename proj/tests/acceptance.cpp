// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsstex/gsstex.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using gsstex::GrayImage;
using gsstex::RowMatrix;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GrayImage noise_image(std::size_t n, unsigned seed, double smoothing) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 255.0);
    GrayImage img(n, n);
    for (double& v : img.pixels()) v = u(rng);
    return smoothing > 0 ? gsstex::convolve(img, gsstex::gaussian_kernel(smoothing)) : img;
}

// ---------------------------------------------------------------------------

Outcome dimensions() {
    Outcome o;
    const auto img = noise_image(70, 1, 1.0);
    for (int n : {8, 16, 24}) {
        gsstex::LBPConfig one{{{n, n / 8}}};
        o.require(gsstex::lbp_histogram(img, one).size() == static_cast<std::size_t>(n + 2),
                  "riu2 block for n=" + std::to_string(n));
    }
    const gsstex::LBPConfig lbp;
    const auto plain = gsstex::lbp_histogram(img, lbp).size();
    const auto gss = gsstex::gss_lbp_representation(gsstex::build_scale_stack(img, {1.5, 7}), lbp).size();
    const auto load = gsstex::load_at(img, 35, 35, {}).size();
    o.require(plain == 54, "lbp length " + std::to_string(plain));
    o.require(gss == 432, "gss-lbp length " + std::to_string(gss));
    o.require(load == 236, "load length " + std::to_string(load));

    gsstex::EncoderModel model;
    model.pca.mean = Eigen::VectorXd::Zero(236);
    model.pca.basis = Eigen::MatrixXd::Identity(236, 100);
    model.pca.eigenvalues = Eigen::VectorXd::Ones(100);
    model.gmm.weights = Eigen::VectorXd::Constant(256, 1.0 / 256);
    model.gmm.means = RowMatrix::Random(256, 100);
    model.gmm.variances = RowMatrix::Ones(256, 100);
    model.gmm.refresh();
    gsstex::DescriptorSet<float> set(236);
    std::vector<float> row(236, 0.1f);
    set.push_back(std::span<const float>(row), {});
    const auto fv = gsstex::encode(gsstex::EncoderBundle{{model}, ""}, set).size();
    o.require(fv == 51200, "fisher length " + std::to_string(fv));
    o.note("riu2 n+2, lbp " + std::to_string(plain) + ", gss-lbp " + std::to_string(gss) + ", load " +
           std::to_string(load) + ", fv " + std::to_string(fv));
    return o;
}

Outcome semigroup() {
    Outcome o;
    GrayImage img(64, 64);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x)
            img(x, y) = std::exp(-((x - 31.5) * (x - 31.5) + (y - 31.5) * (y - 31.5)) / 128.0);
    const auto k1 = gsstex::gaussian_kernel(1.0);
    const auto twice = gsstex::convolve(gsstex::convolve(img, k1), k1);
    const auto once = gsstex::convolve(img, gsstex::gaussian_kernel(std::sqrt(2.0)));
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(twice.pixels()[i] - once.pixels()[i]));
    o.require(worst < 1e-3, "max difference " + fmt(worst));
    double sum_err = 0.0;
    for (double sigma = 0.25; sigma <= 16.0; sigma *= 1.3) {
        const auto k = gsstex::gaussian_kernel(sigma);
        sum_err = std::max(sum_err, std::abs(std::accumulate(k.weights.begin(), k.weights.end(), 0.0) - 1.0));
    }
    o.require(sum_err <= 1e-12, "kernel sum error " + fmt(sum_err));
    o.note("max |twice(1) - once(sqrt2)| = " + fmt(worst) + ", max |sum w - 1| = " + fmt(sum_err));
    return o;
}

Outcome lbp_invariance() {
    Outcome o;
    const std::vector<std::function<double(double)>> affine = {
        [](double v) { return 2.0 * v + 3.0; }, [](double v) { return 0.25 * v - 7.0; },
        [](double v) { return 1000.0 * v + 0.5; }};
    const std::vector<std::function<double(double)>> nonlinear = {
        [](double v) { return std::pow(v / 255.0, 0.45); }, [](double v) { return std::exp(v / 40.0); }};
    std::size_t codes = 0;
    for (unsigned seed = 0; seed < 4; ++seed) {
        const auto img = noise_image(32, seed, seed % 2 ? 1.0 : 0.0);
        for (const auto& f : affine) {
            const auto mapped = gsstex::map_intensity(img, f);
            for (auto [n, r] : {std::pair{8, 1}, {16, 2}, {24, 3}})
                for (std::size_t y = 3; y < 29; ++y)
                    for (std::size_t x = 3; x < 29; ++x, ++codes)
                        if (gsstex::lbp_code(mapped, x, y, n, r) != gsstex::lbp_code(img, x, y, n, r)) {
                            o.require(false, "affine map changed a code");
                            return o;
                        }
        }
        for (const auto& f : nonlinear) {
            const auto mapped = gsstex::map_intensity(img, f);
            for (int r : {1, 2, 3})
                for (std::size_t y = 3; y < 29; ++y)
                    for (std::size_t x = 3; x < 29; ++x, ++codes)
                        if (gsstex::lbp_code(mapped, x, y, 4, r) != gsstex::lbp_code(img, x, y, 4, r)) {
                            o.require(false, "increasing map changed an on-grid code");
                            return o;
                        }
        }
    }
    double worst = 0.0;
    const gsstex::LBPConfig cfg;
    for (unsigned seed = 0; seed < 10; ++seed) {
        auto img = noise_image(64, 500 + seed, 1.0);
        const auto ref = gsstex::lbp_histogram(img, cfg);
        for (int turn = 0; turn < 3; ++turn) {
            img = gsstex::rotate90(img);
            const auto h = gsstex::lbp_histogram(img, cfg);
            double l1 = 0.0;
            for (std::size_t i = 0; i < h.size(); ++i) l1 += std::abs(h[i] - ref[i]);
            worst = std::max(worst, l1);
        }
    }
    o.require(worst < 0.02, "rotation L1 " + fmt(worst));
    o.note(std::to_string(codes) + " codes unchanged under increasing maps (affine on 8/16/24-neighbor codes, "
           "nonlinear on on-grid 4-neighbor codes); worst rotation L1 = " + fmt(worst));
    return o;
}

RowMatrix mixture(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> comp(0, 3);
    RowMatrix x(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = comp(rng);
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = 2.5 * c * (j % 2 ? 1 : -1) + (0.6 + 0.3 * c) * normal(rng);
    }
    return x;
}

Outcome em() {
    Outcome o;
    std::size_t checked = 0;
    for (unsigned run = 0; run < 20; ++run) {
        gsstex::GMMOptions opt;
        opt.components = 4;
        opt.seed = run;
        const auto fit = gsstex::fit_gmm(mixture(2000, 100 + run), opt);
        for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i, ++checked)
            if (fit.log_likelihood[i] < fit.log_likelihood[i - 1] - 1e-12 * std::abs(fit.log_likelihood[i - 1]))
                o.require(false, "log-likelihood fell in run " + std::to_string(run));
    }

    const auto x = mixture(500, 7);
    gsstex::GMMOptions one;
    one.components = 1;
    const auto fit1 = gsstex::fit_gmm(x, one);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
    const double mean_err = (fit1.model.means.row(0) - mean).cwiseAbs().maxCoeff();
    const double var_err = ((fit1.model.variances.row(0) - var).array() / var.array()).abs().maxCoeff();
    o.require(mean_err < 1e-12 && var_err < 1e-12 && fit1.model.weights(0) == 1.0, "k=1 closed form");

    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix two(3000, 2);
    for (Eigen::Index i = 0; i < two.rows(); ++i) {
        const bool first = i % 3 == 0;
        two(i, 0) = (first ? 5.0 : -2.0) + normal(rng);
        two(i, 1) = (first ? 1.0 : 4.0) + 0.5 * normal(rng);
    }
    gsstex::GMMOptions opt2;
    opt2.components = 2;
    opt2.seed = 9;
    const auto fit2 = gsstex::fit_gmm(two, opt2);
    const auto& m = fit2.model.means;
    const Eigen::Index a = m(0, 0) > m(1, 0) ? 0 : 1, b = 1 - a;
    const double err = std::max({std::abs(m(a, 0) - 5.0), std::abs(m(a, 1) - 1.0), std::abs(m(b, 0) + 2.0),
                                 std::abs(m(b, 1) - 4.0)});
    o.require(err < 0.1, "two-cluster mean error " + fmt(err));
    o.note(std::to_string(checked) + " EM steps monotone over 20 runs; k=1 mean/var error " + fmt(mean_err, 2) + "/" +
           fmt(var_err, 2) + "; two-cluster max mean error " + fmt(err));
    return o;
}

Outcome fisher() {
    Outcome o;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.3, 1.2);
    gsstex::GMMModel g;
    g.weights.resize(8);
    g.means.resize(8, 10);
    g.variances.resize(8, 10);
    for (Eigen::Index c = 0; c < 8; ++c) {
        g.weights(c) = u(rng);
        for (Eigen::Index j = 0; j < 10; ++j) {
            g.means(c, j) = 1.5 * normal(rng);
            g.variances(c, j) = u(rng);
        }
    }
    g.weights /= g.weights.sum();
    g.refresh();
    RowMatrix x(100, 10);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = 1.5 * normal(rng);
    auto fast = gsstex::fisher_statistics(g, x);
    const auto slow = oracle::fisher_statistics(g, x);
    double diff = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) diff = std::max(diff, std::abs(fast[i] - slow[i]));
    o.require(diff <= 1e-9, "oracle difference " + fmt(diff));
    gsstex::improve_fisher_vector(fast);
    double norm = 0.0;
    for (double v : fast) norm += v * v;
    norm = std::sqrt(norm);
    o.require(std::abs(norm - 1.0) <= 1e-9, "norm " + fmt(norm, 17));
    o.note("max |stream - brute force| = " + fmt(diff) + ", |norm - 1| = " + fmt(std::abs(norm - 1.0)));
    return o;
}

Outcome svm() {
    Outcome o;
    std::mt19937_64 rng(42);
    std::normal_distribution<double> normal(0.0, 1.0);
    gsstex::FeatureMatrix fm;
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 50; ++i) {
        const int label = i % 2;
        std::vector<double> x = {normal(rng) + (label ? 1.0 : -1.0), normal(rng), 0.5 * normal(rng)};
        fm.append(x, label, "s");
        xs.push_back(x);
        ys.push_back(label ? 1.0 : -1.0);
    }
    const double C = 0.7;
    const auto ref = oracle::reference_svm_qp(xs, ys, C);
    o.require(ref.kkt_ok, "reference QP did not certify its KKT conditions");
    auto max_diff = [&](const gsstex::SVMModel& m) {
        double worst = 0.0;
        for (std::size_t i = 0; i < fm.rows; ++i) {
            double ref_score = ref.w.back(), score = m.biases[1];
            for (std::size_t j = 0; j < 3; ++j) {
                ref_score += ref.w[j] * xs[i][j];
                score += m.weight(1)[j] * xs[i][j];
            }
            worst = std::max(worst, std::abs(score - ref_score));
        }
        return worst;
    };
    gsstex::SVMOptions tight;
    tight.C = C;
    tight.tolerance = 1e-12;
    tight.max_epochs = 100000;
    const double tight_diff = max_diff(gsstex::train_svm(fm, tight).model);
    gsstex::SVMOptions defaults;
    defaults.C = C;
    const double default_diff = max_diff(gsstex::train_svm(fm, defaults).model);
    o.require(tight_diff <= 1e-4, "decision difference " + fmt(tight_diff));

    gsstex::FeatureMatrix sep;
    for (int i = 0; i < 60; ++i) {
        const int label = i % 3;
        const double angle = 2.0 * std::numbers::pi * label / 3.0;
        sep.append(std::vector<double>{4.0 * std::cos(angle) + 0.3 * normal(rng), 4.0 * std::sin(angle) + 0.3 * normal(rng)},
                   label, "s");
    }
    const auto model = gsstex::train_svm(sep, {}).model;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < sep.rows; ++i) correct += gsstex::predict(model, sep.row(i)).label == sep.labels[i];
    o.require(correct == sep.rows, "separable accuracy " + std::to_string(correct) + "/" + std::to_string(sep.rows));
    o.note("max decision difference " + fmt(tight_diff) + " at gap tol 1e-12 (" + fmt(default_diff) +
           " at the default 1e-4); separable train accuracy " + std::to_string(correct) + "/" +
           std::to_string(sep.rows));
    return o;
}

bool partition_ok(const gsstex::DatasetManifest& m, std::size_t expected_folds, std::string& why) {
    const auto folds = gsstex::loso_splits(m);
    if (folds.size() != expected_folds) {
        why = "fold count " + std::to_string(folds.size());
        return false;
    }
    std::vector<int> tested(m.entries.size(), 0);
    for (const auto& f : folds) {
        std::set<std::string> train;
        for (std::size_t i : f.train) train.insert(m.entries[i].specimen);
        for (std::size_t i : f.test) {
            ++tested[i];
            if (train.count(m.entries[i].specimen)) {
                why = "specimen in both train and test";
                return false;
            }
        }
    }
    if (std::any_of(tested.begin(), tested.end(), [](int t) { return t != 1; })) {
        why = "a row was not tested exactly once";
        return false;
    }
    return true;
}

Outcome loso_partition(const gsstex::DatasetManifest& synthetic) {
    Outcome o;
    gsstex::DatasetManifest full;
    for (std::size_t i = 0; i < 13596; ++i) {
        const std::size_t specimen = i % 83;
        full.entries.push_back({"cell_" + std::to_string(i) + ".pgm", std::string(gsstex::kCanonicalClasses[specimen % 6]),
                                "specimen_" + std::to_string(specimen)});
    }
    std::string why;
    o.require(partition_ok(full, 83, why), "full-shape manifest: " + why);
    o.require(partition_ok(synthetic, 30, why), "synthetic manifest: " + why);
    o.note("83 folds over 13596 rows, 30 folds over " + std::to_string(synthetic.entries.size()) +
           " synthetic rows; every row tested once, specimens disjoint");
    return o;
}

Outcome ablation(const gsstex::DatasetManifest& corpus) {
    Outcome o;
    for (auto framework : {gsstex::Framework::Lbp, gsstex::Framework::Bow}) {
        gsstex::RunConfig cfg;
        cfg.framework = framework;
        cfg.seed = 7;
        cfg.encode.pca_dim = 24;
        cfg.encode.gmm_k = 16;
        cfg.encode.max_train_descriptors = 20000;
        const auto cache = gsstex::compute_features(corpus, cfg);
        std::vector<double> score;
        for (int k : {0, 1, 7}) {
            auto c = cfg;
            c.gss.count = k;
            score.push_back(gsstex::run_loso(corpus, cache, c, {.log = nullptr}).mca_counts.value_or(0.0));
        }
        const std::string name = gsstex::to_string(framework);
        o.require(score[0] >= 0.6 && score[0] <= 0.9, name + " K=0 MCA outside [0.6, 0.9]");
        o.require(score[2] >= score[0] + 0.03, name + " K=7 gain below 0.03");
        o.require(score[1] > score[0], name + " K=1 not above K=0");
        o.note(name + " MCA K=0 " + fmt(score[0]) + ", K=1 " + fmt(score[1]) + ", K=7 " + fmt(score[2]));
    }
    return o;
}

Outcome published_row() {
    Outcome o;
    const std::vector<double> row = {88.43, 59.53, 87.77, 90.69, 88.99, 76.76};
    const double v = gsstex::mca(row);
    o.require(std::abs(v - 82.03) <= 0.005, "mca " + fmt(v, 8));
    o.note("mca = " + fmt(v, 8) + "%");
    return o;
}

Outcome timing(const gsstex::DatasetManifest& corpus, const fs::path& dir) {
    Outcome o;
    gsstex::SynthOptions opt;
    opt.per_class = 2;
    opt.specimens_per_class = 1;
    opt.size = 70;
    opt.noise = 25.0;
    opt.seed = 99;
    const auto cells = gsstex::write_synthetic_corpus(dir / "cells70", opt);
    const gsstex::RunConfig cfg;

    auto t0 = std::chrono::steady_clock::now();
    for (const auto& e : cells.entries) (void)gsstex::lbp_features(gsstex::prepare_image(e.path, cfg), cfg);
    const double lbp_per_image = seconds_since(t0) / static_cast<double>(cells.entries.size());

    // Default-size encoder (PCA 100, 256 components); fitted briefly, fitting is not timed.
    std::vector<gsstex::DescriptorSet<float>> sets;
    for (std::size_t i = 0; i < 3; ++i) sets.push_back(gsstex::bow_descriptors<float>(gsstex::prepare_image(cells.entries[i].path, cfg), cfg));
    std::vector<const gsstex::DescriptorSet<float>*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);
    auto enc = cfg.encoder_options();
    enc.max_train_descriptors = 8000;
    enc.em_max_iterations = 3;
    const auto bundle = gsstex::fit_encoder(ptrs, enc);

    t0 = std::chrono::steady_clock::now();
    std::size_t dim = 0;
    const std::size_t timed = 4;
    for (std::size_t i = 0; i < timed; ++i) {
        const auto d = gsstex::bow_descriptors<float>(gsstex::prepare_image(cells.entries[i].path, cfg), cfg);
        dim = gsstex::encode(bundle, d).size();
    }
    const double bow_per_image = seconds_since(t0) / static_cast<double>(timed);
    o.require(lbp_per_image <= 0.4, "gss-lbp " + fmt(lbp_per_image) + " s/image");
    o.require(bow_per_image <= 3.2, "bow " + fmt(bow_per_image) + " s/image");
    o.require(dim == 51200, "bow feature length " + std::to_string(dim));
    o.note("gss-lbp " + fmt(lbp_per_image, 3) + " s/image, bow (7744 descriptors, 51200-dim FV) " +
           fmt(bow_per_image, 3) + " s/image on 70x70");
    (void)corpus;
    return o;
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "gsstex_acceptance";
    fs::remove_all(dir);

    gsstex::SynthOptions synth;
    synth.per_class = 50;
    synth.specimens_per_class = 5;
    synth.size = 40;
    synth.noise = 25.0;
    synth.seed = 2024;
    const auto corpus = gsstex::write_synthetic_corpus(dir / "corpus", synth);

    struct Criterion {
        int id;
        const char* name;
        double budget;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "dimension contracts", 1.0, dimensions},
        {2, "gaussian semigroup", 1.0, semigroup},
        {3, "lbp invariances", 5.0, lbp_invariance},
        {4, "em correctness", 30.0, em},
        {5, "fisher vector oracle", 5.0, fisher},
        {6, "svm oracle", 10.0, svm},
        {7, "loso partition", 1.0, [&] { return loso_partition(corpus); }},
        {8, "gss ablation", 600.0, [&] { return ablation(corpus); }},
        {9, "published mca arithmetic", 1.0, published_row},
        {10, "timing budgets", 60.0, [&] { return timing(corpus, dir); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double s = seconds_since(t0);
        if (s > c.budget) o.require(false, "runtime " + fmt(s, 3) + " s over " + fmt(c.budget) + " s budget");
        std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), s);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
