#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gsstex/binary_io.hpp"
#include "gsstex/error.hpp"
#include "gsstex/parallel.hpp"
#include "gsstex/seed.hpp"

namespace gsstex {

/// Row-major samples with class ids and specimen ids.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::string> specimens;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

    void append(std::span<const double> x, int label, std::string specimen) {
        if (rows == 0 && dim == 0) dim = x.size();
        if (x.size() != dim) throw DataError("feature row has " + std::to_string(x.size()) + " values, expected " +
                                             std::to_string(dim));
        values.insert(values.end(), x.begin(), x.end());
        labels.push_back(label);
        specimens.push_back(std::move(specimen));
        ++rows;
    }

    FeatureMatrix subset(std::span<const std::size_t> indices) const {
        FeatureMatrix out;
        out.dim = dim;
        for (std::size_t i : indices) out.append(row(i), labels[i], specimens[i]);
        return out;
    }

    int num_classes() const {
        return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    }

    void validate() const {
        if (values.size() != rows * dim || labels.size() != rows || specimens.size() != rows)
            throw DataError("feature matrix fields disagree on row count");
        for (int l : labels)
            if (l < 0) throw DataError("negative class label in feature matrix");
    }
};

struct SVMModel {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    double C = 1.0;
    std::vector<double> weights;  // num_classes x dim
    std::vector<double> biases;   // num_classes

    std::span<const double> weight(std::size_t c) const { return {weights.data() + c * dim, dim}; }
};

struct SVMOptions {
    double C = 1.0;
    double tolerance = 1e-4;  // duality gap per binary problem
    std::size_t max_epochs = 1000;
    std::uint64_t seed = 0;
    /// Scale C per sample by n / (num_classes * n_class).
    bool class_weighting = false;
    /// Standardize features per dimension; folded back into the weights.
    bool standardize = false;
    std::size_t jobs = 1;
};

/// Per-binary-problem solver trace.
struct BinaryTrace {
    std::vector<double> dual_objective;  // after each epoch
    double duality_gap = 0.0;
    std::size_t epochs = 0;
    bool converged = false;
};

struct SVMTrainResult {
    SVMModel model;
    std::vector<BinaryTrace> traces;
};

namespace detail {

/// Augmented Gram matrix K_ij = x_i . x_j + 1, shared by the one-vs-rest
/// problems when the sample count is small relative to the dimension.
inline std::vector<double> augmented_gram(const std::vector<double>& x, std::size_t n, std::size_t dim) {
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * dim;
        for (std::size_t j = 0; j <= i; ++j) {
            const double* xj = x.data() + j * dim;
            k[i * n + j] = k[j * n + i] = std::inner_product(xi, xi + dim, xj, 0.0) + 1.0;
        }
    }
    return k;
}

inline bool prefer_gram(std::size_t n, std::size_t dim) { return n <= 4096 && n < 2 * (dim + 1); }

/// L2-regularized hinge-loss SVM on augmented inputs [x, 1], solved in the
/// dual by coordinate descent. Returns w with the bias as the last entry.
/// With a Gram matrix the dual gradient is kept up to date instead of w, so
/// an update and the per-epoch gap cost O(n) rather than O(dim).
inline std::vector<double> solve_binary_svm(const std::vector<double>& x, std::size_t n, std::size_t dim,
                                            const std::vector<double>& y, const std::vector<double>& upper,
                                            const SVMOptions& opt, std::uint64_t seed, BinaryTrace& trace,
                                            const std::vector<double>* gram = nullptr) {
    const std::size_t d1 = dim + 1;
    std::vector<double> w(d1, 0.0), alpha(n, 0.0), qdiag(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * dim;
        qdiag[i] = gram ? (*gram)[i * n + i] : std::inner_product(xi, xi + dim, xi, 0.0) + 1.0;
    }
    auto margin = [&](std::size_t i) {
        const double* xi = x.data() + i * dim;
        return std::inner_product(xi, xi + dim, w.data(), 0.0) + w[dim];
    };
    // grad[i] = y_i w.[x_i, 1] - 1, maintained only on the Gram path.
    std::vector<double> grad(gram ? n : 0, -1.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) {
            const double g = gram ? grad[i] : y[i] * margin(i) - 1.0;
            const double a = std::clamp(alpha[i] - g / qdiag[i], 0.0, upper[i]);
            const double delta = (a - alpha[i]) * y[i];
            if (delta == 0.0) continue;
            alpha[i] = a;
            if (gram) {
                const double* ki = gram->data() + i * n;
                for (std::size_t j = 0; j < n; ++j) grad[j] += delta * y[j] * ki[j];
            } else {
                const double* xi = x.data() + i * dim;
                for (std::size_t j = 0; j < dim; ++j) w[j] += delta * xi[j];
                w[dim] += delta;
            }
        }
        double wnorm2 = 0.0, hinge = 0.0, alpha_sum = 0.0;
        if (gram) {
            for (std::size_t i = 0; i < n; ++i) {
                wnorm2 += alpha[i] * (grad[i] + 1.0);
                hinge += upper[i] * std::max(0.0, -grad[i]);
                alpha_sum += alpha[i];
            }
        } else {
            wnorm2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                hinge += upper[i] * std::max(0.0, 1.0 - y[i] * margin(i));
                alpha_sum += alpha[i];
            }
        }
        const double dual = alpha_sum - 0.5 * wnorm2;
        const double primal = 0.5 * wnorm2 + hinge;
        trace.dual_objective.push_back(dual);
        trace.duality_gap = primal - dual;
        trace.epochs = epoch + 1;
        if (trace.duality_gap <= opt.tolerance) {
            trace.converged = true;
            break;
        }
    }
    if (gram)
        for (std::size_t i = 0; i < n; ++i) {
            if (alpha[i] == 0.0) continue;
            const double* xi = x.data() + i * dim;
            const double coef = alpha[i] * y[i];
            for (std::size_t j = 0; j < dim; ++j) w[j] += coef * xi[j];
            w[dim] += coef;
        }
    if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }))
        throw NumericError("svm weights became non-finite");
    return w;
}

}  // namespace detail

/// One-vs-rest linear SVM. Each binary problem uses its own seeded visiting
/// order, so the result does not depend on the job count.
inline SVMTrainResult train_svm(const FeatureMatrix& data, const SVMOptions& opt) {
    data.validate();
    if (!(opt.C > 0.0)) throw ConfigError("svm.C must be positive");
    if (data.rows == 0 || data.dim == 0) throw DataError("svm training set is empty");
    for (double v : data.values)
        if (!std::isfinite(v)) throw DataError("svm training features contain NaN or Inf");
    const auto k = static_cast<std::size_t>(data.num_classes());
    std::vector<std::size_t> per_class(k, 0);
    for (int l : data.labels) ++per_class[static_cast<std::size_t>(l)];
    const auto present = std::count_if(per_class.begin(), per_class.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) throw DataError("svm training needs at least two classes");
    for (std::size_t c = 0; c < k; ++c)
        if (per_class[c] == 0) throw DataError("svm training set has no samples of class " + std::to_string(c));

    const std::size_t n = data.rows, dim = data.dim;
    std::vector<double> shift(dim, 0.0), scale(dim, 1.0);
    std::vector<double> x = data.values;
    if (opt.standardize) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) shift[j] += x[i * dim + j];
        for (double& m : shift) m /= static_cast<double>(n);
        std::vector<double> var(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                const double dlt = x[i * dim + j] - shift[j];
                var[j] += dlt * dlt;
            }
        for (std::size_t j = 0; j < dim; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(n));
            scale[j] = sd > 1e-12 ? sd : 1.0;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) x[i * dim + j] = (x[i * dim + j] - shift[j]) / scale[j];
    }

    std::vector<double> upper(n, opt.C);
    if (opt.class_weighting)
        for (std::size_t i = 0; i < n; ++i)
            upper[i] = opt.C * static_cast<double>(n) /
                       (static_cast<double>(present) * static_cast<double>(per_class[static_cast<std::size_t>(data.labels[i])]));

    SVMTrainResult result;
    auto& model = result.model;
    model.num_classes = k;
    model.dim = dim;
    model.C = opt.C;
    model.weights.assign(k * dim, 0.0);
    model.biases.assign(k, 0.0);
    result.traces.resize(k);

    const std::vector<double> gram = detail::prefer_gram(n, dim) ? detail::augmented_gram(x, n, dim) : std::vector<double>{};
    parallel_for(k, opt.jobs, [&](std::size_t c) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = data.labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        const auto w = detail::solve_binary_svm(x, n, dim, y, upper, opt, derive_seed(opt.seed, "svm", c),
                                                result.traces[c], gram.empty() ? nullptr : &gram);
        double bias = w[dim];
        for (std::size_t j = 0; j < dim; ++j) {
            model.weights[c * dim + j] = w[j] / scale[j];
            bias -= w[j] * shift[j] / scale[j];
        }
        model.biases[c] = bias;
    });
    return result;
}

struct Prediction {
    int label = 0;
    std::vector<double> scores;
};

/// Argmax of w_c . x + b_c; ties go to the lowest class id.
inline Prediction predict(const SVMModel& model, std::span<const double> x) {
    if (x.size() != model.dim)
        throw DataError("feature has " + std::to_string(x.size()) + " dims, model expects " + std::to_string(model.dim));
    Prediction p;
    p.scores.resize(model.num_classes);
    for (std::size_t c = 0; c < model.num_classes; ++c) {
        const auto w = model.weight(c);
        p.scores[c] = std::inner_product(w.begin(), w.end(), x.begin(), 0.0) + model.biases[c];
        if (p.scores[c] > p.scores[static_cast<std::size_t>(p.label)]) p.label = static_cast<int>(c);
    }
    return p;
}

/// u32 num_classes, u64 dim, f64 C, f64 weights (row-major), f64 biases.
inline void save_svm(const SVMModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write svm model: " + path.string());
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_classes));
    binio::write_le<std::uint64_t>(out, model.dim);
    binio::write_le<double>(out, model.C);
    for (double v : model.weights) binio::write_le<double>(out, v);
    for (double v : model.biases) binio::write_le<double>(out, v);
    if (!out) throw DataError("failed writing svm model: " + path.string());
}

inline SVMModel load_svm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open svm model: " + path.string());
    SVMModel m;
    m.num_classes = binio::read_le<std::uint32_t>(in);
    m.dim = binio::read_le<std::uint64_t>(in);
    if (m.num_classes == 0 || m.dim == 0 || m.dim > (std::uint64_t{1} << 32))
        throw DataError("svm model header out of range: " + path.string());
    m.C = binio::read_le<double>(in);
    m.weights.resize(m.num_classes * m.dim);
    for (double& v : m.weights) v = binio::read_le<double>(in);
    m.biases.resize(m.num_classes);
    for (double& v : m.biases) v = binio::read_le<double>(in);
    return m;
}

/// CSV fallback: header line, then `label,specimen,f0,f1,...` per row.
inline void write_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature csv: " + path.string());
    out << "label,specimen";
    for (std::size_t j = 0; j < fm.dim; ++j) out << ",f" << j;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < fm.rows; ++i) {
        out << fm.labels[i] << ',' << fm.specimens[i];
        for (double v : fm.row(i)) out << ',' << v;
        out << '\n';
    }
}

inline FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature csv: " + path.string());
    std::string line;
    std::getline(in, line);  // header
    FeatureMatrix fm;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell, specimen;
        std::getline(ss, cell, ',');
        std::getline(ss, specimen, ',');
        int label = 0;
        std::vector<double> row;
        try {
            label = std::stoi(cell);
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        } catch (const std::logic_error&) {
            throw DataError("malformed feature csv at line " + std::to_string(line_no));
        }
        fm.append(row, label, specimen);
    }
    return fm;
}

}  // namespace gsstex
