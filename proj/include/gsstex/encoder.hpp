#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gsstex/binary_io.hpp"
#include "gsstex/error.hpp"
#include "gsstex/fisher.hpp"
#include "gsstex/gmm.hpp"
#include "gsstex/load_descriptor.hpp"
#include "gsstex/pca.hpp"
#include "gsstex/seed.hpp"

namespace gsstex {

struct EncoderOptions {
    std::size_t pca_dim = 100;
    std::size_t gmm_k = 256;
    std::size_t codebooks = 1;
    std::size_t max_train_descriptors = 1'000'000;
    std::size_t em_max_iterations = 100;
    double em_tolerance = 1e-5;
    double power = 0.5;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

/// One fitted codebook: PCA basis plus GMM over the projected space.
struct EncoderModel {
    PCAModel pca;
    GMMModel gmm;
    double power = 0.5;

    std::size_t fisher_dim() const noexcept { return 2 * gmm.components() * gmm.dim(); }
};

/// Fitted codebooks; encoding concatenates one Fisher vector per codebook.
struct EncoderBundle {
    std::vector<EncoderModel> codebooks;
    std::string config_echo;

    std::size_t fisher_dim() const noexcept {
        std::size_t n = 0;
        for (const auto& c : codebooks) n += c.fisher_dim();
        return n;
    }
};

template <typename Real>
Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_matrix(const DescriptorSet<Real>& set) {
    return {set.values().data(), static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(set.dim())};
}

/// Uniform subsample without replacement of at most `limit` descriptors drawn
/// across all sets (selection sampling, so the pool is streamed once).
template <typename Real>
RowMatrix sample_training_pool(const std::vector<const DescriptorSet<Real>*>& sets, std::size_t limit,
                               std::uint64_t seed) {
    std::size_t total = 0, dim = 0;
    for (const auto* s : sets) {
        if (s->empty()) continue;
        if (dim == 0) dim = s->dim();
        if (s->dim() != dim) throw DataError("descriptor sets disagree on dimension");
        total += s->size();
    }
    if (total == 0) throw DataError("no training descriptors available for the encoder");
    const std::size_t want = std::min(limit, total);
    RowMatrix pool(static_cast<Eigen::Index>(want), static_cast<Eigen::Index>(dim));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t seen = 0, taken = 0;
    for (const auto* s : sets)
        for (std::size_t i = 0; i < s->size() && taken < want; ++i, ++seen) {
            const bool take = want == total ||
                              static_cast<double>(total - seen) * unit(rng) < static_cast<double>(want - taken);
            if (!take) continue;
            const auto row = s->row(i);
            for (std::size_t j = 0; j < dim; ++j)
                pool(static_cast<Eigen::Index>(taken), static_cast<Eigen::Index>(j)) = row[j];
            ++taken;
        }
    return pool;
}

inline EncoderModel fit_codebook(const RowMatrix& pool, const EncoderOptions& opt, std::uint64_t gmm_seed) {
    EncoderModel model;
    model.power = opt.power;
    model.pca = fit_pca(pool, opt.pca_dim);
    const RowMatrix projected = model.pca.apply_rows(pool);
    GMMOptions g;
    g.components = opt.gmm_k;
    g.seed = gmm_seed;
    g.max_iterations = opt.em_max_iterations;
    g.relative_tolerance = opt.em_tolerance;
    g.jobs = opt.jobs;
    model.gmm = fit_gmm(projected, g).model;
    return model;
}

template <typename Real>
EncoderBundle fit_encoder(const std::vector<const DescriptorSet<Real>*>& sets, const EncoderOptions& opt) {
    if (opt.codebooks == 0) throw ConfigError("encode.codebooks must be >= 1");
    EncoderBundle bundle;
    for (std::size_t c = 0; c < opt.codebooks; ++c) {
        const RowMatrix pool =
            sample_training_pool(sets, opt.max_train_descriptors, derive_seed(opt.seed, "encoder-pool", c));
        bundle.codebooks.push_back(fit_codebook(pool, opt, derive_seed(opt.seed, "gmm-init", c)));
    }
    return bundle;
}

template <typename Real>
std::vector<double> encode(const EncoderBundle& bundle, const DescriptorSet<Real>& set) {
    if (set.empty()) throw DataError("cannot encode an empty descriptor set");
    std::vector<double> out;
    out.reserve(bundle.fisher_dim());
    for (const auto& cb : bundle.codebooks) {
        const auto fv = fisher_vector(cb.pca, cb.gmm, as_matrix(set), cb.power);
        out.insert(out.end(), fv.begin(), fv.end());
    }
    return out;
}

namespace detail {

inline constexpr std::uint32_t kEncoderMagic = 0x4E455347;  // "GSEN"
inline constexpr std::uint32_t kEncoderVersion = 1;

template <typename M>
void write_matrix(std::ostream& out, const M& m) {
    binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) binio::write_le<double>(out, m(r, c));
}

template <typename M>
M read_matrix(std::istream& in) {
    const auto rows = binio::read_le<std::uint64_t>(in);
    const auto cols = binio::read_le<std::uint64_t>(in);
    if (rows > (1u << 24) || cols > (1u << 24)) throw DataError("encoder matrix size out of range");
    M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = binio::read_le<double>(in);
    return m;
}

}  // namespace detail

/// Container: magic, version, codebook count, per codebook
/// {power, pca mean, pca basis, pca eigenvalues, gmm weights, means,
/// variances}, then the config echo. Matrices are (u64 rows, u64 cols,
/// row-major f64); everything little-endian.
inline void save_encoder(const EncoderBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write encoder file: " + path.string());
    binio::write_le(out, detail::kEncoderMagic);
    binio::write_le(out, detail::kEncoderVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.codebooks.size()));
    for (const auto& cb : bundle.codebooks) {
        binio::write_le<double>(out, cb.power);
        detail::write_matrix(out, cb.pca.mean);
        detail::write_matrix(out, cb.pca.basis);
        detail::write_matrix(out, cb.pca.eigenvalues);
        detail::write_matrix(out, cb.gmm.weights);
        detail::write_matrix(out, cb.gmm.means);
        detail::write_matrix(out, cb.gmm.variances);
    }
    binio::write_string(out, bundle.config_echo);
    if (!out) throw DataError("failed writing encoder file: " + path.string());
}

inline EncoderBundle load_encoder(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open encoder file: " + path.string());
    if (binio::read_le<std::uint32_t>(in) != detail::kEncoderMagic)
        throw DataError("not an encoder file: " + path.string());
    const auto version = binio::read_le<std::uint32_t>(in);
    if (version != detail::kEncoderVersion)
        throw DataError("unsupported encoder file version " + std::to_string(version));
    const auto count = binio::read_le<std::uint32_t>(in);
    EncoderBundle bundle;
    for (std::uint32_t i = 0; i < count; ++i) {
        EncoderModel cb;
        cb.power = binio::read_le<double>(in);
        cb.pca.mean = detail::read_matrix<Eigen::VectorXd>(in);
        cb.pca.basis = detail::read_matrix<Eigen::MatrixXd>(in);
        cb.pca.eigenvalues = detail::read_matrix<Eigen::VectorXd>(in);
        cb.gmm.weights = detail::read_matrix<Eigen::VectorXd>(in);
        cb.gmm.means = detail::read_matrix<RowMatrix>(in);
        cb.gmm.variances = detail::read_matrix<RowMatrix>(in);
        if (cb.pca.mean.size() != cb.pca.basis.rows() || cb.gmm.means.cols() != cb.pca.basis.cols() ||
            cb.gmm.variances.rows() != cb.gmm.means.rows() || cb.gmm.weights.size() != cb.gmm.means.rows())
            throw DataError("encoder file has inconsistent shapes: " + path.string());
        cb.gmm.refresh();
        bundle.codebooks.push_back(std::move(cb));
    }
    bundle.config_echo = binio::read_string(in);
    return bundle;
}

}  // namespace gsstex
