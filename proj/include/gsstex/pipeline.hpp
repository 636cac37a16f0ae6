#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsstex/config.hpp"
#include "gsstex/encoder.hpp"
#include "gsstex/error.hpp"
#include "gsstex/evaluation.hpp"
#include "gsstex/image.hpp"
#include "gsstex/lbp.hpp"
#include "gsstex/load_descriptor.hpp"
#include "gsstex/parallel.hpp"
#include "gsstex/scalespace.hpp"
#include "gsstex/svm.hpp"

namespace gsstex {

using Logger = std::function<void(const std::string&)>;

inline Logger stderr_logger() {
    return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

inline GrayImage prepare_image(const std::filesystem::path& path, const RunConfig& cfg) {
    GrayImage img = load_image(path, LoadOptions{cfg.luminance_from_color});
    return cfg.enhance ? enhance(img) : img;
}

inline std::vector<double> lbp_features(const GrayImage& img, const RunConfig& cfg) {
    return gss_lbp_representation(build_scale_stack(img, cfg.gss), cfg.lbp);
}

template <typename Real = double>
DescriptorSet<Real> bow_descriptors(const GrayImage& img, const RunConfig& cfg) {
    return extract_all<Real>(build_scale_stack(img, cfg.gss), cfg.load);
}

/// Per-image features computed once for a manifest. Levels are independent
/// filterings of the original, so a cache built with gss.count = K also
/// serves every smaller count with the same base.
struct FeatureCache {
    Framework framework = Framework::Bow;
    ScaleStackConfig gss;
    LBPConfig lbp;
    std::vector<std::vector<double>> lbp_vectors;
    std::vector<DescriptorSet<float>> descriptors;

    std::size_t size() const noexcept {
        return framework == Framework::Lbp ? lbp_vectors.size() : descriptors.size();
    }
};

inline FeatureCache compute_features(const DatasetManifest& manifest, const RunConfig& cfg) {
    cfg.validate();
    FeatureCache cache;
    cache.framework = cfg.framework;
    cache.gss = cfg.gss;
    cache.lbp = cfg.lbp;
    const std::size_t n = manifest.entries.size();
    std::vector<std::string> errors(n);
    if (cfg.framework == Framework::Lbp)
        cache.lbp_vectors.resize(n);
    else
        cache.descriptors.resize(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        try {
            const GrayImage img = prepare_image(manifest.entries[i].path, cfg);
            if (cfg.framework == Framework::Lbp)
                cache.lbp_vectors[i] = lbp_features(img, cfg);
            else
                cache.descriptors[i] = bow_descriptors<float>(img, cfg);
        } catch (const DataError& e) {
            errors[i] = "row " + std::to_string(i + 2) + ": " + e.what();
        }
    });
    std::string report;
    std::size_t failures = 0;
    for (const auto& e : errors)
        if (!e.empty()) {
            report += "\n  " + e;
            ++failures;
        }
    if (failures) throw DataError(std::to_string(failures) + " manifest row(s) failed:" + report);
    return cache;
}

struct FoldResult {
    std::string specimen;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    bool skipped = false;
    std::string reason;
    ConfusionMatrix confusion;
    double mca = 0.0;  // over classes present in the fold
};

struct LosoResult {
    std::vector<std::string> class_names;
    std::vector<FoldResult> folds;
    ConfusionMatrix aggregate;
    std::optional<double> mca_counts;  // from the summed matrix
    std::optional<double> mca_foldmean;
    std::size_t feature_dim = 0;
    std::size_t levels = 0;

    std::size_t folds_run() const {
        return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const auto& f) { return !f.skipped; }));
    }
};

struct LosoOptions {
    Logger log = stderr_logger();
};

/// Leave-one-specimen-out over cached features. cfg.gss.count may be below
/// the cache's count (same base); encoder and SVM only see training rows.
inline LosoResult run_loso(const DatasetManifest& manifest, const FeatureCache& cache, const RunConfig& cfg,
                           const LosoOptions& options = {}) {
    cfg.validate();
    if (cache.size() != manifest.entries.size()) throw DataError("feature cache does not match the manifest");
    if (cache.framework != cfg.framework) throw ConfigError("feature cache was built for another framework");
    if (cfg.gss.count > cache.gss.count || cfg.gss.base != cache.gss.base)
        throw ConfigError("feature cache does not cover gss.count=" + std::to_string(cfg.gss.count) +
                          " with gss.base=" + detail::format_double(cfg.gss.base));
    const std::size_t levels = static_cast<std::size_t>(cfg.gss.count) + 1;

    LosoResult result;
    result.class_names = manifest.class_names();
    result.levels = levels;
    const std::size_t num_classes = result.class_names.size();
    const auto labels = manifest.class_ids();
    const auto folds = loso_splits(manifest);
    result.aggregate = ConfusionMatrix(num_classes);
    result.folds.resize(folds.size());

    // Level-restricted views, built once per run.
    std::vector<std::vector<double>> lbp_rows;
    std::vector<DescriptorSet<float>> restricted;
    const std::vector<DescriptorSet<float>>* descriptors = &cache.descriptors;
    if (cfg.framework == Framework::Lbp) {
        const std::size_t len = levels * cache.lbp.histogram_length();
        for (const auto& v : cache.lbp_vectors) lbp_rows.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(len));
        result.feature_dim = len;
    } else {
        if (levels < static_cast<std::size_t>(cache.gss.count) + 1) {
            for (const auto& d : cache.descriptors) restricted.push_back(d.levels_below(levels));
            descriptors = &restricted;
        }
        result.feature_dim = cfg.encode.codebooks * 2 * cfg.encode.pca_dim * cfg.encode.gmm_k;
    }

    parallel_for(folds.size(), cfg.jobs, [&](std::size_t f) {
        const Fold& fold = folds[f];
        FoldResult& out = result.folds[f];
        out.specimen = fold.specimen;
        out.train_rows = fold.train.size();
        out.test_rows = fold.test.size();
        out.confusion = ConfusionMatrix(num_classes);

        std::vector<bool> covered(num_classes, false);
        for (std::size_t i : fold.train) covered[static_cast<std::size_t>(labels[i])] = true;
        std::string missing;
        for (std::size_t c = 0; c < num_classes; ++c)
            if (!covered[c]) missing += (missing.empty() ? "" : ", ") + result.class_names[c];
        if (!missing.empty()) {
            out.skipped = true;
            out.reason = "training set lacks class(es): " + missing;
            return;
        }

        FeatureMatrix train;
        std::vector<std::vector<double>> test_rows;
        if (cfg.framework == Framework::Lbp) {
            for (std::size_t i : fold.train) train.append(lbp_rows[i], labels[i], manifest.entries[i].specimen);
            for (std::size_t i : fold.test) test_rows.push_back(lbp_rows[i]);
        } else {
            std::vector<const DescriptorSet<float>*> pool;
            for (std::size_t i : fold.train) pool.push_back(&(*descriptors)[i]);
            EncoderOptions enc = cfg.encoder_options();
            enc.seed = derive_seed(enc.seed, "fold", f);
            enc.jobs = 1;
            const EncoderBundle bundle = fit_encoder(pool, enc);
            for (std::size_t i : fold.train)
                train.append(encode(bundle, (*descriptors)[i]), labels[i], manifest.entries[i].specimen);
            for (std::size_t i : fold.test) test_rows.push_back(encode(bundle, (*descriptors)[i]));
        }
        SVMOptions svm = cfg.svm_options();
        svm.jobs = 1;
        const SVMModel model = train_svm(train, svm).model;
        std::vector<int> truth, pred;
        for (std::size_t t = 0; t < fold.test.size(); ++t) {
            truth.push_back(labels[fold.test[t]]);
            pred.push_back(predict(model, test_rows[t]).label);
        }
        out.confusion = confusion_matrix(truth, pred, num_classes);
        out.mca = mca_present(out.confusion);
    });

    double fold_sum = 0.0;
    for (const auto& f : result.folds) {
        if (f.skipped) {
            if (options.log) options.log("warning: fold '" + f.specimen + "' skipped, " + f.reason);
            continue;
        }
        result.aggregate += f.confusion;
        fold_sum += f.mca;
    }
    if (const auto run = result.folds_run(); run > 0) {
        result.mca_foldmean = fold_sum / static_cast<double>(run);
        bool all_rows = true;
        for (std::size_t c = 0; c < num_classes; ++c) all_rows = all_rows && result.aggregate.row_sum(c) > 0;
        if (all_rows)
            result.mca_counts = mca(result.aggregate);
        else
            result.mca_counts = mca_present(result.aggregate);
    }
    return result;
}

inline LosoResult run_loso(const DatasetManifest& manifest, const RunConfig& cfg, const LosoOptions& options = {}) {
    return run_loso(manifest, compute_features(manifest, cfg), cfg, options);
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < cm.classes; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < cm.classes; ++p) row.push_back(cm.at(t, p));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json to_json(const LosoResult& r) {
    nlohmann::json j;
    j["classes"] = r.class_names;
    j["levels"] = r.levels;
    j["feature_dim"] = r.feature_dim;
    j["per_fold"] = nlohmann::json::array();
    for (const auto& f : r.folds) {
        nlohmann::json fj{{"specimen", f.specimen}, {"train_rows", f.train_rows}, {"test_rows", f.test_rows},
                          {"skipped", f.skipped}};
        if (f.skipped)
            fj["reason"] = f.reason;
        else {
            fj["confusion"] = to_json(f.confusion);
            fj["mca"] = f.mca;
        }
        j["per_fold"].push_back(fj);
    }
    j["aggregate_confusion"] = to_json(r.aggregate);
    j["mca_counts"] = r.mca_counts ? nlohmann::json(*r.mca_counts) : nlohmann::json(nullptr);
    j["mca_foldmean"] = r.mca_foldmean ? nlohmann::json(*r.mca_foldmean) : nlohmann::json(nullptr);
    return j;
}

/// Row-percentage confusion table: header of predicted classes, one row per
/// true class.
inline void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write confusion csv: " + path.string());
    out << "truth\\predicted";
    for (const auto& n : names) out << ',' << detail::csv_quote(n);
    out << '\n';
    const auto pct = cm.percentages();
    out.setf(std::ios::fixed);
    out.precision(2);
    for (std::size_t t = 0; t < cm.classes; ++t) {
        out << detail::csv_quote(names[t]);
        for (std::size_t p = 0; p < cm.classes; ++p) out << ',' << pct[t * cm.classes + p];
        out << '\n';
    }
}

}  // namespace gsstex
