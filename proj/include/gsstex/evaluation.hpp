#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsstex/error.hpp"

namespace gsstex {

inline constexpr std::array<std::string_view, 6> kCanonicalClasses = {
    "Homogeneous", "Speckled", "Nucleolar", "Centromere", "Golgi", "Nuclear Membrane"};

struct ManifestEntry {
    std::filesystem::path path;
    std::string label;
    std::string specimen;
};

/// Rows of (image, class name, specimen). Class ids follow the canonical
/// order for the six known names, then any other names alphabetically;
/// only names that occur are numbered.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<std::string> class_names() const {
        std::vector<std::string> names;
        for (auto canon : kCanonicalClasses)
            if (std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.label == canon; }))
                names.emplace_back(canon);
        std::vector<std::string> extra;
        for (const auto& e : entries)
            if (std::find(kCanonicalClasses.begin(), kCanonicalClasses.end(), e.label) == kCanonicalClasses.end() &&
                std::find(extra.begin(), extra.end(), e.label) == extra.end())
                extra.push_back(e.label);
        std::sort(extra.begin(), extra.end());
        names.insert(names.end(), extra.begin(), extra.end());
        return names;
    }

    std::vector<int> class_ids() const {
        const auto names = class_names();
        std::vector<int> ids;
        ids.reserve(entries.size());
        for (const auto& e : entries)
            ids.push_back(static_cast<int>(std::find(names.begin(), names.end(), e.label) - names.begin()));
        return ids;
    }

    std::vector<std::string> specimens() const {
        std::vector<std::string> out;
        for (const auto& e : entries) out.push_back(e.specimen);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void validate() const {
        for (const auto& e : entries) {
            if (e.specimen.empty()) throw DataError("manifest row with empty specimen id: " + e.path.string());
            if (e.label.empty()) throw DataError("manifest row with empty class label: " + e.path.string());
        }
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace detail

/// CSV with header `path,label,specimen`; relative paths resolve against the
/// manifest's directory.
inline DatasetManifest load_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open manifest: " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty: " + file.string());
    const auto header = detail::split_csv_line(line);
    if (header.size() != 3 || header[0] != "path" || header[1] != "label" || header[2] != "specimen")
        throw DataError("manifest header must be path,label,specimen: " + file.string());
    DatasetManifest m;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw DataError("manifest line " + std::to_string(line_no) + " does not have 3 fields");
        std::filesystem::path p = cells[0];
        if (p.is_relative()) p = file.parent_path() / p;
        m.entries.push_back({p, cells[1], cells[2]});
    }
    m.validate();
    return m;
}

/// Writes paths relative to the manifest's directory when they live under it.
inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write manifest: " + file.string());
    out << "path,label,specimen\n";
    const auto base = file.parent_path();
    for (const auto& e : m.entries) {
        auto p = e.path;
        if (!base.empty()) {
            const auto rel = p.lexically_relative(base);
            if (!rel.empty() && *rel.begin() != "..") p = rel;
        }
        out << detail::csv_quote(p.generic_string()) << ',' << detail::csv_quote(e.label) << ','
            << detail::csv_quote(e.specimen) << '\n';
    }
}

struct Fold {
    std::string specimen;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// One fold per specimen, ordered by specimen id; each fold tests exactly
/// that specimen's rows.
inline std::vector<Fold> loso_splits(const DatasetManifest& m) {
    const auto specimens = m.specimens();
    if (specimens.size() < 2)
        throw DataError("leave-one-specimen-out needs at least 2 specimens, got " + std::to_string(specimens.size()));
    std::vector<Fold> folds;
    folds.reserve(specimens.size());
    for (const auto& s : specimens) {
        Fold f;
        f.specimen = s;
        for (std::size_t i = 0; i < m.entries.size(); ++i)
            (m.entries[i].specimen == s ? f.test : f.train).push_back(i);
        folds.push_back(std::move(f));
    }
    return folds;
}

/// counts[truth][pred].
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<long long> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n) : classes(n), counts(n * n, 0) {}

    long long& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
    long long at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }

    long long row_sum(std::size_t truth) const {
        long long s = 0;
        for (std::size_t p = 0; p < classes; ++p) s += at(truth, p);
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.classes != classes) throw DataError("confusion matrices differ in class count");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        return *this;
    }

    /// Row-normalized percentages; empty rows stay zero.
    std::vector<double> percentages() const {
        std::vector<double> out(counts.size(), 0.0);
        for (std::size_t t = 0; t < classes; ++t) {
            const auto total = row_sum(t);
            if (total == 0) continue;
            for (std::size_t p = 0; p < classes; ++p)
                out[t * classes + p] = 100.0 * static_cast<double>(at(t, p)) / static_cast<double>(total);
        }
        return out;
    }
};

inline ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred, std::size_t classes) {
    if (truth.size() != pred.size())
        throw DataError("truth and prediction lengths differ (" + std::to_string(truth.size()) + " vs " +
                        std::to_string(pred.size()) + ")");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || pred[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes ||
            static_cast<std::size_t>(pred[i]) >= classes)
            throw DataError("label out of range at index " + std::to_string(i));
        ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
    }
    return cm;
}

inline ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred) {
    int top = -1;
    for (int v : truth) top = std::max(top, v);
    for (int v : pred) top = std::max(top, v);
    return confusion_matrix(truth, pred, static_cast<std::size_t>(top + 1));
}

/// Mean over classes of per-class recall. Every class row must be nonempty.
inline double mca(const ConfusionMatrix& cm) {
    if (cm.classes == 0) throw DataError("mca of an empty confusion matrix");
    double total = 0.0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        const auto n = cm.row_sum(c);
        if (n == 0) throw DataError("mca undefined: class " + std::to_string(c) + " has no samples");
        total += static_cast<double>(cm.at(c, c)) / static_cast<double>(n);
    }
    return total / static_cast<double>(cm.classes);
}

/// Mean of per-class accuracies given directly (e.g. a published table row).
inline double mca(std::span<const double> per_class_accuracy) {
    if (per_class_accuracy.empty()) throw DataError("mca of an empty accuracy list");
    double total = 0.0;
    for (double a : per_class_accuracy) total += a;
    return total / static_cast<double>(per_class_accuracy.size());
}

/// mca restricted to classes that have at least one sample; used for single
/// folds, where a specimen usually covers one class.
inline double mca_present(const ConfusionMatrix& cm) {
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        const auto n = cm.row_sum(c);
        if (n == 0) continue;
        total += static_cast<double>(cm.at(c, c)) / static_cast<double>(n);
        ++present;
    }
    if (present == 0) throw DataError("mca undefined: confusion matrix has no samples");
    return total / static_cast<double>(present);
}

}  // namespace gsstex
