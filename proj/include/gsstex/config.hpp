#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsstex/encoder.hpp"
#include "gsstex/error.hpp"
#include "gsstex/lbp.hpp"
#include "gsstex/load_descriptor.hpp"
#include "gsstex/scalespace.hpp"
#include "gsstex/svm.hpp"

namespace gsstex {

enum class Framework { Lbp, Bow };

inline std::string to_string(Framework f) { return f == Framework::Lbp ? "lbp" : "bow"; }

inline Framework parse_framework(const std::string& s) {
    if (s == "lbp") return Framework::Lbp;
    if (s == "bow") return Framework::Bow;
    throw ConfigError("framework must be 'lbp' or 'bow', got '" + s + "'");
}

/// Every tunable of a run, keyed by dotted names that mirror the modules.
struct RunConfig {
    Framework framework = Framework::Bow;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    bool enhance = false;
    bool luminance_from_color = false;
    ScaleStackConfig gss;
    LBPConfig lbp;
    SamplingGrid load;
    EncoderOptions encode;
    SVMOptions svm;

    /// Seeds and job counts of the stage options follow the root values.
    EncoderOptions encoder_options() const {
        EncoderOptions e = encode;
        e.seed = derive_seed(seed, "encoder");
        e.jobs = jobs;
        return e;
    }
    SVMOptions svm_options() const {
        SVMOptions s = svm;
        s.seed = derive_seed(seed, "svm");
        s.jobs = jobs;
        return s;
    }

    void validate() const {
        gss.validate();
        lbp.validate();
        load.validate();
        if (load.radius < kLoadRings) throw ConfigError("load.radius must be at least 4");
        if (encode.pca_dim == 0 || encode.pca_dim > kLoadDim)
            throw ConfigError("encode.pca_dim must be in [1, 236]");
        if (encode.gmm_k == 0) throw ConfigError("encode.gmm_k must be positive");
        if (encode.codebooks == 0) throw ConfigError("encode.codebooks must be positive");
        if (!(encode.power > 0.0) || encode.power > 1.0) throw ConfigError("encode.power must be in (0, 1]");
        if (!(svm.C > 0.0)) throw ConfigError("svm.C must be positive");
        if (!(svm.tolerance > 0.0)) throw ConfigError("svm.tol must be positive");
        if (jobs == 0) throw ConfigError("jobs must be >= 1");
    }

    struct Field {
        std::string key;
        std::function<void(RunConfig&, const std::string&)> set;
        std::function<std::string(const RunConfig&)> get;
    };

    static const std::vector<Field>& fields();

    static std::vector<std::string> keys() {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    /// `key = value` lines in key order; parses back to an identical config.
    std::string to_text() const {
        std::string out;
        for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
        return out;
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::string unquote(std::string s) {
    s = trim(std::move(s));
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        return s.substr(1, s.size() - 2);
    return s;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string v = unquote(text);
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            out = static_cast<T>(std::stod(v, &used));
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error&) {
            throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
        }
    } else {
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size())
            throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    const std::string v = unquote(text);
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace detail

inline const std::vector<RunConfig::Field>& RunConfig::fields() {
    using detail::format_double;
    using detail::parse_bool;
    using detail::parse_number;
    static const std::vector<Field> table = {
        {"framework", [](RunConfig& c, const std::string& v) { c.framework = parse_framework(detail::unquote(v)); },
         [](const RunConfig& c) { return "\"" + to_string(c.framework) + "\""; }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"jobs", [](RunConfig& c, const std::string& v) { c.jobs = parse_number<std::size_t>("jobs", v); },
         [](const RunConfig& c) { return std::to_string(c.jobs); }},
        {"image.enhance", [](RunConfig& c, const std::string& v) { c.enhance = parse_bool("image.enhance", v); },
         [](const RunConfig& c) { return std::string(c.enhance ? "true" : "false"); }},
        {"image.luminance_from_color",
         [](RunConfig& c, const std::string& v) { c.luminance_from_color = parse_bool("image.luminance_from_color", v); },
         [](const RunConfig& c) { return std::string(c.luminance_from_color ? "true" : "false"); }},
        {"gss.base", [](RunConfig& c, const std::string& v) { c.gss.base = parse_number<double>("gss.base", v); },
         [](const RunConfig& c) { return format_double(c.gss.base); }},
        {"gss.count", [](RunConfig& c, const std::string& v) { c.gss.count = parse_number<int>("gss.count", v); },
         [](const RunConfig& c) { return std::to_string(c.gss.count); }},
        {"gss.border",
         [](RunConfig&, const std::string& v) {
             if (detail::unquote(v) != "replicate")
                 throw ConfigError("gss.border only supports \"replicate\", got '" + detail::unquote(v) + "'");
         },
         [](const RunConfig&) { return std::string("\"replicate\""); }},
        {"lbp.scales", [](RunConfig& c, const std::string& v) { c.lbp.scales = parse_lbp_scales(detail::unquote(v)); },
         [](const RunConfig& c) { return "\"" + format_lbp_scales(c.lbp.scales) + "\""; }},
        {"load.radius", [](RunConfig& c, const std::string& v) { c.load.radius = parse_number<int>("load.radius", v); },
         [](const RunConfig& c) { return std::to_string(c.load.radius); }},
        {"load.stride_x",
         [](RunConfig& c, const std::string& v) { c.load.stride_x = parse_number<int>("load.stride_x", v); },
         [](const RunConfig& c) { return std::to_string(c.load.stride_x); }},
        {"load.stride_y",
         [](RunConfig& c, const std::string& v) { c.load.stride_y = parse_number<int>("load.stride_y", v); },
         [](const RunConfig& c) { return std::to_string(c.load.stride_y); }},
        {"encode.pca_dim",
         [](RunConfig& c, const std::string& v) { c.encode.pca_dim = parse_number<std::size_t>("encode.pca_dim", v); },
         [](const RunConfig& c) { return std::to_string(c.encode.pca_dim); }},
        {"encode.gmm_k",
         [](RunConfig& c, const std::string& v) { c.encode.gmm_k = parse_number<std::size_t>("encode.gmm_k", v); },
         [](const RunConfig& c) { return std::to_string(c.encode.gmm_k); }},
        {"encode.codebooks",
         [](RunConfig& c, const std::string& v) { c.encode.codebooks = parse_number<std::size_t>("encode.codebooks", v); },
         [](const RunConfig& c) { return std::to_string(c.encode.codebooks); }},
        {"encode.max_train_descriptors",
         [](RunConfig& c, const std::string& v) {
             c.encode.max_train_descriptors = parse_number<std::size_t>("encode.max_train_descriptors", v);
         },
         [](const RunConfig& c) { return std::to_string(c.encode.max_train_descriptors); }},
        {"encode.em_max_iter",
         [](RunConfig& c, const std::string& v) {
             c.encode.em_max_iterations = parse_number<std::size_t>("encode.em_max_iter", v);
         },
         [](const RunConfig& c) { return std::to_string(c.encode.em_max_iterations); }},
        {"encode.em_tol",
         [](RunConfig& c, const std::string& v) { c.encode.em_tolerance = parse_number<double>("encode.em_tol", v); },
         [](const RunConfig& c) { return format_double(c.encode.em_tolerance); }},
        {"encode.power",
         [](RunConfig& c, const std::string& v) { c.encode.power = parse_number<double>("encode.power", v); },
         [](const RunConfig& c) { return format_double(c.encode.power); }},
        {"svm.C", [](RunConfig& c, const std::string& v) { c.svm.C = parse_number<double>("svm.C", v); },
         [](const RunConfig& c) { return format_double(c.svm.C); }},
        {"svm.tol", [](RunConfig& c, const std::string& v) { c.svm.tolerance = parse_number<double>("svm.tol", v); },
         [](const RunConfig& c) { return format_double(c.svm.tolerance); }},
        {"svm.max_epochs",
         [](RunConfig& c, const std::string& v) { c.svm.max_epochs = parse_number<std::size_t>("svm.max_epochs", v); },
         [](const RunConfig& c) { return std::to_string(c.svm.max_epochs); }},
        {"svm.class_weighting",
         [](RunConfig& c, const std::string& v) { c.svm.class_weighting = parse_bool("svm.class_weighting", v); },
         [](const RunConfig& c) { return std::string(c.svm.class_weighting ? "true" : "false"); }},
        {"svm.standardize",
         [](RunConfig& c, const std::string& v) { c.svm.standardize = parse_bool("svm.standardize", v); },
         [](const RunConfig& c) { return std::string(c.svm.standardize ? "true" : "false"); }},
    };
    return table;
}

/// Closest known key by edit distance, for error messages.
inline std::string nearest_config_key(const std::string& key) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& f : RunConfig::fields()) {
        const auto d = detail::edit_distance(key, f.key);
        if (d < best_d) {
            best_d = d;
            best = f.key;
        }
    }
    return best;
}

inline void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(*this, value);
            return;
        }
    throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
}

inline std::string RunConfig::get(const std::string& key) const {
    for (const auto& f : fields())
        if (f.key == key) return f.get(*this);
    throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
}

/// Applies a TOML-style text: `key = value` lines, optional `[section]`
/// headers that prefix following keys, `#` comments.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool in_quote = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line.resize(i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        cfg.set(key, detail::trim(line.substr(eq + 1)));
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    apply_config_text(cfg, ss.str(), path.string());
    cfg.validate();
    return cfg;
}

}  // namespace gsstex
