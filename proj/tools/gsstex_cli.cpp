// gsstex command-line front end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsstex/gsstex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalFlags {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> framework;
    std::string out = ".";
};

/// Accepts a TOML-style config or a previous run.json.
void apply_config_file(gsstex::RunConfig& cfg, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw gsstex::ConfigError("cannot open config file: " + path.string());
    if (path.extension() == ".json") {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw gsstex::ConfigError("cannot parse " + path.string() + ": " + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object())
            throw gsstex::ConfigError(path.string() + " has no \"config\" object");
        for (const auto& [key, value] : j["config"].items()) cfg.set(key, value.get<std::string>());
        return;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    gsstex::apply_config_text(cfg, ss.str(), path.string());
}

gsstex::RunConfig resolve_config(const GlobalFlags& g) {
    gsstex::RunConfig cfg;
    if (!g.config.empty()) apply_config_file(cfg, g.config);
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw gsstex::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(gsstex::detail::trim(kv.substr(0, eq)), gsstex::detail::trim(kv.substr(eq + 1)));
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.jobs) cfg.jobs = *g.jobs;
    if (g.framework) cfg.framework = gsstex::parse_framework(*g.framework);
    cfg.validate();
    return cfg;
}

fs::path prepare_out(const GlobalFlags& g) {
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw gsstex::DataError("cannot create output directory " + g.out + ": " + ec.message());
    return g.out;
}

json config_json(const gsstex::RunConfig& cfg) {
    json j = json::object();
    for (const auto& key : gsstex::RunConfig::keys()) j[key] = cfg.get(key);
    return j;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw gsstex::DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_run_json(const fs::path& out, const std::string& command, const gsstex::RunConfig& cfg, json extra = {}) {
    json j;
    j["command"] = command;
    j["config"] = config_json(cfg);
    if (!extra.is_null()) j["outputs"] = std::move(extra);
    write_json(j, out / "run.json");
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

// Index of per-image descriptor files written by `extract` for the bow framework.
struct DescriptorIndex {
    gsstex::DatasetManifest manifest;
    std::vector<fs::path> files;
};

void save_descriptor_index(const DescriptorIndex& idx, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw gsstex::DataError("cannot write " + path.string());
    out << "path,label,specimen,features\n";
    for (std::size_t i = 0; i < idx.files.size(); ++i) {
        const auto& e = idx.manifest.entries[i];
        out << gsstex::detail::csv_quote(e.path.string()) << ',' << gsstex::detail::csv_quote(e.label) << ','
            << gsstex::detail::csv_quote(e.specimen) << ','
            << gsstex::detail::csv_quote(idx.files[i].lexically_relative(path.parent_path()).generic_string()) << '\n';
    }
}

DescriptorIndex load_descriptor_index(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw gsstex::DataError("cannot open descriptor index: " + path.string());
    std::string line;
    std::getline(in, line);
    if (gsstex::detail::split_csv_line(line) != std::vector<std::string>{"path", "label", "specimen", "features"})
        throw gsstex::DataError("descriptor index header must be path,label,specimen,features");
    DescriptorIndex idx;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = gsstex::detail::split_csv_line(line);
        if (cells.size() != 4) throw gsstex::DataError("malformed descriptor index row: " + line);
        idx.manifest.entries.push_back({cells[0], cells[1], cells[2]});
        fs::path f = cells[3];
        idx.files.push_back(f.is_relative() ? path.parent_path() / f : f);
    }
    return idx;
}

void save_classes(const std::vector<std::string>& names, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw gsstex::DataError("cannot write " + path.string());
    for (const auto& n : names) out << n << '\n';
}

std::vector<std::string> load_classes(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> names;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) names.push_back(line);
    return names;
}

std::string stem_for(std::size_t row, const gsstex::ManifestEntry& e) {
    return std::to_string(row) + "_" + e.path.stem().string();
}

// ---------------------------------------------------------------------------

int cmd_synth(const GlobalFlags& g, const gsstex::SynthOptions& base) {
    auto cfg = resolve_config(g);
    auto opt = base;
    opt.seed = cfg.seed;
    const auto out = prepare_out(g);
    const auto manifest = gsstex::write_synthetic_corpus(out, opt);
    log("wrote " + std::to_string(manifest.entries.size()) + " images, " +
        std::to_string(manifest.specimens().size()) + " specimens to " + out.string());
    write_run_json(out, "synth", cfg,
                   {{"manifest", (out / "manifest.csv").string()},
                    {"classes", opt.classes},
                    {"per_class", opt.per_class},
                    {"specimens_per_class", opt.specimens_per_class},
                    {"size", opt.size},
                    {"noise", opt.noise}});
    return 0;
}

int cmd_preprocess(const GlobalFlags& g, const fs::path& image) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto img = gsstex::prepare_image(image, cfg);
    const auto stack = gsstex::build_scale_stack(img, cfg.gss, cfg.jobs);
    json levels = json::array();
    for (std::size_t n = 0; n < stack.size(); ++n) {
        const auto file = out / (image.stem().string() + "_L" + std::to_string(n) + ".pgm");
        gsstex::save_image(stack.levels[n], file, {.bit_depth = 16, .unit_range = cfg.enhance});
        levels.push_back({{"level", n}, {"sigma", stack.sigmas[n]}, {"file", file.string()}});
    }
    log("wrote " + std::to_string(stack.size()) + " scale levels");
    write_run_json(out, "preprocess", cfg, {{"levels", levels}});
    return 0;
}

int cmd_extract(const GlobalFlags& g, const std::string& image, const std::string& manifest_path) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    gsstex::DatasetManifest manifest;
    if (!manifest_path.empty())
        manifest = gsstex::load_manifest(manifest_path);
    else
        manifest.entries.push_back({image, "unknown", "unknown"});
    const auto cache = gsstex::compute_features(manifest, cfg);
    const auto names = manifest.class_names();
    const auto ids = manifest.class_ids();
    json outputs;
    if (cfg.framework == gsstex::Framework::Lbp) {
        gsstex::FeatureMatrix fm;
        for (std::size_t i = 0; i < cache.lbp_vectors.size(); ++i)
            fm.append(cache.lbp_vectors[i], ids[i], manifest.entries[i].specimen);
        gsstex::write_feature_csv(fm, out / "features.csv");
        save_classes(names, out / "classes.txt");
        log("feature_dim=" + std::to_string(fm.dim));
        outputs = {{"features", (out / "features.csv").string()}, {"feature_dim", fm.dim}};
    } else {
        DescriptorIndex idx{manifest, {}};
        fs::create_directories(out / "descriptors");
        std::size_t total = 0;
        for (std::size_t i = 0; i < cache.descriptors.size(); ++i) {
            const auto file = out / "descriptors" / (stem_for(i, manifest.entries[i]) + ".bin");
            gsstex::write_feature_file(file, cache.descriptors[i]);
            idx.files.push_back(file);
            total += cache.descriptors[i].size();
        }
        save_descriptor_index(idx, out / "descriptors.csv");
        log("descriptor_dim=" + std::to_string(gsstex::kLoadDim) + " descriptors=" + std::to_string(total));
        outputs = {{"index", (out / "descriptors.csv").string()}, {"descriptors", total}};
    }
    write_run_json(out, "extract", cfg, outputs);
    return 0;
}

std::vector<gsstex::DescriptorSet<float>> read_all(const DescriptorIndex& idx) {
    std::vector<gsstex::DescriptorSet<float>> sets;
    for (const auto& f : idx.files) sets.push_back(gsstex::read_feature_file(f));
    return sets;
}

int cmd_fit_encoder(const GlobalFlags& g, const fs::path& index_path) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto idx = load_descriptor_index(index_path);
    const auto sets = read_all(idx);
    std::vector<const gsstex::DescriptorSet<float>*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);
    auto bundle = gsstex::fit_encoder(ptrs, cfg.encoder_options());
    bundle.config_echo = cfg.to_text();
    gsstex::save_encoder(bundle, out / "encoder.bin");
    log("fisher_dim=" + std::to_string(bundle.fisher_dim()));
    write_run_json(out, "fit-encoder", cfg, {{"encoder", (out / "encoder.bin").string()}, {"fisher_dim", bundle.fisher_dim()}});
    return 0;
}

int cmd_encode(const GlobalFlags& g, const fs::path& encoder_path, const fs::path& index_path) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto bundle = gsstex::load_encoder(encoder_path);
    const auto idx = load_descriptor_index(index_path);
    const auto ids = idx.manifest.class_ids();
    std::vector<std::vector<double>> rows(idx.files.size());
    gsstex::parallel_for(idx.files.size(), cfg.jobs,
                         [&](std::size_t i) { rows[i] = gsstex::encode(bundle, gsstex::read_feature_file(idx.files[i])); });
    gsstex::FeatureMatrix fm;
    for (std::size_t i = 0; i < rows.size(); ++i) fm.append(rows[i], ids[i], idx.manifest.entries[i].specimen);
    gsstex::write_feature_csv(fm, out / "features.csv");
    save_classes(idx.manifest.class_names(), out / "classes.txt");
    log("feature_dim=" + std::to_string(fm.dim));
    write_run_json(out, "encode", cfg, {{"features", (out / "features.csv").string()}, {"feature_dim", fm.dim}});
    return 0;
}

int cmd_train(const GlobalFlags& g, const fs::path& features) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto fm = gsstex::read_feature_csv(features);
    const auto result = gsstex::train_svm(fm, cfg.svm_options());
    gsstex::save_svm(result.model, out / "svm.bin");
    const auto classes = features.parent_path() / "classes.txt";
    if (fs::exists(classes)) fs::copy_file(classes, out / "classes.txt", fs::copy_options::overwrite_existing);
    json traces = json::array();
    for (const auto& t : result.traces)
        traces.push_back({{"epochs", t.epochs}, {"duality_gap", t.duality_gap}, {"converged", t.converged}});
    write_run_json(out, "train", cfg, {{"model", (out / "svm.bin").string()}, {"binary_problems", traces}});
    return 0;
}

int cmd_predict(const GlobalFlags& g, const fs::path& model_path, const fs::path& features) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto model = gsstex::load_svm(model_path);
    const auto fm = gsstex::read_feature_csv(features);
    auto names = load_classes(model_path.parent_path() / "classes.txt");
    std::ofstream csv(out / "predictions.csv");
    if (!csv) throw gsstex::DataError("cannot write predictions.csv");
    csv << "row,specimen,truth,predicted\n";
    std::vector<int> truth, pred;
    auto name_of = [&](int id) {
        return static_cast<std::size_t>(id) < names.size() ? names[static_cast<std::size_t>(id)] : std::to_string(id);
    };
    for (std::size_t i = 0; i < fm.rows; ++i) {
        const int p = gsstex::predict(model, fm.row(i)).label;
        csv << i << ',' << gsstex::detail::csv_quote(fm.specimens[i]) << ',' << gsstex::detail::csv_quote(name_of(fm.labels[i]))
            << ',' << gsstex::detail::csv_quote(name_of(p)) << '\n';
        truth.push_back(fm.labels[i]);
        pred.push_back(p);
    }
    json outputs = {{"predictions", (out / "predictions.csv").string()}};
    bool labelled = !truth.empty();
    for (int t : truth) labelled = labelled && t >= 0 && static_cast<std::size_t>(t) < model.num_classes;
    if (labelled) {
        const auto cm = gsstex::confusion_matrix(truth, pred, model.num_classes);
        const double score = gsstex::mca_present(cm);
        log("mca=" + gsstex::detail::format_double(score));
        outputs["mca"] = score;
    }
    write_run_json(out, "predict", cfg, outputs);
    return 0;
}

int cmd_loso(const GlobalFlags& g, const fs::path& manifest_path) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto manifest = gsstex::load_manifest(manifest_path);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = gsstex::run_loso(manifest, cfg, {.log = log});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log("feature_dim=" + std::to_string(result.feature_dim));
    log("folds=" + std::to_string(result.folds.size()) + " run=" + std::to_string(result.folds_run()));
    if (result.mca_counts) log("mca_counts=" + gsstex::detail::format_double(*result.mca_counts));
    if (result.mca_foldmean) log("mca_foldmean=" + gsstex::detail::format_double(*result.mca_foldmean));
    auto j = gsstex::to_json(result);
    j["seconds"] = seconds;
    write_json(j, out / "loso_results.json");
    gsstex::write_confusion_csv(result.aggregate, result.class_names, out / "confusion.csv");
    write_run_json(out, "loso", cfg,
                   {{"results", (out / "loso_results.json").string()}, {"confusion", (out / "confusion.csv").string()}});
    return 0;
}

/// "0..8" or "0,1,4" for filters; "1.2,1.4,1.5" for base.
std::vector<double> parse_axis_values(const std::string& text) {
    std::vector<double> values;
    try {
        if (const auto dots = text.find(".."); dots != std::string::npos) {
            const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
            if (hi < lo) throw gsstex::ConfigError("empty sweep range '" + text + "'");
            for (int v = lo; v <= hi; ++v) values.push_back(v);
        } else {
            std::stringstream ss(text);
            for (std::string item; std::getline(ss, item, ',');) values.push_back(std::stod(item));
        }
    } catch (const std::logic_error&) {
        throw gsstex::ConfigError("cannot parse sweep values '" + text + "'");
    }
    if (values.empty()) throw gsstex::ConfigError("sweep needs at least one value");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

int cmd_sweep(const GlobalFlags& g, const fs::path& manifest_path, const std::string& axis, const std::string& spec) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g);
    const auto manifest = gsstex::load_manifest(manifest_path);
    if (axis != "filters" && axis != "base") throw gsstex::ConfigError("sweep axis must be 'filters' or 'base'");
    const auto values = parse_axis_values(spec.empty() ? (axis == "filters" ? "0..8" : "1.2,1.4,1.5") : spec);

    std::ofstream csv(out / "sweep.csv");
    if (!csv) throw gsstex::DataError("cannot write sweep.csv");
    csv << "setting,mca_counts,mca_foldmean,feature_dim\n";
    json rows = json::array();
    auto record = [&](double setting, const gsstex::LosoResult& r) {
        const auto fmt = [](const std::optional<double>& v) { return v ? gsstex::detail::format_double(*v) : std::string(); };
        csv << gsstex::detail::format_double(setting) << ',' << fmt(r.mca_counts) << ',' << fmt(r.mca_foldmean) << ','
            << r.feature_dim << '\n';
        rows.push_back({{"setting", setting},
                        {"mca_counts", r.mca_counts ? json(*r.mca_counts) : json(nullptr)},
                        {"mca_foldmean", r.mca_foldmean ? json(*r.mca_foldmean) : json(nullptr)}});
        log(axis + "=" + gsstex::detail::format_double(setting) + " mca_counts=" + fmt(r.mca_counts));
    };

    if (axis == "filters") {
        for (double v : values)
            if (v < 0 || v != std::floor(v)) throw gsstex::ConfigError("filter counts must be non-negative integers");
        auto top = cfg;
        top.gss.count = static_cast<int>(values.back());
        top.validate();
        const auto cache = gsstex::compute_features(manifest, top);
        for (double v : values) {
            auto c = cfg;
            c.gss.count = static_cast<int>(v);
            record(v, gsstex::run_loso(manifest, cache, c, {.log = log}));
        }
    } else {
        for (double b : values) {
            auto c = cfg;
            c.gss.base = b;
            c.validate();
            record(b, gsstex::run_loso(manifest, c, {.log = log}));
        }
    }
    write_run_json(out, "sweep", cfg, {{"axis", axis}, {"rows", rows}, {"csv", (out / "sweep.csv").string()}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian scale space texture classification"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags g;
    app.add_option("--config", g.config, "config file (TOML subset or a previous run.json)");
    app.add_option("--set", g.overrides, "override a config key, key=value (repeatable)");
    app.add_option("--seed", g.seed, "root seed");
    app.add_option("--jobs", g.jobs, "worker threads");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--framework", g.framework, "lbp or bow");

    std::function<int()> run;

    gsstex::SynthOptions synth;
    auto* s = app.add_subcommand("synth", "write a seeded synthetic texture corpus");
    s->add_option("--classes", synth.classes);
    s->add_option("--per-class", synth.per_class);
    s->add_option("--specimens", synth.specimens_per_class, "specimens per class");
    s->add_option("--size", synth.size);
    s->add_option("--noise", synth.noise, "additive noise sigma in gray levels");
    s->callback([&] { run = [&] { return cmd_synth(g, synth); }; });

    std::string image, manifest, encoder, index, features, model, axis = "filters", values;
    auto* pre = app.add_subcommand("preprocess", "write the scale stack of one image");
    pre->add_option("--image", image)->required();
    pre->callback([&] { run = [&] { return cmd_preprocess(g, image); }; });

    auto* ex = app.add_subcommand("extract", "compute features for an image or a manifest");
    auto* ex_img = ex->add_option("--image", image);
    ex->add_option("--manifest", manifest)->excludes(ex_img);
    ex->callback([&] {
        if (image.empty() && manifest.empty()) throw CLI::ValidationError("extract needs --image or --manifest");
        run = [&] { return cmd_extract(g, image, manifest); };
    });

    auto* fe = app.add_subcommand("fit-encoder", "fit PCA + GMM codebooks on extracted descriptors");
    fe->add_option("--descriptors", index, "descriptors.csv written by extract")->required();
    fe->callback([&] { run = [&] { return cmd_fit_encoder(g, index); }; });

    auto* en = app.add_subcommand("encode", "Fisher-encode extracted descriptors");
    en->add_option("--encoder", encoder)->required();
    en->add_option("--descriptors", index)->required();
    en->callback([&] { run = [&] { return cmd_encode(g, encoder, index); }; });

    auto* tr = app.add_subcommand("train", "train the one-vs-rest linear SVM");
    tr->add_option("--features", features)->required();
    tr->callback([&] { run = [&] { return cmd_train(g, features); }; });

    auto* pr = app.add_subcommand("predict", "predict classes for a feature file");
    pr->add_option("--model", model)->required();
    pr->add_option("--features", features)->required();
    pr->callback([&] { run = [&] { return cmd_predict(g, model, features); }; });

    auto* lo = app.add_subcommand("loso", "leave-one-specimen-out evaluation");
    lo->add_option("--manifest", manifest)->required();
    lo->callback([&] { run = [&] { return cmd_loso(g, manifest); }; });

    auto* sw = app.add_subcommand("sweep", "LOSO over a grid of scale-space settings");
    sw->add_option("--manifest", manifest)->required();
    sw->add_option("--axis", axis, "filters or base");
    sw->add_option("--values", values, "e.g. 0..8 or 1.2,1.4,1.5");
    sw->callback([&] { run = [&] { return cmd_sweep(g, manifest, axis, values); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        return run();
    } catch (const gsstex::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
