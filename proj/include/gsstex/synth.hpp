#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gsstex/error.hpp"
#include "gsstex/evaluation.hpp"
#include "gsstex/image.hpp"
#include "gsstex/scalespace.hpp"
#include "gsstex/seed.hpp"

// Seeded synthetic texture corpus for desk-scale verification of the
// pipeline: six texture families, several "specimens" per family with their
// own intensity and scale jitter, plus additive Gaussian noise.
namespace gsstex {

inline constexpr std::array<std::string_view, 6> kSynthClasses = {
    "grating_coarse", "grating_fine", "blobs_sparse", "blobs_dense", "rings", "smooth_noise"};

struct SynthOptions {
    std::size_t classes = 6;
    std::size_t per_class = 50;
    std::size_t specimens_per_class = 5;
    std::size_t size = 70;
    /// Standard deviation of additive noise, in 8-bit gray levels.
    double noise = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (classes < 2 || classes > kSynthClasses.size()) throw ConfigError("synth classes must be in [2, 6]");
        if (specimens_per_class == 0 || per_class < specimens_per_class)
            throw ConfigError("synth needs per_class >= specimens_per_class >= 1");
        if (size < 8) throw ConfigError("synth image size must be >= 8");
        if (!(noise >= 0.0)) throw ConfigError("synth noise must be >= 0");
    }
};

/// Per-specimen appearance shared by all of its images.
struct SpecimenStyle {
    double gain = 1.0;    // texture contrast
    double offset = 0.0;  // background level
    double scale = 1.0;   // spatial scale multiplier
};

inline SpecimenStyle draw_specimen_style(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gain(0.7, 1.0), offset(25.0, 60.0), scale(0.85, 1.15);
    return {gain(rng), offset(rng), scale(rng)};
}

/// Noise-free texture of family `cls` in [0, 1].
inline std::vector<double> synth_texture(std::size_t cls, std::size_t size, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> t(size * size, 0.0);
    auto at = [&](std::size_t x, std::size_t y) -> double& { return t[y * size + x]; };
    switch (cls) {
        case 0:
        case 1: {
            const double period = (cls == 0 ? 14.0 : 7.0) * scale;
            const double theta = unit(rng) * std::numbers::pi, phase = unit(rng) * two_pi;
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x)
                    at(x, y) = 0.5 + 0.5 * std::sin(two_pi * (x * std::cos(theta) + y * std::sin(theta)) / period + phase);
            break;
        }
        case 2:
        case 3: {
            const double density = cls == 2 ? 0.004 : 0.03;
            const double radius = (cls == 2 ? 3.0 : 1.6) * scale;
            std::poisson_distribution<int> count(density * static_cast<double>(size * size));
            const int blobs = std::max(1, count(rng));
            for (int b = 0; b < blobs; ++b) {
                const double bx = unit(rng) * size, by = unit(rng) * size;
                for (std::size_t y = 0; y < size; ++y)
                    for (std::size_t x = 0; x < size; ++x) {
                        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                        at(x, y) += std::exp(-d2 / (2.0 * radius * radius));
                    }
            }
            for (double& v : t) v = std::min(v, 1.0);
            break;
        }
        case 4: {
            const double period = 9.0 * scale;
            const double cx = size * (0.3 + 0.4 * unit(rng)), cy = size * (0.3 + 0.4 * unit(rng));
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x)
                    at(x, y) = 0.5 + 0.5 * std::cos(two_pi * std::hypot(x - cx, y - cy) / period);
            break;
        }
        default: {
            std::normal_distribution<double> normal(0.0, 1.0);
            std::vector<double> white(size * size);
            for (double& v : white) v = normal(rng);
            const GrayImage smooth = convolve(GrayImage(size, size, std::move(white)), gaussian_kernel(2.0 * scale));
            const GrayImage stretched = enhance(smooth);
            std::copy(stretched.pixels().begin(), stretched.pixels().end(), t.begin());
            break;
        }
    }
    return t;
}

/// One image of class `cls` for a given specimen style, on the 8-bit scale
/// (rounded and clamped to [0, 255]).
inline GrayImage synth_image(std::size_t cls, const SpecimenStyle& style, std::size_t size, double noise,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto tex = synth_texture(cls, size, style.scale, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : tex) {
        const double g = style.offset + 150.0 * style.gain * v + (noise > 0.0 ? noise * normal(rng) : 0.0);
        v = std::round(std::clamp(g, 0.0, 255.0));
    }
    return GrayImage(size, size, std::move(tex));
}

/// Writes images under out_dir/images and returns the manifest rows
/// (also saved as out_dir/manifest.csv).
inline DatasetManifest write_synthetic_corpus(const std::filesystem::path& out_dir, const SynthOptions& opt) {
    opt.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    DatasetManifest manifest;
    for (std::size_t c = 0; c < opt.classes; ++c) {
        const std::string cls(kSynthClasses[c]);
        for (std::size_t s = 0; s < opt.specimens_per_class; ++s) {
            const std::string specimen = cls + "_s" + std::to_string(s);
            const auto style = draw_specimen_style(derive_seed(opt.seed, "specimen", c * 1000 + s));
            // Images are dealt round-robin so specimens differ by at most one.
            for (std::size_t i = s; i < opt.per_class; i += opt.specimens_per_class) {
                const auto img = synth_image(c, style, opt.size, opt.noise, derive_seed(opt.seed, "image", c * 100000 + i));
                const auto rel = std::filesystem::path("images") / (specimen + "_" + std::to_string(i) + ".pgm");
                save_image(img, out_dir / rel);
                manifest.entries.push_back({out_dir / rel, cls, specimen});
            }
        }
    }
    save_manifest(manifest, out_dir / "manifest.csv");
    return manifest;
}

}  // namespace gsstex
