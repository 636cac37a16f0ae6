#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "gsstex/error.hpp"
#include "gsstex/image.hpp"
#include "gsstex/parallel.hpp"

namespace gsstex {

/// Unnormalized isotropic 2-D Gaussian density 1/(2 pi s^2) exp(-(x^2+y^2)/(2 s^2)).
inline double gaussian_density(double x, double y, double sigma) {
    const double s2 = sigma * sigma;
    return std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
}

/// Truncated, normalized Gaussian. The 2-D weights are the outer product of
/// the normalized 1-D profile, so convolution can run as two 1-D passes.
struct Kernel2D {
    int radius = 0;
    double sigma = 0.0;
    std::vector<double> profile;  // 2*radius+1 taps, sums to 1
    std::vector<double> weights;  // (2*radius+1)^2, row-major, dy-major

    int side() const noexcept { return 2 * radius + 1; }
    double weight(int dx, int dy) const noexcept {
        return weights[static_cast<std::size_t>((dy + radius) * side() + (dx + radius))];
    }
};

inline int gaussian_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

inline Kernel2D gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ConfigError("gaussian sigma must be positive, got " + std::to_string(sigma));
    Kernel2D k;
    k.sigma = sigma;
    k.radius = gaussian_radius(sigma);
    const int side = k.side();
    k.profile.resize(static_cast<std::size_t>(side));
    double total = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k.profile[static_cast<std::size_t>(i + k.radius)] = w;
        total += w;
    }
    for (double& w : k.profile) w /= total;
    k.weights.resize(static_cast<std::size_t>(side * side));
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            k.weights[static_cast<std::size_t>(y * side + x)] =
                k.profile[static_cast<std::size_t>(x)] * k.profile[static_cast<std::size_t>(y)];
    return k;
}

/// Separable convolution with edge-replicated borders; output has the input's
/// dimensions.
inline GrayImage convolve(const GrayImage& img, const Kernel2D& k) {
    const std::size_t w = img.width(), h = img.height();
    const auto r = static_cast<std::size_t>(k.radius);
    if (r > std::min(w, h))
        throw DataError("kernel of radius " + std::to_string(r) + " exceeds image extent " +
                        std::to_string(w) + "x" + std::to_string(h));
    const double* taps = k.profile.data();
    const std::size_t side = k.profile.size();

    std::vector<double> padded(std::max(w, h) + 2 * r);
    std::vector<double> tmp(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        const double* src = img.row(y);
        for (std::size_t i = 0; i < w + 2 * r; ++i) {
            const auto x = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(r);
            padded[i] = src[std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1)];
        }
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < side; ++t) acc += taps[t] * padded[x + t];
            tmp[y * w + x] = acc;
        }
    }

    std::vector<double> out(w * h);
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t i = 0; i < h + 2 * r; ++i) {
            const auto y = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(r);
            padded[i] = tmp[static_cast<std::size_t>(
                            std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1)) * w + x];
        }
        for (std::size_t y = 0; y < h; ++y) {
            double acc = 0.0;
            for (std::size_t t = 0; t < side; ++t) acc += taps[t] * padded[y + t];
            out[y * w + x] = acc;
        }
    }
    return GrayImage(w, h, std::move(out));
}

struct ScaleStackConfig {
    double base = 1.5;
    int count = 7;

    void validate() const {
        if (!(base > 1.0) || !std::isfinite(base))
            throw ConfigError("gss.base must be > 1, got " + std::to_string(base));
        if (count < 0 || count > 32)
            throw ConfigError("gss.count must be in [0, 32], got " + std::to_string(count));
    }

    /// sigma of level n: 0 for the original, base^(n-1) for filtered levels.
    double sigma(int level) const { return level == 0 ? 0.0 : std::pow(base, level - 1); }
};

/// Original image followed by `count` independently filtered copies.
struct ScaleStack {
    std::vector<GrayImage> levels;
    std::vector<double> sigmas;

    std::size_t size() const noexcept { return levels.size(); }
};

inline ScaleStack build_scale_stack(const GrayImage& img, const ScaleStackConfig& cfg,
                                    std::size_t jobs = 1) {
    cfg.validate();
    ScaleStack stack;
    const auto levels = static_cast<std::size_t>(cfg.count) + 1;
    stack.levels.resize(levels);
    stack.sigmas.resize(levels);
    parallel_for(levels, jobs, [&](std::size_t n) {
        const double sigma = cfg.sigma(static_cast<int>(n));
        stack.sigmas[n] = sigma;
        stack.levels[n] = n == 0 ? img : convolve(img, gaussian_kernel(sigma));
    });
    return stack;
}

}  // namespace gsstex
