#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gsstex/error.hpp"
#include "gsstex/image.hpp"
#include "gsstex/scalespace.hpp"

namespace gsstex {

struct LbpScale {
    int neighbors = 8;
    int radius = 1;

    int bins_riu2() const noexcept { return neighbors + 2; }
    friend bool operator==(const LbpScale&, const LbpScale&) = default;
};

struct LBPConfig {
    std::vector<LbpScale> scales{{8, 1}, {16, 2}, {24, 3}};

    void validate() const {
        if (scales.empty()) throw ConfigError("lbp.scales must not be empty");
        for (const auto& s : scales) {
            if (s.neighbors != 8 && s.neighbors != 16 && s.neighbors != 24)
                throw ConfigError("lbp neighbor count must be 8, 16 or 24, got " +
                                  std::to_string(s.neighbors));
            if (s.radius < 1)
                throw ConfigError("lbp radius must be >= 1, got " + std::to_string(s.radius));
        }
    }

    int max_radius() const {
        int r = 0;
        for (const auto& s : scales) r = std::max(r, s.radius);
        return r;
    }

    std::size_t histogram_length() const {
        std::size_t n = 0;
        for (const auto& s : scales) n += static_cast<std::size_t>(s.bins_riu2());
        return n;
    }
};

/// Parses "8:1,16:2,24:3".
inline std::vector<LbpScale> parse_lbp_scales(const std::string& text) {
    std::vector<LbpScale> scales;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("lbp.scales entry needs n:r, got '" + item + "'");
        try {
            scales.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
        } catch (const std::logic_error&) {
            throw ConfigError("lbp.scales entry is not numeric: '" + item + "'");
        }
    }
    return scales;
}

inline std::string format_lbp_scales(const std::vector<LbpScale>& scales) {
    std::string out;
    for (const auto& s : scales) {
        if (!out.empty()) out += ',';
        out += std::to_string(s.neighbors) + ":" + std::to_string(s.radius);
    }
    return out;
}

/// Precomputed bilinear sample of one circle point relative to a center pixel.
struct NeighborOffset {
    int ix = 0;
    int iy = 0;
    double fx = 0.0;
    double fy = 0.0;
};

namespace detail {

inline double snap_to_grid(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

inline NeighborOffset make_offset(double dx, double dy) {
    dx = snap_to_grid(dx);
    dy = snap_to_grid(dy);
    const double fx0 = std::floor(dx), fy0 = std::floor(dy);
    return {static_cast<int>(fx0), static_cast<int>(fy0), dx - fx0, dy - fy0};
}

}  // namespace detail

/// Circle sample offsets: neighbor k sits at angle start + 2*pi*k/n measured
/// counterclockwise as displayed, i.e. (r cos a, -r sin a) in row-major pixel
/// coordinates with y pointing down.
inline std::vector<NeighborOffset> circle_offsets(int neighbors, double radius, double start = 0.0) {
    std::vector<NeighborOffset> offsets(static_cast<std::size_t>(neighbors));
    for (int k = 0; k < neighbors; ++k) {
        const double a = start + 2.0 * std::numbers::pi * k / neighbors;
        offsets[static_cast<std::size_t>(k)] = detail::make_offset(radius * std::cos(a), -radius * std::sin(a));
    }
    return offsets;
}

/// Bilinear sample at (x + off). Written in lerp form so flat regions
/// reproduce their value exactly.
inline double sample_at(const GrayImage& img, std::size_t x, std::size_t y, const NeighborOffset& off) {
    const auto sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + off.ix);
    const auto sy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + off.iy);
    const double* r0 = img.row(sy);
    double top = r0[sx];
    if (off.fx != 0.0) top += off.fx * (r0[sx + 1] - r0[sx]);
    if (off.fy == 0.0) return top;
    const double* r1 = img.row(sy + 1);
    double bottom = r1[sx];
    if (off.fx != 0.0) bottom += off.fx * (r1[sx + 1] - r1[sx]);
    return top + off.fy * (bottom - top);
}

/// Binary pattern at (x, y): bit k set iff neighbor k >= center.
inline std::uint32_t lbp_code_at(const GrayImage& img, std::size_t x, std::size_t y,
                                 const std::vector<NeighborOffset>& offsets) {
    const double center = img(x, y);
    std::uint32_t code = 0;
    for (std::size_t k = 0; k < offsets.size(); ++k)
        if (sample_at(img, x, y, offsets[k]) >= center) code |= std::uint32_t{1} << k;
    return code;
}

inline std::uint32_t lbp_code(const GrayImage& img, std::size_t cx, std::size_t cy, int neighbors, int radius) {
    if (neighbors < 1 || neighbors > 32) throw ConfigError("lbp neighbor count must be in [1, 32]");
    if (radius < 1) throw ConfigError("lbp radius must be >= 1");
    const auto r = static_cast<std::size_t>(radius);
    if (cx < r || cy < r || cx + r >= img.width() || cy + r >= img.height())
        throw DataError("lbp center (" + std::to_string(cx) + "," + std::to_string(cy) +
                        ") too close to the border for radius " + std::to_string(radius));
    return lbp_code_at(img, cx, cy, circle_offsets(neighbors, radius));
}

/// Circular 0/1 transition count of an n-bit pattern.
inline int circular_transitions(std::uint32_t code, int neighbors) {
    const std::uint32_t mask = neighbors >= 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << neighbors) - 1;
    code &= mask;
    const std::uint32_t rotated = ((code >> 1) | (code << (neighbors - 1))) & mask;
    return std::popcount(code ^ rotated);
}

/// Rotation-invariant uniform bin: popcount for patterns with at most two
/// transitions, n+1 otherwise.
inline int riu2_bin(std::uint32_t code, int neighbors) {
    if (circular_transitions(code, neighbors) <= 2) return std::popcount(code);
    return neighbors + 1;
}

/// 59-bin uniform mapping for 8-neighbor codes: the 58 uniform patterns in
/// ascending code order, then one bin for everything else.
inline const std::array<std::uint8_t, 256>& u2_table() {
    static const auto table = [] {
        std::array<std::uint8_t, 256> t{};
        std::uint8_t next = 0;
        for (std::uint32_t code = 0; code < 256; ++code)
            t[code] = circular_transitions(code, 8) <= 2 ? next++ : 58;
        return t;
    }();
    return table;
}

inline constexpr std::size_t kU2Bins = 59;

/// Concatenated per-scale riu2 histograms, each block L1-normalized. All scales
/// scan the same region: pixels at least max_radius from every border.
inline std::vector<double> lbp_histogram(const GrayImage& img, const LBPConfig& cfg) {
    cfg.validate();
    const auto margin = static_cast<std::size_t>(cfg.max_radius());
    if (img.width() < 2 * margin + 1 || img.height() < 2 * margin + 1)
        throw DataError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                        " too small for lbp radius " + std::to_string(margin));
    std::vector<double> hist;
    hist.reserve(cfg.histogram_length());
    std::vector<double> block;
    for (const auto& scale : cfg.scales) {
        const auto offsets = circle_offsets(scale.neighbors, scale.radius);
        block.assign(static_cast<std::size_t>(scale.bins_riu2()), 0.0);
        std::size_t population = 0;
        for (std::size_t y = margin; y + margin < img.height(); ++y)
            for (std::size_t x = margin; x + margin < img.width(); ++x) {
                block[static_cast<std::size_t>(riu2_bin(lbp_code_at(img, x, y, offsets), scale.neighbors))] += 1.0;
                ++population;
            }
        for (double& b : block) b /= static_cast<double>(population);
        hist.insert(hist.end(), block.begin(), block.end());
    }
    return hist;
}

/// Level-ordered concatenation of lbp_histogram over a scale stack.
inline std::vector<double> gss_lbp_representation(const ScaleStack& stack, const LBPConfig& cfg) {
    if (stack.levels.empty()) throw DataError("empty scale stack");
    std::vector<double> out;
    out.reserve(stack.size() * cfg.histogram_length());
    for (const auto& level : stack.levels) {
        const auto h = lbp_histogram(level, cfg);
        out.insert(out.end(), h.begin(), h.end());
    }
    return out;
}

}  // namespace gsstex
