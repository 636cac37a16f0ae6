#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gsstex/binary_io.hpp"
#include "gsstex/error.hpp"
#include "gsstex/image.hpp"
#include "gsstex/lbp.hpp"
#include "gsstex/parallel.hpp"
#include "gsstex/scalespace.hpp"

namespace gsstex {

/// Dense grid of circular patches.
struct SamplingGrid {
    int radius = 13;
    int stride_x = 1;
    int stride_y = 2;

    void validate() const {
        if (radius < 1) throw ConfigError("load.radius must be >= 1");
        if (stride_x < 1 || stride_y < 1) throw ConfigError("load strides must be >= 1");
    }
};

inline constexpr int kLoadRings = 4;
inline constexpr int kLoadNeighbors = 8;
inline constexpr std::size_t kLoadDim = kLoadRings * kU2Bins;  // 236

struct PatchCenter {
    std::size_t x = 0;
    std::size_t y = 0;
    friend bool operator==(const PatchCenter&, const PatchCenter&) = default;
};

/// Row-major list of patch centers whose full patch lies inside a
/// width x height image.
inline std::vector<PatchCenter> dense_sample(std::size_t width, std::size_t height, const SamplingGrid& grid) {
    grid.validate();
    std::vector<PatchCenter> centers;
    const auto r = static_cast<std::size_t>(grid.radius);
    if (width < 2 * r + 1 || height < 2 * r + 1) return centers;
    for (std::size_t y = r; y + r < height; y += static_cast<std::size_t>(grid.stride_y))
        for (std::size_t x = r; x + r < width; x += static_cast<std::size_t>(grid.stride_x))
            centers.push_back({x, y});
    return centers;
}

inline std::vector<PatchCenter> dense_sample(const GrayImage& img, const SamplingGrid& grid) {
    return dense_sample(img.width(), img.height(), grid);
}

struct Provenance {
    std::uint16_t level = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Bag of equal-length local descriptors, stored contiguously, with the
/// (level, x, y) each one came from. Real may be float to halve cache size.
template <typename Real = double>
class DescriptorSet {
public:
    DescriptorSet() = default;
    explicit DescriptorSet(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return provenance_.size(); }
    bool empty() const noexcept { return provenance_.empty(); }

    std::span<const Real> row(std::size_t i) const noexcept {
        return {values_.data() + i * dim_, dim_};
    }
    const std::vector<Real>& values() const noexcept { return values_; }
    const std::vector<Provenance>& provenance() const noexcept { return provenance_; }

    template <typename T>
    void push_back(std::span<const T> descriptor, Provenance where) {
        if (descriptor.size() != dim_) throw DataError("descriptor length mismatch");
        values_.insert(values_.end(), descriptor.begin(), descriptor.end());
        provenance_.push_back(where);
    }

    void reserve(std::size_t count) {
        values_.reserve(count * dim_);
        provenance_.reserve(count);
    }

    /// Keeps only descriptors whose level is below max_level.
    template <typename Out = Real>
    DescriptorSet<Out> levels_below(std::size_t max_level) const {
        DescriptorSet<Out> out(dim_);
        for (std::size_t i = 0; i < size(); ++i)
            if (provenance_[i].level < max_level) out.push_back(row(i), provenance_[i]);
        return out;
    }

private:
    std::size_t dim_ = 0;
    std::vector<Real> values_;
    std::vector<Provenance> provenance_;
};

/// Precomputed patch geometry for one grid radius; reused across centers.
class LoadExtractor {
public:
    explicit LoadExtractor(SamplingGrid grid) : grid_(grid) {
        grid_.validate();
        const int R = grid_.radius;
        const double sigma = R / 2.0;
        for (int dy = -R; dy <= R; ++dy)
            for (int dx = -R; dx <= R; ++dx) {
                const int d2 = dx * dx + dy * dy;
                if (d2 <= (R - 1) * (R - 1))
                    gradient_support_.push_back({dx, dy, std::exp(-d2 / (2.0 * sigma * sigma))});
                for (int ring = 1; ring <= kLoadRings; ++ring)
                    if (R - ring >= 0 && d2 <= (R - ring) * (R - ring))
                        ring_pixels_[static_cast<std::size_t>(ring - 1)].push_back({dx, dy});
            }
    }

    const SamplingGrid& grid() const noexcept { return grid_; }

    /// Angle in [0, 2pi) of the Gaussian-weighted mean central-difference
    /// gradient, measured with atan2(gy, gx) in pixel coordinates (y down).
    /// A zero mean gradient yields 0.
    double orientation(const GrayImage& img, std::size_t cx, std::size_t cy) const {
        check_bounds(img, cx, cy);
        double gx = 0.0, gy = 0.0;
        for (const auto& s : gradient_support_) {
            const auto x = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cx) + s.dx);
            const auto y = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cy) + s.dy);
            gx += s.weight * 0.5 * (img(x + 1, y) - img(x - 1, y));
            gy += s.weight * 0.5 * (img(x, y + 1) - img(x, y - 1));
        }
        if (std::hypot(gx, gy) <= 1e-300) return 0.0;
        double a = std::atan2(gy, gx);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        if (a >= 2.0 * std::numbers::pi) a = 0.0;
        return a;
    }

    /// Writes the 236-value descriptor for the patch at (cx, cy) into out.
    void describe(const GrayImage& img, std::size_t cx, std::size_t cy, std::span<double> out) const {
        if (out.size() != kLoadDim) throw DataError("LOAD output buffer must hold 236 values");
        if (grid_.radius < kLoadRings)
            throw ConfigError("load.radius must be at least the outer ring radius (4)");
        const double theta = orientation(img, cx, cy);
        const auto& u2 = u2_table();
        const auto w = static_cast<std::ptrdiff_t>(img.width());
        const double* px = img.pixels().data();
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(cy) * w + static_cast<std::ptrdiff_t>(cx);

        for (int ring = 1; ring <= kLoadRings; ++ring) {
            // Neighbor 0 points along the patch gradient; the visual
            // counterclockwise angle of a y-down direction theta is -theta.
            const auto offsets = circle_offsets(kLoadNeighbors, ring, -theta);
            std::array<LinearTap, kLoadNeighbors> taps{};
            for (std::size_t k = 0; k < taps.size(); ++k)
                taps[k] = {offsets[k].iy * w + offsets[k].ix, w, offsets[k].fx, offsets[k].fy};

            auto block = out.subspan(static_cast<std::size_t>(ring - 1) * kU2Bins, kU2Bins);
            std::fill(block.begin(), block.end(), 0.0);
            const auto& pixels = ring_pixels_[static_cast<std::size_t>(ring - 1)];
            for (const auto& p : pixels) {
                const std::ptrdiff_t idx = base + p.dy * w + p.dx;
                const double center = px[idx];
                unsigned code = 0;
                for (std::size_t k = 0; k < taps.size(); ++k)
                    if (taps[k].sample(px + idx) >= center) code |= 1u << k;
                block[u2[code]] += 1.0;
            }
            const double n = static_cast<double>(pixels.size());
            for (double& b : block) b /= n;
        }
    }

    std::vector<double> describe(const GrayImage& img, std::size_t cx, std::size_t cy) const {
        std::vector<double> out(kLoadDim);
        describe(img, cx, cy, out);
        return out;
    }

    void check_bounds(const GrayImage& img, std::size_t cx, std::size_t cy) const {
        const auto r = static_cast<std::size_t>(grid_.radius);
        if (cx < r || cy < r || cx + r >= img.width() || cy + r >= img.height())
            throw DataError("patch at (" + std::to_string(cx) + "," + std::to_string(cy) +
                            ") with radius " + std::to_string(r) + " leaves the image");
    }

private:
    struct WeightedPixel {
        int dx, dy;
        double weight;
    };
    struct PixelOffset {
        int dx, dy;
    };
    struct LinearTap {
        std::ptrdiff_t offset = 0;
        std::ptrdiff_t stride = 0;
        double fx = 0.0, fy = 0.0;

        double sample(const double* at) const noexcept {
            const double* p = at + offset;
            double top = p[0];
            if (fx != 0.0) top += fx * (p[1] - p[0]);
            if (fy == 0.0) return top;
            const double* q = p + stride;
            double bottom = q[0];
            if (fx != 0.0) bottom += fx * (q[1] - q[0]);
            return top + fy * (bottom - top);
        }
    };

    SamplingGrid grid_;
    std::vector<WeightedPixel> gradient_support_;
    std::array<std::vector<PixelOffset>, kLoadRings> ring_pixels_;
};

inline double estimate_orientation(const GrayImage& img, std::size_t cx, std::size_t cy, int radius) {
    return LoadExtractor(SamplingGrid{radius, 1, 1}).orientation(img, cx, cy);
}

inline std::vector<double> load_at(const GrayImage& img, std::size_t cx, std::size_t cy, const SamplingGrid& grid) {
    return LoadExtractor(grid).describe(img, cx, cy);
}

/// Descriptors for every level x every grid center, level-major then
/// row-major.
template <typename Real = double>
DescriptorSet<Real> extract_all(const ScaleStack& stack, const SamplingGrid& grid, std::size_t jobs = 1) {
    const LoadExtractor extractor(grid);
    DescriptorSet<Real> set(kLoadDim);
    if (stack.levels.empty()) return set;
    const auto centers = dense_sample(stack.levels.front(), grid);
    const std::size_t per_level = centers.size();
    const std::size_t total = per_level * stack.size();
    std::vector<double> buffer(total * kLoadDim);
    parallel_for(stack.size(), jobs, [&](std::size_t level) {
        for (std::size_t c = 0; c < per_level; ++c) {
            std::span<double> out(buffer.data() + (level * per_level + c) * kLoadDim, kLoadDim);
            extractor.describe(stack.levels[level], centers[c].x, centers[c].y, out);
        }
    });
    set.reserve(total);
    for (std::size_t level = 0; level < stack.size(); ++level)
        for (std::size_t c = 0; c < per_level; ++c) {
            const std::span<const double> row(buffer.data() + (level * per_level + c) * kLoadDim, kLoadDim);
            set.push_back(row, Provenance{static_cast<std::uint16_t>(level),
                                          static_cast<std::uint16_t>(centers[c].x),
                                          static_cast<std::uint16_t>(centers[c].y)});
        }
    return set;
}

/// Binary feature file: u32 dim, u64 count, count*dim float32 rows, then
/// optionally count provenance triples of u16 (level, x, y). Little-endian.
template <typename Real>
void write_feature_file(const std::filesystem::path& path, const DescriptorSet<Real>& set, bool with_provenance = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file: " + path.string());
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
    binio::write_le<std::uint64_t>(out, set.size());
    for (Real v : set.values()) binio::write_le<float>(out, static_cast<float>(v));
    if (with_provenance)
        for (const auto& p : set.provenance()) {
            binio::write_le<std::uint16_t>(out, p.level);
            binio::write_le<std::uint16_t>(out, p.x);
            binio::write_le<std::uint16_t>(out, p.y);
        }
    if (!out) throw DataError("failed writing feature file: " + path.string());
}

inline DescriptorSet<float> read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path.string());
    const auto dim = binio::read_le<std::uint32_t>(in);
    const auto count = binio::read_le<std::uint64_t>(in);
    const auto file_size = std::filesystem::file_size(path);
    const std::uint64_t body = 12 + count * dim * 4;
    if (dim == 0 || file_size < body) throw DataError("feature file truncated: " + path.string());
    const bool has_provenance = file_size == body + count * 6;
    if (!has_provenance && file_size != body) throw DataError("feature file has trailing bytes: " + path.string());

    std::vector<float> values(count * dim);
    for (float& v : values) v = binio::read_le<float>(in);
    std::vector<Provenance> prov(count);
    if (has_provenance)
        for (auto& p : prov) {
            p.level = binio::read_le<std::uint16_t>(in);
            p.x = binio::read_le<std::uint16_t>(in);
            p.y = binio::read_le<std::uint16_t>(in);
        }
    DescriptorSet<float> set(dim);
    set.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        set.push_back(std::span<const float>(values.data() + i * dim, dim), prov[i]);
    return set;
}

}  // namespace gsstex
