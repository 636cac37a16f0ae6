#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsstex/error.hpp"

namespace gsstex {

/// Row-major grid of double intensities. Immutable once built apart from
/// explicit element writes by its owner; every constructor validates size and
/// finiteness.
class GrayImage {
public:
    GrayImage() = default;

    GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), data_(width * height, fill) {
        validate();
    }

    GrayImage(std::size_t width, std::size_t height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        validate();
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(std::size_t x, std::size_t y) const noexcept {
        return data_[y * width_ + x];
    }
    double& operator()(std::size_t x, std::size_t y) noexcept {
        return data_[y * width_ + x];
    }

    std::span<const double> pixels() const noexcept { return data_; }
    std::span<double> pixels() noexcept { return data_; }
    const double* row(std::size_t y) const noexcept { return data_.data() + y * width_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    void validate() const {
        if (width_ == 0 || height_ == 0)
            throw DataError("image dimensions must be positive");
        if (data_.size() != width_ * height_)
            throw DataError("image data length does not match width*height");
        for (double v : data_)
            if (!std::isfinite(v)) throw DataError("image contains non-finite intensity");
    }

    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// Min-max stretch to [0,1]. A constant image maps to all zeros.
inline GrayImage enhance(const GrayImage& img) {
    const auto px = img.pixels();
    const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    std::vector<double> out(px.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < px.size(); ++i) out[i] = (px[i] - lo) / range;
    }
    return GrayImage(img.width(), img.height(), std::move(out));
}

/// Rotates by 90 degrees counterclockwise (as displayed, y pointing down).
inline GrayImage rotate90(const GrayImage& img) {
    const std::size_t w = img.width(), h = img.height();
    GrayImage out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out(y, w - 1 - x) = img(x, y);
    return out;
}

template <typename Fn>
GrayImage map_intensity(const GrayImage& img, Fn&& fn) {
    std::vector<double> out(img.size());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = fn(px[i]);
    return GrayImage(img.width(), img.height(), std::move(out));
}

struct LoadOptions {
    /// Convert binary PPM (P6) colour input to luminance instead of rejecting it.
    bool luminance_from_color = false;
};

namespace detail {

inline std::string read_pnm_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

inline std::size_t parse_pnm_int(const std::string& token, const std::string& what) {
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
        throw DataError("malformed PNM header field: " + what);
    return static_cast<std::size_t>(std::stoull(token));
}

}  // namespace detail

/// Reads an 8- or 16-bit binary PGM (P5). Colour P6 input is rejected unless
/// options.luminance_from_color is set.
inline GrayImage load_image(const std::filesystem::path& path, LoadOptions options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image file: " + path.string());

    const std::string magic = detail::read_pnm_token(in);
    const bool color = magic == "P6";
    if (magic != "P5" && !color)
        throw DataError("unsupported image format (expected binary PGM P5): " + path.string());
    if (color && !options.luminance_from_color)
        throw DataError("colour image rejected (enable luminance conversion): " + path.string());

    const std::size_t width = detail::parse_pnm_int(detail::read_pnm_token(in), "width");
    const std::size_t height = detail::parse_pnm_int(detail::read_pnm_token(in), "height");
    const std::size_t maxval = detail::parse_pnm_int(detail::read_pnm_token(in), "maxval");
    if (width == 0 || height == 0) throw DataError("zero-dimension image: " + path.string());
    if (maxval == 0 || maxval > 65535) throw DataError("PNM maxval out of range: " + path.string());

    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    const std::size_t channels = color ? 3 : 1;
    std::vector<unsigned char> raw(width * height * channels * bytes_per_sample);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw DataError("truncated pixel data: " + path.string());

    auto sample = [&](std::size_t i) -> double {
        if (bytes_per_sample == 1) return raw[i];
        return static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);  // big-endian
    };
    std::vector<double> data(width * height);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (color)
            data[i] = 0.299 * sample(3 * i) + 0.587 * sample(3 * i + 1) + 0.114 * sample(3 * i + 2);
        else
            data[i] = sample(i);
    }
    return GrayImage(width, height, std::move(data));
}

struct SaveOptions {
    /// 8 or 16.
    int bit_depth = 8;
    /// Treat intensities as [0,1] and scale them up to the container range.
    bool unit_range = false;
};

/// Writes a binary PGM. Values are rounded and clamped to [0, 2^depth - 1].
inline void save_image(const GrayImage& img, const std::filesystem::path& path, SaveOptions options = {}) {
    if (options.bit_depth != 8 && options.bit_depth != 16)
        throw DataError("bit depth must be 8 or 16");
    const double maxval = options.bit_depth == 8 ? 255.0 : 65535.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image file: " + path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << '\n'
        << static_cast<int>(maxval) << '\n';
    for (double v : img.pixels()) {
        const double scaled = options.unit_range ? v * maxval : v;
        const auto q = static_cast<std::uint32_t>(std::lround(std::clamp(scaled, 0.0, maxval)));
        if (options.bit_depth == 8) {
            out.put(static_cast<char>(q));
        } else {
            out.put(static_cast<char>(q >> 8));
            out.put(static_cast<char>(q & 0xFF));
        }
    }
    if (!out) throw DataError("failed writing image file: " + path.string());
}

}  // namespace gsstex
