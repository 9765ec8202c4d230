#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reid/error.hpp"

namespace reid {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major, channels interleaved.
class Frame {
public:
    Frame() = default;

    Frame(int width, int height, std::vector<std::uint8_t> pixels)
        : width_(width), height_(height), pixels_(std::move(pixels)) {
        if (width < 1 || height < 1) {
            throw InvalidArgument("frame dimensions must be positive, got " +
                                  std::to_string(width) + "x" + std::to_string(height));
        }
        if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
            throw InvalidArgument("frame pixel buffer has " + std::to_string(pixels_.size()) +
                                  " bytes, expected " +
                                  std::to_string(static_cast<std::size_t>(width) * height * 3));
        }
    }

    /// Frame filled with one color.
    static Frame filled(int width, int height, Rgb color) {
        std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
        for (std::size_t i = 0; i < px.size(); i += 3) {
            px[i] = color[0];
            px[i + 1] = color[1];
            px[i + 2] = color[2];
        }
        return Frame(width, height, std::move(px));
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    std::uint8_t at(int x, int y, int c) const noexcept {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }
    std::uint8_t& at(int x, int y, int c) noexcept {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }

    Rgb rgb(int x, int y) const noexcept { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }

    void set(int x, int y, Rgb color) noexcept {
        at(x, y, 0) = color[0];
        at(x, y, 1) = color[1];
        at(x, y, 2) = color[2];
    }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Luma scaled by 1000 (299 R + 587 G + 114 B), exact in integers.
constexpr int luma_milli(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    return 299 * r + 587 * g + 114 * b;
}

inline double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    return luma_milli(r, g, b) / 1000.0;
}

/// Bilinear resampling to (width, height) with pixel-center alignment:
/// destination pixel x samples source coordinate (x + 0.5) * sw / dw - 0.5,
/// clamped to the source extent. Results round to nearest and clamp to [0, 255].
inline Frame rescale_frame(const Frame& src, int width, int height) {
    if (width < 1 || height < 1) {
        throw InvalidArgument("rescale target must be at least 1x1");
    }
    if (width == src.width() && height == src.height()) return src;

    struct Tap {
        int i0, i1;
        double w1;
    };
    auto taps = [](int src_len, int dst_len) {
        std::vector<Tap> out(static_cast<std::size_t>(dst_len));
        const double scale = static_cast<double>(src_len) / dst_len;
        for (int d = 0; d < dst_len; ++d) {
            double s = (d + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
            const int i0 = static_cast<int>(std::floor(s));
            const int i1 = std::min(i0 + 1, src_len - 1);
            out[static_cast<std::size_t>(d)] = {i0, i1, s - i0};
        }
        return out;
    };
    const auto xs = taps(src.width(), width);
    const auto ys = taps(src.height(), height);

    std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
    std::size_t o = 0;
    for (int y = 0; y < height; ++y) {
        const Tap& ty = ys[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const Tap& tx = xs[static_cast<std::size_t>(x)];
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(tx.i0, ty.i0, c) * (1.0 - tx.w1) + src.at(tx.i1, ty.i0, c) * tx.w1;
                const double bot = src.at(tx.i0, ty.i1, c) * (1.0 - tx.w1) + src.at(tx.i1, ty.i1, c) * tx.w1;
                const double v = top * (1.0 - ty.w1) + bot * ty.w1;
                px[o++] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return Frame(width, height, std::move(px));
}

}  // namespace reid
