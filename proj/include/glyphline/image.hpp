#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace glyphline {

/// 8-bit pixel grid, 1 (gray) or 3 (RGB) channels, row-major interleaved.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("RasterImage: dimensions must be >= 1");
        if (c != 1 && c != 3) throw std::invalid_argument("RasterImage: channels must be 1 or 3");
    }

    std::uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool same_shape(const RasterImage& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Boolean mask over a pixel grid. Stored as one byte per pixel (0 or 1).
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryImage() = default;
    BinaryImage(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("BinaryImage: dimensions must be >= 1");
    }

    bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    std::size_t count_true() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }
};

/// Float working image for filter chains and segmentation. Planar per channel.
struct FloatImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;  // plane-major: channel c occupies [c*w*h, (c+1)*w*h)

    FloatImage() = default;
    FloatImage(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    float& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * width * height; }
    const float* plane(int c) const { return data.data() + static_cast<std::size_t>(c) * width * height; }

    static FloatImage from_raster(const RasterImage& img) {
        FloatImage out(img.width, img.height, img.channels);
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    out.at(x, y, c) = static_cast<float>(img.at(x, y, c));
        return out;
    }
};

}  // namespace glyphline
