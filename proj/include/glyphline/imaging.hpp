#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "glyphline/box.hpp"
#include "glyphline/image.hpp"

namespace glyphline {

// ---------------------------------------------------------------------------
// Grayscale
// ---------------------------------------------------------------------------

/// ITU-R 601 luma conversion. 1-channel input is returned unchanged.
inline RasterImage to_grayscale(const RasterImage& img) {
    if (img.channels == 1) return img;
    RasterImage out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double g = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(g));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian smoothing
// ---------------------------------------------------------------------------

struct GaussianSpec {
    double sigma = 1.0;
    int kernel_size = 0;  // 0 means derived from sigma: 2*ceil(3*sigma)+1

    static GaussianSpec from_sigma(double s) {
        if (s <= 0) throw std::invalid_argument("GaussianSpec: sigma must be > 0");
        return GaussianSpec{s, 0};
    }

    /// Fixed odd kernel size with sigma derived the usual 0.3*((k-1)/2 - 1) + 0.8 way.
    static GaussianSpec from_kernel_size(int k) {
        if (k < 1 || k % 2 == 0) throw std::invalid_argument("GaussianSpec: kernel size must be odd and >= 1");
        const double s = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8;
        return GaussianSpec{s, k};
    }

    int effective_size() const {
        if (kernel_size > 0) return kernel_size;
        return 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    }

    /// Symmetric 1-D kernel, weights normalized to sum 1.
    std::vector<double> kernel() const {
        if (sigma <= 0) throw std::invalid_argument("GaussianSpec: sigma must be > 0");
        const int size = effective_size();
        const int r = size / 2;
        std::vector<double> k(size);
        double sum = 0.0;
        for (int i = -r; i <= r; ++i) {
            const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
            k[i + r] = v;
            sum += v;
        }
        for (auto& v : k) v /= sum;
        return k;
    }
};

namespace detail {

/// Reflect-at-border index folding (mirror without repeating the edge pixel).
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

inline void convolve_rows(const std::vector<double>& in, std::vector<double>& out,
                          int w, int h, const std::vector<double>& kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    for (int y = 0; y < h; ++y) {
        const double* row = in.data() + static_cast<std::size_t>(y) * w;
        double* orow = out.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += kernel[i + r] * row[mirror_index(x + i, w)];
            orow[x] = acc;
        }
    }
}

inline void convolve_cols(const std::vector<double>& in, std::vector<double>& out,
                          int w, int h, const std::vector<double>& kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += kernel[i + r] * in[static_cast<std::size_t>(mirror_index(y + i, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

/// Separable Gaussian on one double plane, reflect borders.
inline std::vector<double> blur_plane(const std::vector<double>& plane, int w, int h,
                                      const std::vector<double>& kernel) {
    std::vector<double> tmp(plane.size()), out(plane.size());
    convolve_rows(plane, tmp, w, h, kernel);
    convolve_cols(tmp, out, w, h, kernel);
    return out;
}

}  // namespace detail

/// Separable Gaussian blur with reflect-at-border padding.
inline RasterImage gaussian_blur(const RasterImage& img, const GaussianSpec& spec) {
    const auto kernel = spec.kernel();
    RasterImage out(img.width, img.height, img.channels);
    const std::size_t n = img.pixel_count();
    std::vector<double> plane(n);
    for (int c = 0; c < img.channels; ++c) {
        for (std::size_t i = 0; i < n; ++i) plane[i] = img.data[i * img.channels + c];
        const auto blurred = detail::blur_plane(plane, img.width, img.height, kernel);
        for (std::size_t i = 0; i < n; ++i)
            out.data[i * img.channels + c] =
                static_cast<std::uint8_t>(std::lround(std::clamp(blurred[i], 0.0, 255.0)));
    }
    return out;
}

/// Gaussian blur of a float plane (used on binary masks and segmentation input).
inline std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int w, int h,
                                               const GaussianSpec& spec) {
    return detail::blur_plane(plane, w, h, spec.kernel());
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

struct OtsuResult {
    int threshold = 0;
    BinaryImage mask;
};

/// Otsu's method over the 256-bin histogram. The returned threshold is the
/// lowest value maximizing between-class variance; mask bit = pixel > threshold.
/// A constant image yields that constant as threshold and an all-false mask.
inline OtsuResult otsu_threshold(const RasterImage& img) {
    if (img.channels != 1) throw std::invalid_argument("otsu_threshold: image must be single-channel");

    std::int64_t hist[256] = {0};
    for (std::size_t i = 0; i < img.data.size(); ++i) hist[img.data[i]]++;

    const std::int64_t total = static_cast<std::int64_t>(img.pixel_count());
    std::int64_t sum_all = 0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<std::int64_t>(v) * hist[v];

    int best_t = -1;
    double best_var = -1.0;
    std::int64_t weight_bg = 0, sum_bg = 0;
    for (int t = 0; t < 256; ++t) {
        weight_bg += hist[t];
        sum_bg += static_cast<std::int64_t>(t) * hist[t];
        const std::int64_t weight_fg = total - weight_bg;
        if (weight_bg == 0 || weight_fg == 0) continue;
        const double mean_bg = static_cast<double>(sum_bg) / static_cast<double>(weight_bg);
        const double mean_fg = static_cast<double>(sum_all - sum_bg) / static_cast<double>(weight_fg);
        const double diff = mean_bg - mean_fg;
        const double var = static_cast<double>(weight_bg) * static_cast<double>(weight_fg) * diff * diff;
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }

    OtsuResult res;
    if (best_t < 0) {
        // constant image
        int value = 0;
        for (int v = 0; v < 256; ++v)
            if (hist[v] > 0) { value = v; break; }
        res.threshold = value;
        res.mask = BinaryImage(img.width, img.height, false);
        return res;
    }

    res.threshold = best_t;
    res.mask = BinaryImage(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        res.mask.bits[i] = img.data[i] > best_t ? 1 : 0;
    return res;
}

/// Threshold at the arithmetic mean of the intensities inside `region`
/// (the designated background sample). Bit = pixel > mean.
inline BinaryImage mean_threshold(const RasterImage& img, const Box& region) {
    if (img.channels != 1) throw std::invalid_argument("mean_threshold: image must be single-channel");
    if (region.x < 0 || region.y < 0 || region.right() > img.width || region.bottom() > img.height)
        throw std::invalid_argument("mean_threshold: region outside image bounds");

    std::int64_t sum = 0;
    for (int y = region.y; y < region.bottom(); ++y)
        for (int x = region.x; x < region.right(); ++x)
            sum += img.at(x, y);
    const double mean = static_cast<double>(sum) / static_cast<double>(region.area());

    BinaryImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.bits[i] = static_cast<double>(img.data[i]) > mean ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Canny with median-derived hysteresis thresholds
// ---------------------------------------------------------------------------

struct CannyThresholds {
    double lower = 0.0;
    double upper = 0.0;
};

/// lower = max(0, (1-k)*median), upper = min(255, (1+k)*median), k = 0.33.
inline CannyThresholds canny_auto_thresholds(const RasterImage& img) {
    std::vector<std::uint8_t> sorted(img.data);
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    constexpr double k = 0.33;
    return {std::max(0.0, (1.0 - k) * median), std::min(255.0, (1.0 + k) * median)};
}

namespace detail {

struct Gradients {
    std::vector<double> mag;
    std::vector<int> gx, gy;
};

/// 3x3 Sobel with reflect borders.
inline Gradients sobel(const RasterImage& img) {
    const int w = img.width, h = img.height;
    Gradients g;
    g.mag.resize(img.pixel_count());
    g.gx.resize(img.pixel_count());
    g.gy.resize(img.pixel_count());
    for (int y = 0; y < h; ++y) {
        const int ym = mirror_index(y - 1, h), yp = mirror_index(y + 1, h);
        for (int x = 0; x < w; ++x) {
            const int xm = mirror_index(x - 1, w), xp = mirror_index(x + 1, w);
            const int tl = img.at(xm, ym), tc = img.at(x, ym), tr = img.at(xp, ym);
            const int ml = img.at(xm, y), mr = img.at(xp, y);
            const int bl = img.at(xm, yp), bc = img.at(x, yp), br = img.at(xp, yp);
            const int gx = (tr + 2 * mr + br) - (tl + 2 * ml + bl);
            const int gy = (bl + 2 * bc + br) - (tl + 2 * tc + tr);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            g.gx[i] = gx;
            g.gy[i] = gy;
            g.mag[i] = std::sqrt(static_cast<double>(gx) * gx + static_cast<double>(gy) * gy);
        }
    }
    return g;
}

}  // namespace detail

/// Full Canny: Sobel gradients, non-maximum suppression along the gradient
/// direction, then hysteresis between the median-derived thresholds.
inline BinaryImage canny_auto(const RasterImage& img) {
    if (img.channels != 1) throw std::invalid_argument("canny_auto: image must be single-channel");
    const int w = img.width, h = img.height;
    const auto thr = canny_auto_thresholds(img);
    const auto g = detail::sobel(img);

    auto mag_at = [&](int x, int y) -> double {
        if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;
        return g.mag[static_cast<std::size_t>(y) * w + x];
    };

    constexpr double tg22 = 0.41421356237309503;  // tan(22.5 deg)
    constexpr double tg67 = 2.41421356237309503;  // tan(67.5 deg)

    std::vector<std::uint8_t> candidate(img.pixel_count(), 0);
    std::vector<std::uint8_t> strong(img.pixel_count(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = g.mag[i];
            if (m <= thr.lower) continue;
            const double ax = std::abs(static_cast<double>(g.gx[i]));
            const double ay = std::abs(static_cast<double>(g.gy[i]));
            double m1, m2;
            if (ay <= tg22 * ax) {                       // near-horizontal gradient
                m1 = mag_at(x - 1, y);
                m2 = mag_at(x + 1, y);
            } else if (ay >= tg67 * ax) {                // near-vertical gradient
                m1 = mag_at(x, y - 1);
                m2 = mag_at(x, y + 1);
            } else if ((g.gx[i] > 0) == (g.gy[i] > 0)) { // main diagonal
                m1 = mag_at(x - 1, y - 1);
                m2 = mag_at(x + 1, y + 1);
            } else {                                     // anti-diagonal
                m1 = mag_at(x + 1, y - 1);
                m2 = mag_at(x - 1, y + 1);
            }
            if (m > m1 && m >= m2) {
                candidate[i] = 1;
                if (m >= thr.upper) strong[i] = 1;
            }
        }
    }

    // hysteresis: keep candidates reachable from a strong pixel
    BinaryImage out(w, h);
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (strong[static_cast<std::size_t>(y) * w + x]) {
                out.set(x, y, true);
                queue.emplace_back(x, y);
            }
    while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = cx + dx, ny = cy + dy;
                if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                if (candidate[ni] && !out.bits[ni]) {
                    out.bits[ni] = 1;
                    queue.emplace_back(nx, ny);
                }
            }
        }
    }
    return out;
}

/// Gradient magnitudes as used by canny_auto; exposed for the hysteresis
/// reachability checks.
inline std::vector<double> sobel_magnitude(const RasterImage& img) {
    return detail::sobel(img).mag;
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

struct Component {
    int id = 0;
    Box box;
    std::int64_t pixels = 0;
};

/// Components of true pixels under 8-connectivity, ids in row-major
/// discovery order, each with its tight bounding box.
inline std::vector<Component> connected_components(const BinaryImage& img) {
    const int w = img.width, h = img.height;
    std::vector<int> label(img.bits.size(), -1);
    std::vector<Component> comps;
    std::deque<std::pair<int, int>> queue;

    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * w + sx;
            if (!img.bits[si] || label[si] >= 0) continue;
            const int id = static_cast<int>(comps.size());
            int min_x = sx, max_x = sx, min_y = sy, max_y = sy;
            std::int64_t count = 0;
            label[si] = id;
            queue.emplace_back(sx, sy);
            while (!queue.empty()) {
                const auto [cx, cy] = queue.front();
                queue.pop_front();
                ++count;
                min_x = std::min(min_x, cx);
                max_x = std::max(max_x, cx);
                min_y = std::min(min_y, cy);
                max_y = std::max(max_y, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (img.bits[ni] && label[ni] < 0) {
                            label[ni] = id;
                            queue.emplace_back(nx, ny);
                        }
                    }
                }
            }
            comps.push_back({id, Box(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1), count});
        }
    }
    return comps;
}

// ---------------------------------------------------------------------------
// Geometry transforms on pixels
// ---------------------------------------------------------------------------

inline RasterImage crop(const RasterImage& img, const Box& b) {
    const Box c = clamp_box(b, img.width, img.height);
    RasterImage out(c.w, c.h, img.channels);
    for (int y = 0; y < c.h; ++y)
        for (int x = 0; x < c.w; ++x)
            for (int ch = 0; ch < img.channels; ++ch)
                out.at(x, y, ch) = img.at(c.x + x, c.y + y, ch);
    return out;
}

/// Bilinear resize. Identity when the target size equals the source size.
inline RasterImage resize_bilinear(const RasterImage& img, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw std::invalid_argument("resize_bilinear: target size must be >= 1");
    RasterImage out(new_w, new_h, img.channels);
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < new_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                const double bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround((1.0 - wy) * top + wy * bot));
            }
        }
    }
    return out;
}

/// 2x3 affine matrix mapping output pixel coordinates to source coordinates.
struct AffineMap {
    double m[6] = {1, 0, 0, 0, 1, 0};  // sx = m0*x + m1*y + m2; sy = m3*x + m4*y + m5

    static AffineMap identity() { return {}; }

    AffineMap then(const AffineMap& o) const {
        // apply *this first when mapping output -> source, i.e. o composed inside
        AffineMap r;
        r.m[0] = m[0] * o.m[0] + m[1] * o.m[3];
        r.m[1] = m[0] * o.m[1] + m[1] * o.m[4];
        r.m[2] = m[0] * o.m[2] + m[1] * o.m[5] + m[2];
        r.m[3] = m[3] * o.m[0] + m[4] * o.m[3];
        r.m[4] = m[3] * o.m[1] + m[4] * o.m[4];
        r.m[5] = m[3] * o.m[2] + m[4] * o.m[5] + m[5];
        return r;
    }
};

/// Inverse-mapped affine warp with bilinear sampling; pixels mapped outside
/// the source are filled with `fill`. Output has the input dimensions.
inline RasterImage warp_affine(const RasterImage& img, const AffineMap& out_to_src, std::uint8_t fill) {
    RasterImage out(img.width, img.height, img.channels, fill);
    const auto& m = out_to_src.m;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double sx = m[0] * x + m[1] * y + m[2];
            const double sy = m[3] * x + m[4] * y + m[5];
            if (sx < 0 || sy < 0 || sx > img.width - 1 || sy > img.height - 1) continue;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double wx = sx - x0, wy = sy - y0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                const double bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround((1.0 - wy) * top + wy * bot));
            }
        }
    }
    return out;
}

inline RasterImage flip_horizontal(const RasterImage& img) {
    RasterImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    return out;
}

inline RasterImage flip_vertical(const RasterImage& img) {
    RasterImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = img.at(x, img.height - 1 - y, c);
    return out;
}

}  // namespace glyphline
