#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "glyphline/imaging.hpp"
#include "glyphline/rng.hpp"

namespace gl = glyphline;

namespace {

gl::RasterImage random_gray(int w, int h, gl::Rng& rng) {
    gl::RasterImage img(w, h, 1);
    for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

/// Exhaustive Otsu oracle: per-pixel sums for every threshold, between-class
/// variance w0*w1*(mu0-mu1)^2, first (lowest) maximizing threshold wins.
int otsu_oracle(const gl::RasterImage& img) {
    int best_t = -1;
    double best_var = -1.0;
    for (int t = 0; t < 256; ++t) {
        std::int64_t n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (const auto p : img.data) {
            if (p <= t) { ++n0; s0 += p; }
            else { ++n1; s1 += p; }
        }
        if (n0 == 0 || n1 == 0) continue;
        const double m0 = static_cast<double>(s0) / static_cast<double>(n0);
        const double m1 = static_cast<double>(s1) / static_cast<double>(n1);
        const double var = static_cast<double>(n0) * static_cast<double>(n1) * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    if (best_t < 0) {
        for (const auto p : img.data) return p;  // constant image
    }
    return best_t;
}

/// Flood-fill oracle for 8-connected components of true pixels.
struct OracleComponent {
    gl::Box box{0, 0, 1, 1};
    std::int64_t pixels = 0;
};

std::vector<OracleComponent> components_oracle(const gl::BinaryImage& img) {
    const int w = img.width, h = img.height;
    std::vector<char> seen(img.bits.size(), 0);
    std::vector<OracleComponent> out;
    for (int sy = 0; sy < h; ++sy)
        for (int sx = 0; sx < w; ++sx) {
            if (!img.get(sx, sy) || seen[static_cast<std::size_t>(sy) * w + sx]) continue;
            OracleComponent comp;
            int min_x = sx, max_x = sx, min_y = sy, max_y = sy;
            std::vector<std::pair<int, int>> stack{{sx, sy}};
            seen[static_cast<std::size_t>(sy) * w + sx] = 1;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                ++comp.pixels;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        auto& mark = seen[static_cast<std::size_t>(ny) * w + nx];
                        if (img.get(nx, ny) && !mark) {
                            mark = 1;
                            stack.emplace_back(nx, ny);
                        }
                    }
            }
            comp.box = gl::Box(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
            out.push_back(comp);
        }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grayscale
// ---------------------------------------------------------------------------

TEST(ToGrayscale, UsesLumaWeights) {
    gl::RasterImage rgb(3, 1, 3);
    // pure red, green, blue pixels
    rgb.at(0, 0, 0) = 255;
    rgb.at(1, 0, 1) = 255;
    rgb.at(2, 0, 2) = 255;
    const gl::RasterImage gray = gl::to_grayscale(rgb);
    ASSERT_EQ(gray.channels, 1);
    EXPECT_EQ(gray.at(0, 0), 76);   // round(0.299 * 255)
    EXPECT_EQ(gray.at(1, 0), 150);  // round(0.587 * 255)
    EXPECT_EQ(gray.at(2, 0), 29);   // round(0.114 * 255)
}

TEST(ToGrayscale, WhiteStaysWhiteAndGrayPassesThrough) {
    gl::RasterImage rgb(1, 1, 3, 255);
    EXPECT_EQ(gl::to_grayscale(rgb).at(0, 0), 255);

    gl::Rng rng(7);
    const gl::RasterImage gray = random_gray(5, 4, rng);
    const gl::RasterImage again = gl::to_grayscale(gray);
    EXPECT_EQ(again.data, gray.data);
}

// ---------------------------------------------------------------------------
// Gaussian smoothing
// ---------------------------------------------------------------------------

TEST(GaussianSpec, SizeFromSigmaCoversThreeSigma) {
    EXPECT_EQ(gl::GaussianSpec::from_sigma(0.8).effective_size(), 7);   // 2*ceil(2.4)+1
    EXPECT_EQ(gl::GaussianSpec::from_sigma(1.0).effective_size(), 7);
    EXPECT_EQ(gl::GaussianSpec::from_sigma(3.0).effective_size(), 19);  // 2*9+1
}

TEST(GaussianSpec, SigmaFromKernelSize) {
    const auto spec = gl::GaussianSpec::from_kernel_size(7);
    EXPECT_DOUBLE_EQ(spec.sigma, 0.3 * ((7 - 1) * 0.5 - 1.0) + 0.8);  // 1.4
    EXPECT_EQ(spec.effective_size(), 7);
    EXPECT_THROW(gl::GaussianSpec::from_kernel_size(4), std::invalid_argument);
    EXPECT_THROW(gl::GaussianSpec::from_kernel_size(0), std::invalid_argument);
    EXPECT_THROW(gl::GaussianSpec::from_sigma(0.0), std::invalid_argument);
}

TEST(GaussianSpec, KernelIsNormalizedSymmetricPeaked) {
    for (const double sigma : {0.5, 0.8, 1.4, 3.5}) {
        const auto k = gl::GaussianSpec::from_sigma(sigma).kernel();
        ASSERT_EQ(static_cast<int>(k.size()) % 2, 1);
        double sum = 0.0;
        for (const double v : k) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12);
        const std::size_t r = k.size() / 2;
        for (std::size_t i = 0; i < r; ++i) {
            EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
            EXPECT_LT(k[i], k[i + 1]);  // strictly increasing toward the center
        }
    }
}

TEST(GaussianBlur, MatchesDirect2dConvolutionWithReflectBorders) {
    gl::Rng rng(11);
    const int w = 13, h = 9;
    const gl::RasterImage img = random_gray(w, h, rng);
    const auto spec = gl::GaussianSpec::from_sigma(1.3);
    const auto k = spec.kernel();
    const int r = static_cast<int>(k.size()) / 2;

    std::vector<double> plane(img.data.begin(), img.data.end());
    const auto fast = gl::gaussian_blur_plane(plane, w, h, spec);

    // direct (non-separable) 2-D convolution oracle
    auto mirror = [](int i, int n) {
        const int period = 2 * n - 2;
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    acc += k[dy + r] * k[dx + r] *
                           plane[static_cast<std::size_t>(mirror(y + dy, h)) * w + mirror(x + dx, w)];
            EXPECT_NEAR(fast[static_cast<std::size_t>(y) * w + x], acc, 1e-9)
                << "at (" << x << "," << y << ")";
        }
}

TEST(GaussianBlur, ConstantImageIsFixed) {
    gl::RasterImage img(16, 16, 1, 201);
    const gl::RasterImage out = gl::gaussian_blur(img, gl::GaussianSpec::from_sigma(2.0));
    for (const auto p : out.data) EXPECT_EQ(p, 201);
}

TEST(GaussianBlur, PreservesMeanOnDoublePlane) {
    gl::Rng rng(3);
    const int w = 17, h = 11;
    std::vector<double> plane(static_cast<std::size_t>(w) * h);
    for (auto& v : plane) v = rng.uniform(0.0, 255.0);
    const auto out = gl::gaussian_blur_plane(plane, w, h, gl::GaussianSpec::from_sigma(1.8));
    double in_sum = 0.0, out_sum = 0.0;
    for (const double v : plane) in_sum += v;
    for (const double v : out) out_sum += v;
    // reflect padding redistributes weight but keeps the total mass close
    EXPECT_NEAR(out_sum / in_sum, 1.0, 0.02);
}

TEST(GaussianBlur, ThreeChannelBlursEachChannel) {
    gl::RasterImage img(8, 8, 3, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(x, y, 1) = 200;  // green plane constant
    const gl::RasterImage out = gl::gaussian_blur(img, gl::GaussianSpec::from_sigma(1.0));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            EXPECT_EQ(out.at(x, y, 0), 0);
            EXPECT_EQ(out.at(x, y, 1), 200);
            EXPECT_EQ(out.at(x, y, 2), 0);
        }
}

TEST(MirrorIndex, ReflectsWithoutRepeatingEdge) {
    // n = 4: ... 2 1 | 0 1 2 3 | 2 1 0 ...
    EXPECT_EQ(gl::detail::mirror_index(-1, 4), 1);
    EXPECT_EQ(gl::detail::mirror_index(-2, 4), 2);
    EXPECT_EQ(gl::detail::mirror_index(0, 4), 0);
    EXPECT_EQ(gl::detail::mirror_index(3, 4), 3);
    EXPECT_EQ(gl::detail::mirror_index(4, 4), 2);
    EXPECT_EQ(gl::detail::mirror_index(5, 4), 1);
    EXPECT_EQ(gl::detail::mirror_index(0, 1), 0);
    EXPECT_EQ(gl::detail::mirror_index(-3, 1), 0);
}

// ---------------------------------------------------------------------------
// Otsu thresholding
// ---------------------------------------------------------------------------

TEST(Otsu, MatchesExhaustiveOracleOnRandomImages) {
    gl::Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const gl::RasterImage img = random_gray(32, 32, rng);
        const auto res = gl::otsu_threshold(img);
        EXPECT_EQ(res.threshold, otsu_oracle(img)) << "trial " << trial;
    }
}

TEST(Otsu, BimodalImageSplitsTheModes) {
    gl::RasterImage img(10, 10, 1, 40);
    for (int y = 0; y < 10; ++y)
        for (int x = 5; x < 10; ++x) img.at(x, y) = 210;
    const auto res = gl::otsu_threshold(img);
    EXPECT_GE(res.threshold, 40);
    EXPECT_LT(res.threshold, 210);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) EXPECT_EQ(res.mask.get(x, y), x >= 5);
}

TEST(Otsu, MaskMatchesThresholdRule) {
    gl::Rng rng(5);
    const gl::RasterImage img = random_gray(16, 16, rng);
    const auto res = gl::otsu_threshold(img);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            EXPECT_EQ(res.mask.get(x, y), img.at(x, y) > res.threshold);
}

TEST(Otsu, ConstantImageReturnsConstantAndEmptyMask) {
    gl::RasterImage img(8, 8, 1, 123);
    const auto res = gl::otsu_threshold(img);
    EXPECT_EQ(res.threshold, 123);
    EXPECT_EQ(res.mask.count_true(), 0u);
}

TEST(Otsu, RejectsMultiChannel) {
    gl::RasterImage rgb(4, 4, 3, 10);
    EXPECT_THROW(gl::otsu_threshold(rgb), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Mean threshold
// ---------------------------------------------------------------------------

TEST(MeanThreshold, ThresholdsAtRegionMean) {
    gl::RasterImage img(6, 1, 1);
    const std::uint8_t vals[6] = {10, 20, 30, 100, 200, 250};
    for (int x = 0; x < 6; ++x) img.at(x, 0) = vals[x];
    // region = first three pixels, mean 20
    const gl::BinaryImage mask = gl::mean_threshold(img, gl::Box(0, 0, 3, 1));
    const bool expect[6] = {false, false, true, true, true, true};
    for (int x = 0; x < 6; ++x) EXPECT_EQ(mask.get(x, 0), expect[x]) << "x=" << x;
}

TEST(MeanThreshold, RejectsOutOfBoundsRegionAndMultiChannel) {
    gl::RasterImage img(8, 8, 1, 50);
    EXPECT_THROW(gl::mean_threshold(img, gl::Box(4, 4, 8, 8)), std::invalid_argument);
    EXPECT_THROW(gl::mean_threshold(img, gl::Box(-1, 0, 4, 4)), std::invalid_argument);
    gl::RasterImage rgb(4, 4, 3, 50);
    EXPECT_THROW(gl::mean_threshold(rgb, gl::Box(0, 0, 2, 2)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Canny
// ---------------------------------------------------------------------------

TEST(Canny, AutoThresholdsFollowMedianRule) {
    gl::RasterImage img(4, 4, 1, 100);
    const auto thr = gl::canny_auto_thresholds(img);
    EXPECT_NEAR(thr.lower, 0.67 * 100, 1e-9);
    EXPECT_NEAR(thr.upper, 133.0, 1e-9);

    gl::RasterImage bright(4, 4, 1, 250);
    const auto thr2 = gl::canny_auto_thresholds(bright);
    EXPECT_NEAR(thr2.upper, 255.0, 1e-9);  // clamped

    gl::RasterImage dark(4, 4, 1, 0);
    const auto thr3 = gl::canny_auto_thresholds(dark);
    EXPECT_NEAR(thr3.lower, 0.0, 1e-9);
}

TEST(Canny, VerticalStepEdgeYieldsOneThinColumn) {
    // dark left half, bright right half. The gradient ridge spans the two
    // columns flanking the step with equal magnitude; the asymmetric NMS
    // tie-break (strictly greater than the left/up neighbor) keeps exactly
    // the left one, so the detected edge is one pixel thin.
    const int w = 24, h = 16;
    gl::RasterImage img(w, h, 1, 30);
    for (int y = 0; y < h; ++y)
        for (int x = w / 2; x < w; ++x) img.at(x, y) = 220;
    const gl::BinaryImage edges = gl::canny_auto(img);

    std::vector<int> column_hits(w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (edges.get(x, y)) ++column_hits[x];
    for (int x = 0; x < w; ++x) {
        if (x == w / 2 - 1)
            EXPECT_EQ(column_hits[x], h) << "edge column " << x;
        else
            EXPECT_EQ(column_hits[x], 0) << "non-edge column " << x;
    }
}

TEST(Canny, ConstantImageHasNoEdges) {
    gl::RasterImage img(16, 16, 1, 77);
    EXPECT_EQ(gl::canny_auto(img).count_true(), 0u);
}

TEST(Canny, EveryEdgePixelClearsTheLowerThreshold) {
    gl::Rng rng(23);
    const gl::RasterImage img = random_gray(32, 32, rng);
    const auto thr = gl::canny_auto_thresholds(img);
    const auto mag = gl::sobel_magnitude(img);
    const gl::BinaryImage edges = gl::canny_auto(img);
    bool any_strong = false;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (edges.get(x, y)) {
                const double m = mag[static_cast<std::size_t>(y) * img.width + x];
                EXPECT_GT(m, thr.lower);
                any_strong |= m >= thr.upper;
            }
    if (edges.count_true() > 0) EXPECT_TRUE(any_strong);
}

TEST(Canny, WeakEdgesRequireAStrongNeighborChain) {
    gl::Rng rng(29);
    const gl::RasterImage img = random_gray(24, 24, rng);
    const auto thr = gl::canny_auto_thresholds(img);
    const auto mag = gl::sobel_magnitude(img);
    const gl::BinaryImage edges = gl::canny_auto(img);

    // flood over the edge set: every edge component must contain >= 1 pixel
    // at or above the upper threshold (hysteresis reachability)
    for (const auto& comp : components_oracle(edges)) {
        bool has_strong = false;
        for (int y = comp.box.y; y < comp.box.bottom() && !has_strong; ++y)
            for (int x = comp.box.x; x < comp.box.right() && !has_strong; ++x)
                if (edges.get(x, y) &&
                    mag[static_cast<std::size_t>(y) * img.width + x] >= thr.upper)
                    has_strong = true;
        EXPECT_TRUE(has_strong);
    }
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

TEST(ConnectedComponents, MatchesFloodFillOracleOnRandomMasks) {
    gl::Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        gl::BinaryImage mask(16, 16);
        for (auto& b : mask.bits) b = rng.chance(0.4);
        const auto comps = gl::connected_components(mask);
        const auto oracle = components_oracle(mask);
        ASSERT_EQ(comps.size(), oracle.size()) << "trial " << trial;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            EXPECT_EQ(comps[i].box, oracle[i].box) << "trial " << trial << " comp " << i;
            EXPECT_EQ(comps[i].pixels, oracle[i].pixels) << "trial " << trial << " comp " << i;
        }
    }
}

TEST(ConnectedComponents, DiagonalTouchMerges) {
    gl::BinaryImage mask(4, 4);
    mask.set(0, 0, true);
    mask.set(1, 1, true);  // 8-connectivity joins diagonals
    mask.set(3, 3, true);  // separate
    const auto comps = gl::connected_components(mask);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[0].box, gl::Box(0, 0, 2, 2));
    EXPECT_EQ(comps[0].pixels, 2);
    EXPECT_EQ(comps[1].box, gl::Box(3, 3, 1, 1));
}

TEST(ConnectedComponents, EmptyAndFullMasks) {
    gl::BinaryImage empty(5, 5);
    EXPECT_TRUE(gl::connected_components(empty).empty());

    gl::BinaryImage full(5, 3, true);
    const auto comps = gl::connected_components(full);
    ASSERT_EQ(comps.size(), 1u);
    EXPECT_EQ(comps[0].box, gl::Box(0, 0, 5, 3));
    EXPECT_EQ(comps[0].pixels, 15);
}

TEST(ConnectedComponents, IdsFollowRowMajorDiscovery) {
    gl::BinaryImage mask(7, 3);
    mask.set(5, 0, true);  // first in row-major order
    mask.set(1, 1, true);
    mask.set(3, 2, true);
    const auto comps = gl::connected_components(mask);
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(comps[0].box.x, 5);
    EXPECT_EQ(comps[1].box.x, 1);
    EXPECT_EQ(comps[2].box.x, 3);
    for (std::size_t i = 0; i < comps.size(); ++i) EXPECT_EQ(comps[i].id, static_cast<int>(i));
}

// ---------------------------------------------------------------------------
// Crop / resize / flips / warp
// ---------------------------------------------------------------------------

TEST(Crop, ExtractsExactWindowAndClampsOverhang) {
    gl::RasterImage img(10, 10, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) img.at(x, y) = static_cast<std::uint8_t>(10 * y + x);
    const gl::RasterImage c = gl::crop(img, gl::Box(3, 4, 4, 2));
    ASSERT_EQ(c.width, 4);
    ASSERT_EQ(c.height, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(c.at(x, y), 10 * (y + 4) + (x + 3));

    const gl::RasterImage over = gl::crop(img, gl::Box(8, 8, 5, 5));
    EXPECT_EQ(over.width, 2);
    EXPECT_EQ(over.height, 2);
}

TEST(Resize, IdentityWhenSizeUnchangedAndConstantStaysConstant) {
    gl::Rng rng(41);
    const gl::RasterImage img = random_gray(9, 7, rng);
    const gl::RasterImage same = gl::resize_bilinear(img, 9, 7);
    EXPECT_EQ(same.data, img.data);

    gl::RasterImage flat(11, 5, 1, 90);
    const gl::RasterImage big = gl::resize_bilinear(flat, 23, 17);
    for (const auto p : big.data) EXPECT_EQ(p, 90);
}

TEST(Flips, AreInvolutionsAndMoveCorners) {
    gl::Rng rng(43);
    const gl::RasterImage img = random_gray(8, 5, rng);
    EXPECT_EQ(gl::flip_horizontal(gl::flip_horizontal(img)).data, img.data);
    EXPECT_EQ(gl::flip_vertical(gl::flip_vertical(img)).data, img.data);
    EXPECT_EQ(gl::flip_horizontal(img).at(0, 0), img.at(7, 0));
    EXPECT_EQ(gl::flip_vertical(img).at(0, 0), img.at(0, 4));
}

TEST(WarpAffine, IdentityReproducesInputAndTranslationShifts) {
    gl::Rng rng(47);
    const gl::RasterImage img = random_gray(12, 12, rng);
    const gl::RasterImage same = gl::warp_affine(img, gl::AffineMap::identity(), 0);
    EXPECT_EQ(same.data, img.data);

    gl::AffineMap shift;  // output(x,y) samples source(x-3, y): moves content right
    shift.m[2] = -3.0;
    const gl::RasterImage moved = gl::warp_affine(img, shift, 7);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 3; ++x) EXPECT_EQ(moved.at(x, y), 7);  // fill
        for (int x = 3; x < 12; ++x) EXPECT_EQ(moved.at(x, y), img.at(x - 3, y));
    }
}
