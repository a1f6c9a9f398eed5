#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "glyphline/box.hpp"
#include "glyphline/image.hpp"
#include "glyphline/imaging.hpp"
#include "glyphline/labels.hpp"
#include "glyphline/rng.hpp"

namespace glyphline {

// ---------------------------------------------------------------------------
// Drawing primitives (single-channel canvases)
// ---------------------------------------------------------------------------

namespace synth_detail {

inline void put(RasterImage& img, int x, int y, std::uint8_t v) {
    if (x >= 0 && x < img.width && y >= 0 && y < img.height) img.at(x, y) = v;
}

inline void fill_rect(RasterImage& img, const Box& b, std::uint8_t v) {
    for (int y = b.y; y < b.bottom(); ++y)
        for (int x = b.x; x < b.right(); ++x) put(img, x, y, v);
}

inline void draw_disc(RasterImage& img, double cx, double cy, double r, std::uint8_t v) {
    const int x0 = static_cast<int>(std::floor(cx - r)), x1 = static_cast<int>(std::ceil(cx + r));
    const int y0 = static_cast<int>(std::floor(cy - r)), y1 = static_cast<int>(std::ceil(cy + r));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(img, x, y, v);
}

inline void draw_line(RasterImage& img, double x0, double y0, double x1, double y1,
                      double thickness, std::uint8_t v) {
    const double dx = x1 - x0, dy = y1 - y0;
    const double len = std::hypot(dx, dy);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        draw_disc(img, x0 + t * dx, y0 + t * dy, thickness / 2.0, v);
    }
}

}  // namespace synth_detail

// ---------------------------------------------------------------------------
// Procedural glyph vocabulary
// ---------------------------------------------------------------------------

inline constexpr int kGlyphVocabularySize = 8;
inline constexpr int kJarGlyphId = 0;  // the canonical jar shape

/// Draws glyph `id` as connected thick strokes spanning the cell.
inline void draw_glyph(RasterImage& img, const Box& cell, int id, std::uint8_t ink,
                       double thickness = 5.0) {
    using synth_detail::draw_line;
    const double x = cell.x, y = cell.y;
    const double w = cell.w - 1, h = cell.h - 1;
    auto px = [&](double fx) { return x + fx * w; };
    auto py = [&](double fy) { return y + fy * h; };
    switch (id % kGlyphVocabularySize) {
        case 0:  // jar: U-shaped vessel with flaring handles
            draw_line(img, px(0.20), py(0.25), px(0.20), py(0.72), thickness, ink);
            draw_line(img, px(0.80), py(0.25), px(0.80), py(0.72), thickness, ink);
            draw_line(img, px(0.20), py(0.72), px(0.50), py(0.97), thickness, ink);
            draw_line(img, px(0.80), py(0.72), px(0.50), py(0.97), thickness, ink);
            draw_line(img, px(0.20), py(0.25), px(0.02), py(0.03), thickness, ink);
            draw_line(img, px(0.80), py(0.25), px(0.98), py(0.03), thickness, ink);
            break;
        case 1:  // ladder
            draw_line(img, px(0.10), py(0.02), px(0.10), py(0.98), thickness, ink);
            draw_line(img, px(0.90), py(0.02), px(0.90), py(0.98), thickness, ink);
            draw_line(img, px(0.10), py(0.10), px(0.90), py(0.10), thickness, ink);
            draw_line(img, px(0.10), py(0.50), px(0.90), py(0.50), thickness, ink);
            draw_line(img, px(0.10), py(0.90), px(0.90), py(0.90), thickness, ink);
            break;
        case 2:  // crossed diagonals with a waist bar
            draw_line(img, px(0.03), py(0.03), px(0.97), py(0.97), thickness, ink);
            draw_line(img, px(0.97), py(0.03), px(0.03), py(0.97), thickness, ink);
            draw_line(img, px(0.03), py(0.50), px(0.97), py(0.50), thickness, ink);
            break;
        case 3:  // zigzag
            draw_line(img, px(0.02), py(0.97), px(0.27), py(0.03), thickness, ink);
            draw_line(img, px(0.27), py(0.03), px(0.52), py(0.97), thickness, ink);
            draw_line(img, px(0.52), py(0.97), px(0.77), py(0.03), thickness, ink);
            draw_line(img, px(0.77), py(0.03), px(0.98), py(0.80), thickness, ink);
            break;
        case 4:  // comb
            draw_line(img, px(0.02), py(0.06), px(0.98), py(0.06), thickness, ink);
            draw_line(img, px(0.05), py(0.06), px(0.05), py(0.97), thickness, ink);
            draw_line(img, px(0.37), py(0.06), px(0.37), py(0.97), thickness, ink);
            draw_line(img, px(0.68), py(0.06), px(0.68), py(0.97), thickness, ink);
            draw_line(img, px(0.95), py(0.06), px(0.95), py(0.97), thickness, ink);
            break;
        case 5:  // diamond
            draw_line(img, px(0.50), py(0.02), px(0.97), py(0.50), thickness, ink);
            draw_line(img, px(0.97), py(0.50), px(0.50), py(0.98), thickness, ink);
            draw_line(img, px(0.50), py(0.98), px(0.03), py(0.50), thickness, ink);
            draw_line(img, px(0.03), py(0.50), px(0.50), py(0.02), thickness, ink);
            break;
        case 6:  // fish: diamond with a center spine
            draw_line(img, px(0.50), py(0.02), px(0.95), py(0.45), thickness, ink);
            draw_line(img, px(0.95), py(0.45), px(0.50), py(0.88), thickness, ink);
            draw_line(img, px(0.50), py(0.88), px(0.05), py(0.45), thickness, ink);
            draw_line(img, px(0.05), py(0.45), px(0.50), py(0.02), thickness, ink);
            draw_line(img, px(0.50), py(0.88), px(0.50), py(0.98), thickness, ink);
            draw_line(img, px(0.35), py(0.98), px(0.65), py(0.98), thickness, ink);
            break;
        default:  // gate: two posts, lintel, and waist bar
            draw_line(img, px(0.08), py(0.02), px(0.08), py(0.98), thickness, ink);
            draw_line(img, px(0.92), py(0.02), px(0.92), py(0.98), thickness, ink);
            draw_line(img, px(0.08), py(0.06), px(0.92), py(0.06), thickness, ink);
            draw_line(img, px(0.08), py(0.55), px(0.92), py(0.55), thickness, ink);
            break;
    }
}

/// Connected iconography figure (quadruped-like strokes) filling the cell.
inline void draw_icon(RasterImage& img, const Box& cell, Rng& rng, std::uint8_t ink) {
    using synth_detail::draw_line;
    const double x = cell.x, y = cell.y;
    const double w = cell.w - 1, h = cell.h - 1;
    auto px = [&](double fx) { return x + fx * w; };
    auto py = [&](double fy) { return y + fy * h; };
    const double t = 8.0;
    // body bar
    draw_line(img, px(0.10), py(0.45), px(0.80), py(0.45), t + 4, ink);
    // legs
    draw_line(img, px(0.18), py(0.45), px(0.18), py(0.95), t, ink);
    draw_line(img, px(0.40), py(0.45), px(0.40), py(0.95), t, ink);
    draw_line(img, px(0.62), py(0.45), px(0.62), py(0.95), t, ink);
    // neck and head
    draw_line(img, px(0.80), py(0.45), px(0.92), py(0.18), t, ink);
    synth_detail::draw_disc(img, px(0.90), py(0.14), 10.0, ink);
    // horn, angled per seal
    const double horn = rng.uniform(0.0, 0.12);
    draw_line(img, px(0.90), py(0.14), px(0.78 - horn), py(0.02), t * 0.6, ink);
    // tail
    draw_line(img, px(0.10), py(0.45), px(0.03), py(0.70), t * 0.7, ink);
}

// ---------------------------------------------------------------------------
// Seal generation
// ---------------------------------------------------------------------------

struct SyntheticSealSpec {
    int glyph_count = 5;
    bool vertical = false;     // glyph strip orientation
    bool icon_block = true;
    double noise_level = 0.0;  // 0 pristine .. 1 heavily worn
    int canvas_size = 512;
    std::uint64_t seed = 0;
};

struct SyntheticGroundTruth {
    Box seal_box;
    Box text_box;
    std::vector<Box> glyph_boxes;
    std::vector<int> glyph_ids;
    std::vector<GlyphLabel> glyph_labels;
    bool has_icon = false;
    Box icon_box{0, 0, 1, 1};
};

struct SyntheticSeal {
    RasterImage image;
    SyntheticGroundTruth truth;
};

namespace synth_detail {

// Plate/background contrast is deliberately small: the seal-extraction mask
// (blur sigma 3, threshold at the frame mean) then hugs the plate to within
// ~3 px instead of growing a wide bright halo. The glyph strip sits on a
// slightly recessed band whose contrast against the plate is large relative
// to the mottle, so graph segmentation yields the whole text row as one
// region (and hence one proposal box).
inline constexpr std::uint8_t kBackground = 187;
inline constexpr std::uint8_t kPlate = 189;
inline constexpr std::uint8_t kBand = 183;
inline constexpr std::uint8_t kInk = 45;
inline constexpr std::uint8_t kScratch = 166;
inline constexpr int kBandPad = 4;  // band margin around the glyph cells

/// Tight bounding box of ink-valued pixels inside a probe window.
inline Box ink_bbox(const RasterImage& img, const Box& probe, std::uint8_t ink) {
    int min_x = img.width, max_x = -1, min_y = img.height, max_y = -1;
    const Box c = clamp_box(probe, img.width, img.height);
    for (int y = c.y; y < c.bottom(); ++y)
        for (int x = c.x; x < c.right(); ++x)
            if (img.at(x, y) == ink) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    if (max_x < 0) throw std::logic_error("ink_bbox: no ink drawn in probe window");
    return Box(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
}

}  // namespace synth_detail

/// Renders a seal image plus exact ground truth. Deterministic in the spec.
///
/// Layout: a bright plate on a plain darker background, one strip of glyphs
/// (horizontal or vertical), and an optional iconography block. Noise —
/// plate mottle, scratches, speckle, and ink erosion — is confined to the
/// plate, as it models the artifact's wear.
inline SyntheticSeal generate_seal(const SyntheticSealSpec& spec) {
    if (spec.glyph_count < 1 || spec.glyph_count > 7)
        throw std::invalid_argument("generate_seal: glyph_count must be in [1,7]");
    if (spec.canvas_size < 320)
        throw std::invalid_argument("generate_seal: canvas must be at least 320 px");
    Rng rng(spec.seed);
    const int S = spec.canvas_size;
    RasterImage img(S, S, 1, synth_detail::kBackground);

    // plate: always below half the canvas area, so the background stays the
    // majority class for the edge detector's median-based auto thresholds.
    // The dimension along the glyph strip stretches when necessary so every
    // cell keeps its 40-px minimum without the band overhanging the plate.
    const int margin = S / 8;
    const int n = spec.glyph_count;
    if (n * 40 + (n - 1) * 15 + 60 > S - 2 * margin)
        throw std::invalid_argument("generate_seal: glyph strip cannot fit; enlarge the canvas");
    const int gap = rng.range(12, 15);
    const int inset = rng.range(22, 30);
    const int strip_axis_min = n * 40 + (n - 1) * gap + 2 * inset;
    auto strip_axis_len = [&](double lo, double hi) {
        return rng.range(std::max(static_cast<int>(S * lo), strip_axis_min),
                         std::max(static_cast<int>(S * hi), strip_axis_min));
    };
    auto cross_axis_len = [&](double lo, double hi, int other) {
        const int cap = static_cast<int>((static_cast<std::int64_t>(S) * S / 2 - 1) / other);
        return rng.range(static_cast<int>(S * lo), std::min(static_cast<int>(S * hi), cap));
    };
    int plate_w = 0, plate_h = 0;
    if (!spec.vertical) {
        plate_w = strip_axis_len(0.60, 0.72);
        plate_h = cross_axis_len(0.56, 0.66, plate_w);
    } else {
        plate_h = strip_axis_len(0.56, 0.66);
        plate_w = cross_axis_len(0.60, 0.72, plate_h);
    }
    const int plate_x = rng.range(margin, S - margin - plate_w);
    const int plate_y = rng.range(margin, S - margin - plate_h);
    const Box plate(plate_x, plate_y, plate_w, plate_h);
    synth_detail::fill_rect(img, plate, synth_detail::kPlate);

    SyntheticSeal seal;
    seal.truth.seal_box = plate;

    // glyph strip: uniform cells with wide gaps (so the segmentation blur
    // cannot bridge neighboring glyphs)
    std::vector<Box> cells;
    if (!spec.vertical) {
        const int cell_h = rng.range(72, 84);
        const int cell_w = std::clamp((plate.w - 2 * inset - (n - 1) * gap) / n, 40, 64);
        const int strip_w = n * cell_w + (n - 1) * gap;
        const int strip_x = plate.x + rng.range(inset, std::max(inset, plate.w - strip_w - inset));
        const int strip_y = plate.y + rng.range(20, 32);
        for (int i = 0; i < n; ++i)
            cells.emplace_back(strip_x + i * (cell_w + gap), strip_y, cell_w, cell_h);
    } else {
        const int cell_w = rng.range(72, 84);
        const int cell_h = std::clamp((plate.h - 2 * inset - (n - 1) * gap) / n, 40, 64);
        const int strip_h = n * cell_h + (n - 1) * gap;
        const int strip_x = plate.x + rng.range(20, 32);
        const int strip_y = plate.y + rng.range(inset, std::max(inset, plate.h - strip_h - inset));
        for (int i = 0; i < n; ++i)
            cells.emplace_back(strip_x, strip_y + i * (cell_h + gap), cell_w, cell_h);
    }

    // recessed band under the whole strip, then the glyphs on top of it
    Box cells_union = cells.front();
    for (const auto& c : cells) cells_union = union_box(cells_union, c);
    const Box band(cells_union.x - synth_detail::kBandPad, cells_union.y - synth_detail::kBandPad,
                   cells_union.w + 2 * synth_detail::kBandPad,
                   cells_union.h + 2 * synth_detail::kBandPad);
    synth_detail::fill_rect(img, band, synth_detail::kBand);

    for (const auto& cell : cells) {
        const int id = rng.range(0, kGlyphVocabularySize - 1);
        draw_glyph(img, cell, id, synth_detail::kInk);
        Box probe(cell.x - 3, cell.y - 3, cell.w + 6, cell.h + 6);
        seal.truth.glyph_boxes.push_back(synth_detail::ink_bbox(img, probe, synth_detail::kInk));
        seal.truth.glyph_ids.push_back(id);
        seal.truth.glyph_labels.push_back(id == kJarGlyphId ? GlyphLabel::Jar : GlyphLabel::NoJar);
    }
    // the text region is the carved band itself
    seal.truth.text_box = band;

    // iconography block, well separated from the strip
    if (spec.icon_block) {
        const int icon_side = rng.range(static_cast<int>(S * 0.25), static_cast<int>(S * 0.31));
        Box icon;
        if (!spec.vertical) {
            const int icon_y = band.bottom() + rng.range(38, 50);
            const int max_x = plate.right() - inset - icon_side;
            const int icon_x = rng.range(plate.x + inset, std::max(plate.x + inset, max_x));
            icon = Box(icon_x, icon_y, icon_side, icon_side);
        } else {
            const int icon_x = band.right() + rng.range(38, 50);
            const int max_y = plate.bottom() - inset - icon_side;
            const int icon_y = rng.range(plate.y + inset, std::max(plate.y + inset, max_y));
            icon = Box(icon_x, icon_y, icon_side, icon_side);
        }
        icon = clamp_box(Box(icon.x, icon.y,
                             std::min(icon.w, plate.right() - inset - icon.x),
                             std::min(icon.h, plate.bottom() - inset - icon.y)),
                         img.width, img.height);
        draw_icon(img, icon, rng, synth_detail::kInk);
        seal.truth.has_icon = true;
        seal.truth.icon_box = icon;
    }

    // wear model, confined to the plate and absent at noise level 0. The
    // mottle field is low-frequency (white noise smoothed, then renormalized)
    // with a small uniform dither that keeps its quantized contours from
    // forming clean level-set curves, so the plate stays a single region
    // under graph segmentation instead of splitting along brightness bands.
    const double L = spec.noise_level;
    if (L > 0.0) {
        const double mottle = 3.0 * L;
        std::vector<double> field(static_cast<std::size_t>(S) * S);
        for (auto& f : field) f = rng.normal();
        field = detail::blur_plane(field, S, S, GaussianSpec::from_sigma(8.0).kernel());
        double sum = 0.0, sq = 0.0;
        std::size_t cnt = 0;
        for (int y = plate.y; y < plate.bottom(); ++y)
            for (int x = plate.x; x < plate.right(); ++x) {
                const double f = field[static_cast<std::size_t>(y) * S + x];
                sum += f;
                sq += f * f;
                ++cnt;
            }
        const double mean = sum / static_cast<double>(cnt);
        const double sd = std::sqrt(std::max(1e-12, sq / static_cast<double>(cnt) - mean * mean));
        for (int y = plate.y; y < plate.bottom(); ++y)
            for (int x = plate.x; x < plate.right(); ++x) {
                const double f = (field[static_cast<std::size_t>(y) * S + x] - mean) / sd;
                const double v = img.at(x, y) + f * mottle + rng.uniform(-0.6, 0.6);
                img.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }

        // scratches are short (span < one glyph cell) so a scratch's bounding
        // box can never swallow a glyph box during containment removal, and
        // they keep clear of the band so gap-bridging grouping cannot absorb
        // them into the text-row proposal
        const Box keep_out(band.x - 14, band.y - 14, band.w + 28, band.h + 28);
        const int scratches = static_cast<int>(std::lround(5.0 * L));
        for (int s = 0; s < scratches; ++s) {
            for (int attempt = 0; attempt < 40; ++attempt) {
                const double cx = rng.range(plate.x + 8, plate.right() - 9);
                const double cy = rng.range(plate.y + 8, plate.bottom() - 9);
                const double half = rng.range(15, 32);
                const double ang = rng.uniform(0.0, 3.14159265358979323846);
                const double ex = half * std::cos(ang), ey = half * std::sin(ang);
                const int bx0 = static_cast<int>(std::floor(cx - std::abs(ex) - 2));
                const int by0 = static_cast<int>(std::floor(cy - std::abs(ey) - 2));
                const int bx1 = static_cast<int>(std::ceil(cx + std::abs(ex) + 2));
                const int by1 = static_cast<int>(std::ceil(cy + std::abs(ey) + 2));
                const Box sweep(bx0, by0, bx1 - bx0, by1 - by0);
                if (intersect_box(sweep, keep_out)) continue;
                synth_detail::draw_line(img, cx - ex, cy - ey, cx + ex, cy + ey, 2.0,
                                        synth_detail::kScratch);
                break;
            }
        }
        for (int y = plate.y; y < plate.bottom(); ++y)
            for (int x = plate.x; x < plate.right(); ++x) {
                if (rng.chance(0.002 * L)) img.at(x, y) = synth_detail::kScratch - 6;
                // erosion: ink flakes back to plate color
                if (img.at(x, y) < 100 && rng.chance(0.03 * L)) img.at(x, y) = synth_detail::kPlate;
            }
    }

    seal.image = std::move(img);
    return seal;
}

// ---------------------------------------------------------------------------
// Training-corpus builders
// ---------------------------------------------------------------------------

struct LabeledCrop {
    RasterImage image;
    int label = 0;  // class index for the role being trained
};

/// Single-glyph crops on plate-textured patches: label 0 = jar, 1 = any other
/// vocabulary glyph. Sizes, wear, and shape draw from the seeded generator.
inline std::vector<LabeledCrop> make_glyph_crops(int jar_count, int nojar_count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledCrop> out;
    out.reserve(static_cast<std::size_t>(jar_count + nojar_count));
    const int total = jar_count + nojar_count;
    for (int i = 0; i < total; ++i) {
        const bool jar = i < jar_count;
        const int cw = rng.range(44, 64), ch = rng.range(62, 88);
        const int mx = rng.range(4, 9), my = rng.range(4, 9);
        RasterImage patch(cw + 2 * mx, ch + 2 * my, 1, synth_detail::kPlate);
        const double wear = rng.uniform(0.0, 0.5);
        for (auto& p : patch.data) {
            const double v = p + rng.normal() * (1.0 + 2.5 * wear);
            p = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
        const int id = jar ? kJarGlyphId : rng.range(1, kGlyphVocabularySize - 1);
        draw_glyph(patch, Box(mx, my, cw, ch), id, synth_detail::kInk);
        for (auto& p : patch.data)
            if (p < 100 && rng.chance(0.03 * wear)) p = synth_detail::kPlate;
        out.push_back({std::move(patch), jar ? 0 : 1});
    }
    return out;
}

/// Region-classification crops harvested from generated seals:
/// 0 = Text (glyph cells and short runs), 1 = NoText (plain plate, icon,
/// background, plate edges), 2 = Both (strip plus icon together).
inline std::vector<LabeledCrop> make_region_crops(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledCrop> out;
    out.reserve(static_cast<std::size_t>(per_class) * 3);
    int count[3] = {0, 0, 0};
    std::uint64_t seal_tag = 0;
    while (count[0] < per_class || count[1] < per_class || count[2] < per_class) {
        SyntheticSealSpec spec;
        spec.glyph_count = rng.range(3, 6);
        spec.vertical = rng.chance(0.25);
        spec.noise_level = rng.chance(0.5) ? 0.0 : rng.uniform(0.2, 0.6);
        spec.seed = rng.fork(seal_tag++).next_u64();
        const SyntheticSeal seal = generate_seal(spec);
        const auto& t = seal.truth;
        auto jittered = [&](const Box& b, int j) {
            Box r(b.x + rng.range(-j, j), b.y + rng.range(-j, j),
                  std::max(8, b.w + rng.range(-j, j)), std::max(8, b.h + rng.range(-j, j)));
            return clamp_box(r, seal.image.width, seal.image.height);
        };
        // Text: the band as the pipeline will propose it, plus glyph runs
        if (count[0] < per_class) {
            out.push_back({crop(seal.image, jittered(t.text_box, 4)), 0});
            ++count[0];
            if (count[0] < per_class) {
                const int gi = rng.range(0, static_cast<int>(t.glyph_boxes.size()) - 1);
                out.push_back({crop(seal.image, jittered(t.glyph_boxes[gi], 3)), 0});
                ++count[0];
            }
            if (count[0] < per_class && t.glyph_boxes.size() >= 2) {
                const int a = rng.range(0, static_cast<int>(t.glyph_boxes.size()) - 2);
                out.push_back({crop(seal.image, jittered(union_box(t.glyph_boxes[static_cast<std::size_t>(a)],
                                                                   t.glyph_boxes[static_cast<std::size_t>(a) + 1]), 4)), 0});
                ++count[0];
            }
        }
        // NoText: plain plate patch (rejection-sampled away from band and
        // icon), the icon block itself, and a background corner
        if (count[1] < per_class) {
            const Box plate = t.seal_box;
            for (int attempt = 0; attempt < 50; ++attempt) {
                const int side = rng.range(40, 80);
                const Box cand(rng.range(plate.x + 4, std::max(plate.x + 4, plate.right() - side - 4)),
                               rng.range(plate.y + 4, std::max(plate.y + 4, plate.bottom() - side - 4)),
                               side, side);
                const Box pad_text(t.text_box.x - 6, t.text_box.y - 6, t.text_box.w + 12, t.text_box.h + 12);
                const bool hits_text = intersect_box(cand, pad_text).has_value();
                const bool hits_icon =
                    t.has_icon && intersect_box(cand, Box(t.icon_box.x - 6, t.icon_box.y - 6,
                                                          t.icon_box.w + 12, t.icon_box.h + 12))
                                      .has_value();
                if (!hits_text && !hits_icon && cand.right() <= plate.right() &&
                    cand.bottom() <= plate.bottom()) {
                    out.push_back({crop(seal.image, clamp_box(cand, seal.image.width, seal.image.height)), 1});
                    ++count[1];
                    break;
                }
            }
            if (count[1] < per_class && t.has_icon) {
                out.push_back({crop(seal.image, jittered(t.icon_box, 5)), 1});
                ++count[1];
            }
            // fragments of the icon read as glyph-like shapes on plate and are
            // the crops region proposals most often cover; teach them explicitly
            if (count[1] < per_class && t.has_icon) {
                const Box& ib = t.icon_box;
                const int fw = std::max(12, static_cast<int>(ib.w * rng.uniform(0.25, 0.7)));
                const int fh = std::max(12, static_cast<int>(ib.h * rng.uniform(0.25, 0.7)));
                const Box frag(ib.x + rng.range(0, std::max(0, ib.w - fw)),
                               ib.y + rng.range(0, std::max(0, ib.h - fh)), fw, fh);
                out.push_back(
                    {crop(seal.image, clamp_box(frag, seal.image.width, seal.image.height)), 1});
                ++count[1];
            }
            if (count[1] < per_class) {
                out.push_back({crop(seal.image, Box(2, 2, rng.range(40, 70), rng.range(40, 70))), 1});
                ++count[1];
            }
        }
        // Both: strip plus icon together, and the whole plate
        if (count[2] < per_class) {
            if (t.has_icon) {
                out.push_back({crop(seal.image,
                                    jittered(clamp_box(union_box(t.text_box, t.icon_box),
                                                       seal.image.width, seal.image.height), 6)), 2});
                ++count[2];
            }
            if (count[2] < per_class) {
                out.push_back({crop(seal.image, jittered(t.seal_box, 4)), 2});
                ++count[2];
            }
        }
    }
    return out;
}

}  // namespace glyphline
