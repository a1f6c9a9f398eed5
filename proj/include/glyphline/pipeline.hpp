#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "glyphline/box.hpp"
#include "glyphline/classifiers.hpp"
#include "glyphline/geometry.hpp"
#include "glyphline/image.hpp"
#include "glyphline/imaging.hpp"
#include "glyphline/labels.hpp"
#include "glyphline/log.hpp"
#include "glyphline/selective_search.hpp"

namespace glyphline {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ScaleMode { Square512, Square256, None };

inline std::string to_string(ScaleMode m) {
    switch (m) {
        case ScaleMode::Square512: return "512";
        case ScaleMode::Square256: return "256";
        default: return "none";
    }
}

inline ScaleMode scale_mode_from_string(const std::string& s) {
    if (s == "512") return ScaleMode::Square512;
    if (s == "256") return ScaleMode::Square256;
    if (s == "none") return ScaleMode::None;
    throw std::invalid_argument("unknown scale mode: " + s);
}

enum class ReadingOrder { LeftToRight, RightToLeft, Auto };

inline std::string to_string(ReadingOrder r) {
    switch (r) {
        case ReadingOrder::LeftToRight: return "lr";
        case ReadingOrder::RightToLeft: return "rl";
        default: return "auto";
    }
}

inline ReadingOrder reading_order_from_string(const std::string& s) {
    if (s == "lr") return ReadingOrder::LeftToRight;
    if (s == "rl") return ReadingOrder::RightToLeft;
    if (s == "auto") return ReadingOrder::Auto;
    throw std::invalid_argument("unknown reading order: " + s);
}

struct StageConfig {
    double seal_blur_sigma = 3.0;
    int seal_second_blur_kernel = 7;
    double segmentation_blur_sigma = 3.5;
    GroupingParams grouping{};
    TextBoxParams textbox{};
    double segmentation_superbox_overlap = 0.15;
    ScaleMode scale_mode = ScaleMode::Square512;
    // Proposals covering at least this fraction of the searched frame are
    // discarded before grouping. The box hierarchy always terminates in the
    // whole-frame box; kept, it would contain (and thus erase) every other
    // proposal during containment removal.
    double max_proposal_area_frac = 0.75;
    ReadingOrder reading_order = ReadingOrder::LeftToRight;

    void validate() const {
        if (seal_blur_sigma <= 0.0 || segmentation_blur_sigma <= 0.0)
            throw std::invalid_argument("StageConfig: blur sigmas must be positive");
        if (seal_second_blur_kernel < 1 || seal_second_blur_kernel % 2 == 0)
            throw std::invalid_argument("StageConfig: second blur kernel must be odd and positive");
        if (segmentation_superbox_overlap <= 0.0 || segmentation_superbox_overlap > 1.0)
            throw std::invalid_argument("StageConfig: segmentation overlap must be in (0,1]");
        if (max_proposal_area_frac <= 0.0 || max_proposal_area_frac > 1.0)
            throw std::invalid_argument("StageConfig: max proposal area fraction must be in (0,1]");
    }
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct PipelineReport {
    std::string input_id;
    int image_width = 0;
    int image_height = 0;
    Box seal_box{0, 0, 1, 1};
    std::vector<Box> proposals;                             // absolute coordinates
    std::vector<LabeledRegion> labeled_regions;             // absolute coordinates
    std::vector<Box> text_boxes;                            // absolute coordinates
    std::vector<Box> glyph_boxes;                           // absolute, reading order
    std::vector<std::pair<GlyphLabel, double>> glyph_labels;// parallel to glyph_boxes
    std::vector<std::string> errors;
    std::map<std::string, double> timings_ms;
};

inline nlohmann::json box_to_json(const Box& b) {
    return nlohmann::json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
}

inline Box box_from_json(const nlohmann::json& j) {
    return Box(j.at("x").get<int>(), j.at("y").get<int>(),
               j.at("w").get<int>(), j.at("h").get<int>());
}

/// Canonical JSON form. Timings are opt-in so that the canonical report is
/// byte-identical between reruns of the same input and seed.
inline nlohmann::json report_to_json(const PipelineReport& r, bool include_timings = false) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["input_id"] = r.input_id;
    j["image"] = {{"width", r.image_width}, {"height", r.image_height}};
    j["seal_box"] = box_to_json(r.seal_box);
    j["proposals"] = nlohmann::json::array();
    for (const auto& b : r.proposals) j["proposals"].push_back(box_to_json(b));
    j["labeled_regions"] = nlohmann::json::array();
    for (const auto& lr : r.labeled_regions) {
        nlohmann::json e = box_to_json(lr.box);
        e["label"] = to_string(lr.label);
        e["confidence"] = lr.confidence;
        j["labeled_regions"].push_back(e);
    }
    j["text_boxes"] = nlohmann::json::array();
    for (const auto& b : r.text_boxes) j["text_boxes"].push_back(box_to_json(b));
    j["glyph_boxes"] = nlohmann::json::array();
    for (const auto& b : r.glyph_boxes) j["glyph_boxes"].push_back(box_to_json(b));
    j["glyph_labels"] = nlohmann::json::array();
    for (const auto& [label, conf] : r.glyph_labels)
        j["glyph_labels"].push_back({{"label", to_string(label)}, {"confidence", conf}});
    j["errors"] = r.errors;
    if (include_timings) j["timings_ms"] = r.timings_ms;
    return j;
}

// ---------------------------------------------------------------------------
// Stage 1: seal extraction
// ---------------------------------------------------------------------------

/// Isolates the seal from its background. Blur, threshold against the mean of
/// the outer 5% frame (taken as background), blur the mask again, then take
/// the bounding box of the detected contour pixels. Falls back to the whole
/// image when no contour is found.
inline std::pair<Box, RasterImage> extract_seal(const RasterImage& img,
                                                const StageConfig& cfg = {}) {
    const Box whole(0, 0, img.width, img.height);
    const RasterImage gray = to_grayscale(img);
    const RasterImage blurred = gaussian_blur(gray, GaussianSpec::from_sigma(cfg.seal_blur_sigma));

    const int fx = std::max(1, img.width / 20);
    const int fy = std::max(1, img.height / 20);
    double sum = 0.0;
    std::int64_t count = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (x < fx || x >= img.width - fx || y < fy || y >= img.height - fy) {
                sum += blurred.at(x, y);
                ++count;
            }
    if (count == 0) return {whole, img};
    const double frame_mean = sum / static_cast<double>(count);

    RasterImage mask(img.width, img.height, 1, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (blurred.at(x, y) > frame_mean) mask.at(x, y) = 255;

    const RasterImage smooth_mask =
        gaussian_blur(mask, GaussianSpec::from_kernel_size(cfg.seal_second_blur_kernel));
    const BinaryImage edges = canny_auto(smooth_mask);

    int min_x = img.width, max_x = -1, min_y = img.height, max_y = -1;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (edges.get(x, y)) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    if (max_x < 0) return {whole, img};
    const Box seal(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
    return {seal, crop(img, seal)};
}

// ---------------------------------------------------------------------------
// Stage 2: region proposal
// ---------------------------------------------------------------------------

/// Selective search over the standard parameter grid followed by the grouping
/// cascade. Boxes come back in the coordinates of `seal` (the unscaled input).
inline std::vector<Box> propose_regions(const RasterImage& seal, const StageConfig& cfg = {}) {
    cfg.validate();
    RasterImage search = seal;
    if (cfg.scale_mode != ScaleMode::None) {
        const int side = cfg.scale_mode == ScaleMode::Square512 ? 512 : 256;
        search = resize_bilinear(seal, side, side);
    }

    std::vector<Box> boxes = selective_search(search, default_search_grid());
    const double frame_area = static_cast<double>(search.width) * search.height;
    std::erase_if(boxes, [&](const Box& b) {
        return static_cast<double>(b.area()) >= cfg.max_proposal_area_frac * frame_area;
    });

    boxes = merge_concentric(std::move(boxes), cfg.grouping);
    boxes = remove_contained(std::move(boxes));
    boxes = draw_super_box(std::move(boxes), cfg.grouping.superbox_overlap_frac);
    boxes = draw_extended_super_box(std::move(boxes), cfg.grouping.extension_offset_frac);

    if (cfg.scale_mode != ScaleMode::None) {
        const double sx = static_cast<double>(seal.width) / search.width;
        const double sy = static_cast<double>(seal.height) / search.height;
        std::vector<Box> mapped;
        mapped.reserve(boxes.size());
        for (const auto& b : boxes) {
            int x0 = static_cast<int>(std::lround(b.x * sx));
            int y0 = static_cast<int>(std::lround(b.y * sy));
            int x1 = static_cast<int>(std::lround(b.right() * sx));
            int y1 = static_cast<int>(std::lround(b.bottom() * sy));
            x0 = std::clamp(x0, 0, seal.width - 1);
            y0 = std::clamp(y0, 0, seal.height - 1);
            x1 = std::clamp(x1, x0 + 1, seal.width);
            y1 = std::clamp(y1, y0 + 1, seal.height);
            mapped.emplace_back(x0, y0, x1 - x0, y1 - y0);
        }
        boxes = std::move(mapped);
        sort_boxes(boxes);
        boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
    }
    return boxes;
}

// ---------------------------------------------------------------------------
// Stage 3: text region extraction
// ---------------------------------------------------------------------------

struct TextExtraction {
    std::vector<LabeledRegion> classified;  // one entry per input proposal
    std::vector<Box> text_boxes;            // merged + trimmed Text regions
};

inline TextExtraction extract_text_regions(const RasterImage& seal,
                                           const std::vector<Box>& proposals,
                                           const ClassifierHandle& region_handle,
                                           const StageConfig& cfg = {}) {
    TextExtraction out;
    out.classified.reserve(proposals.size());
    for (const auto& b : proposals) {
        const Box safe = clamp_box(b, seal.width, seal.height);
        const auto [label, conf] = classify_region(region_handle, crop(seal, safe));
        out.classified.push_back({safe, label, conf});
    }
    std::vector<LabeledRegion> merged = draw_text_box(out.classified, cfg.textbox);
    merged = trim_text_box(std::move(merged), cfg.textbox);
    for (const auto& lr : merged)
        if (lr.label == RegionLabel::Text) out.text_boxes.push_back(lr.box);
    // chaining skips dimension-dissimilar pairs, so a short run of the same
    // band can survive alongside the full-band box; collapse such restatements
    out.text_boxes = merge_redundant(std::move(out.text_boxes),
                                     cfg.textbox.redundant_overlap_frac);
    sort_boxes(out.text_boxes);
    return out;
}

// ---------------------------------------------------------------------------
// Stage 4: symbol segmentation
// ---------------------------------------------------------------------------

namespace detail {

/// Orders symbol boxes for reading. Wide regions read along x, tall regions
/// along y; right-to-left flips the x direction only.
inline void order_for_reading(std::vector<Box>& boxes, int region_w, int region_h,
                              ReadingOrder order) {
    const bool horizontal = region_w >= region_h;
    if (horizontal) {
        std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
            return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
        });
        if (order == ReadingOrder::RightToLeft) std::reverse(boxes.begin(), boxes.end());
    } else {
        std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) {
            return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
        });
    }
}

}  // namespace detail

/// Splits a text region into per-symbol boxes: binarize, smooth the mask,
/// re-binarize around the mask mean, then group connected components with the
/// relaxed 15% super-box overlap and gap-free chaining.
inline std::vector<Box> segment_symbols(const RasterImage& text_region,
                                        const StageConfig& cfg = {}) {
    if (text_region.width < 1 || text_region.height < 1) return {};
    const RasterImage gray = to_grayscale(text_region);
    BinaryImage bin = otsu_threshold(gray).mask;

    // symbols are strokes, i.e. the minority class; flip if they came out as
    // the background side of the threshold
    const int total = text_region.width * text_region.height;
    if (bin.count_true() * 2 > static_cast<std::size_t>(total))
        for (auto&& bit : bin.bits) bit = !bit;

    std::vector<double> plane(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) plane[i] = bin.bits[static_cast<std::size_t>(i)] ? 255.0 : 0.0;
    plane = gaussian_blur_plane(plane, text_region.width, text_region.height,
                                GaussianSpec::from_sigma(cfg.segmentation_blur_sigma));
    double mean = 0.0;
    for (const double v : plane) mean += v;
    mean /= static_cast<double>(total);
    BinaryImage smooth(text_region.width, text_region.height);
    for (int i = 0; i < total; ++i) smooth.bits[static_cast<std::size_t>(i)] = plane[static_cast<std::size_t>(i)] - mean > 0.0;

    std::vector<Box> boxes;
    for (const auto& comp : connected_components(smooth)) boxes.push_back(comp.box);
    boxes = remove_contained(std::move(boxes));
    boxes = draw_super_box(std::move(boxes), cfg.segmentation_superbox_overlap);
    boxes = draw_extended_super_box(std::move(boxes), 0.0);
    detail::order_for_reading(boxes, text_region.width, text_region.height, cfg.reading_order);
    return boxes;
}

// ---------------------------------------------------------------------------
// Stage 5 + orchestration
// ---------------------------------------------------------------------------

inline Box offset_box(const Box& b, int dx, int dy) { return Box(b.x + dx, b.y + dy, b.w, b.h); }

/// How far through the pipeline to run (for per-stage CLI execution).
enum class StageGate { Seal, Proposals, Text, Symbols, Full };

inline StageGate stage_gate_from_string(const std::string& s) {
    if (s == "seal") return StageGate::Seal;
    if (s == "proposals") return StageGate::Proposals;
    if (s == "text") return StageGate::Text;
    if (s == "symbols") return StageGate::Symbols;
    if (s == "full") return StageGate::Full;
    throw std::invalid_argument("unknown stage name: " + s +
                                " (expected seal|proposals|text|symbols|full)");
}

/// Runs the full flow: seal extraction, region proposal, region
/// classification and text-box formation, symbol segmentation, and symbol
/// classification. Every stage is fenced: a failure is recorded in
/// `report.errors` and later stages continue with whatever is available.
inline PipelineReport run_pipeline(const RasterImage& img, const ClassifierHandle& region_handle,
                                   const ClassifierHandle& glyph_handle,
                                   const StageConfig& cfg = {}, const std::string& input_id = "",
                                   StageGate gate = StageGate::Full) {
    cfg.validate();
    PipelineReport report;
    report.input_id = input_id;
    report.image_width = img.width;
    report.image_height = img.height;
    report.seal_box = Box(0, 0, img.width, img.height);

    using Clock = std::chrono::steady_clock;
    auto timed = [&](const char* name, auto&& fn) {
        const auto t0 = Clock::now();
        bool ok = true;
        try {
            fn();
        } catch (const std::exception& e) {
            ok = false;
            report.errors.push_back(std::string(name) + ": " + e.what());
            log_warn(std::string("pipeline stage failed — ") + name + ": " + e.what());
        }
        const auto t1 = Clock::now();
        report.timings_ms[name] =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count();
        return ok;
    };

    RasterImage seal_img = img;
    timed("extract_seal", [&] {
        auto [box, cropped] = extract_seal(img, cfg);
        report.seal_box = box;
        seal_img = std::move(cropped);
    });
    if (gate == StageGate::Seal) return report;

    std::vector<Box> proposals_local;
    timed("propose_regions", [&] { proposals_local = propose_regions(seal_img, cfg); });
    for (const auto& b : proposals_local)
        report.proposals.push_back(offset_box(b, report.seal_box.x, report.seal_box.y));
    if (gate == StageGate::Proposals) return report;

    std::vector<Box> text_local;
    timed("extract_text_regions", [&] {
        TextExtraction te = extract_text_regions(seal_img, proposals_local, region_handle, cfg);
        text_local = te.text_boxes;
        for (const auto& lr : te.classified)
            report.labeled_regions.push_back(
                {offset_box(lr.box, report.seal_box.x, report.seal_box.y), lr.label, lr.confidence});
    });
    for (const auto& b : text_local)
        report.text_boxes.push_back(offset_box(b, report.seal_box.x, report.seal_box.y));
    if (gate == StageGate::Text) return report;

    std::vector<Box> glyph_local;  // in seal-crop coordinates
    timed("segment_symbols", [&] {
        for (const auto& tb : text_local) {
            const Box safe = clamp_box(tb, seal_img.width, seal_img.height);
            std::vector<Box> symbols = segment_symbols(crop(seal_img, safe), cfg);
            for (const auto& sb : symbols) glyph_local.push_back(offset_box(sb, safe.x, safe.y));
        }
    });
    for (const auto& b : glyph_local)
        report.glyph_boxes.push_back(offset_box(b, report.seal_box.x, report.seal_box.y));
    if (gate == StageGate::Symbols) return report;

    timed("classify_glyphs", [&] {
        for (const auto& gb : glyph_local) {
            const Box safe = clamp_box(gb, seal_img.width, seal_img.height);
            report.glyph_labels.push_back(classify_glyph(glyph_handle, crop(seal_img, safe)));
        }
    });
    if (report.glyph_labels.size() != report.glyph_boxes.size()) {
        // classification aborted mid-way; pad so the report stays well-formed
        while (report.glyph_labels.size() < report.glyph_boxes.size())
            report.glyph_labels.emplace_back(GlyphLabel::NoJar, 0.0);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Debug overlay
// ---------------------------------------------------------------------------

namespace detail {

inline void draw_box_outline(RasterImage& rgb, const Box& b, int thickness,
                             std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
    const Box c = clamp_box(b, rgb.width, rgb.height);
    for (int t = 0; t < thickness; ++t) {
        for (int x = c.x; x < c.right(); ++x) {
            for (const int y : {c.y + t, c.bottom() - 1 - t}) {
                if (y < 0 || y >= rgb.height) continue;
                rgb.at(x, y, 0) = r;
                rgb.at(x, y, 1) = g;
                rgb.at(x, y, 2) = bl;
            }
        }
        for (int y = c.y; y < c.bottom(); ++y) {
            for (const int x : {c.x + t, c.right() - 1 - t}) {
                if (x < 0 || x >= rgb.width) continue;
                rgb.at(x, y, 0) = r;
                rgb.at(x, y, 1) = g;
                rgb.at(x, y, 2) = bl;
            }
        }
    }
}

}  // namespace detail

/// Renders the report onto the input image: proposals in gray, classified
/// regions colored by label (Text green, NoText red, Both amber), text boxes
/// blue, symbol boxes magenta, seal box white.
inline RasterImage render_overlay(const RasterImage& img, const PipelineReport& report) {
    const RasterImage gray = img.channels == 1 ? img : to_grayscale(img);
    RasterImage rgb(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t v = gray.at(x, y);
            rgb.at(x, y, 0) = rgb.at(x, y, 1) = rgb.at(x, y, 2) = v;
        }
    for (const auto& b : report.proposals) detail::draw_box_outline(rgb, b, 1, 150, 150, 150);
    for (const auto& lr : report.labeled_regions) {
        switch (lr.label) {
            case RegionLabel::Text: detail::draw_box_outline(rgb, lr.box, 1, 40, 200, 60); break;
            case RegionLabel::NoText: detail::draw_box_outline(rgb, lr.box, 1, 210, 60, 50); break;
            case RegionLabel::Both: detail::draw_box_outline(rgb, lr.box, 1, 230, 180, 40); break;
        }
    }
    detail::draw_box_outline(rgb, report.seal_box, 2, 255, 255, 255);
    for (const auto& b : report.text_boxes) detail::draw_box_outline(rgb, b, 2, 60, 90, 230);
    for (const auto& b : report.glyph_boxes) detail::draw_box_outline(rgb, b, 1, 200, 60, 200);
    return rgb;
}

}  // namespace glyphline
