#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include "glyphline/box.hpp"
#include "glyphline/labels.hpp"
#include "glyphline/log.hpp"

namespace glyphline {

/// Thresholds of the four-level region grouping hierarchy.
struct GroupingParams {
    double concentric_frac = 0.14;
    double containment_frac = 1.00;
    double superbox_overlap_frac = 0.40;
    double extension_offset_frac = 0.06;
};

/// Thresholds of text box merging and trimming.
struct TextBoxParams {
    double width_merge_frac = 0.25;
    double height_merge_frac = 0.20;
    double trim_major_frac = 0.70;
    double trim_minor_frac = 0.20;
    double redundant_overlap_frac = 0.65;  // of the smaller box's area
};

struct LabeledRegion {
    Box box;
    RegionLabel label = RegionLabel::NoText;
    double confidence = 0.0;

    friend bool operator==(const LabeledRegion& a, const LabeledRegion& b) {
        return a.box == b.box && a.label == b.label && a.confidence == b.confidence;
    }
};

inline std::optional<Box> intersect_box(const Box& a, const Box& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.right(), b.right());
    const int y1 = std::min(a.bottom(), b.bottom());
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return Box(x0, y0, x1 - x0, y1 - y0);
}

namespace detail {

/// Mean of the four side lengths of a pair; the reference length for the
/// concentric and axis-continuity thresholds.
inline double pair_mean_dim(const Box& a, const Box& b) {
    return (a.w + a.h + b.w + b.h) / 4.0;
}

inline bool concentric_match(const Box& a, const Box& b, double frac) {
    const double thr = frac * pair_mean_dim(a, b);
    return std::abs(a.center_x() - b.center_x()) <= thr &&
           std::abs(a.center_y() - b.center_y()) <= thr &&
           std::abs(a.w - b.w) <= thr &&
           std::abs(a.h - b.h) <= thr;
}

/// Axis continuity: the extents are disjoint (or touching) along one axis
/// with a gap within thr, while the perpendicular extents overlap. A gap
/// only exists between non-overlapping extents, so pairs that already
/// overlap along both axes are not continuous (they are super-box material).
inline bool axis_continuous(const Box& a, const Box& b, double frac) {
    const int gap_x = std::max(a.x, b.x) - std::min(a.right(), b.right());
    const int overlap_y = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (gap_x >= 0 && gap_x <= frac * (a.w + b.w) / 2.0 && overlap_y > 0) return true;
    const int gap_y = std::max(a.y, b.y) - std::min(a.bottom(), b.bottom());
    const int overlap_x = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    return gap_y >= 0 && gap_y <= frac * (a.h + b.h) / 2.0 && overlap_x > 0;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    bool join(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (a > b) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

}  // namespace detail

/// Replace clusters of mutually concentric boxes (centers and side lengths
/// within concentric_frac of the pair's mean dimension) with a single box of
/// mean dimensions at the mean center. Runs to fixpoint, so reapplying is the
/// identity.
inline std::vector<Box> merge_concentric(std::vector<Box> boxes, const GroupingParams& p) {
    if (boxes.size() < 2) return boxes;
    sort_boxes(boxes);
    bool changed = true;
    while (changed && boxes.size() > 1) {
        changed = false;
        detail::UnionFind uf(boxes.size());
        for (std::size_t i = 0; i < boxes.size(); ++i)
            for (std::size_t j = i + 1; j < boxes.size(); ++j)
                if (detail::concentric_match(boxes[i], boxes[j], p.concentric_frac))
                    changed |= uf.join(static_cast<int>(i), static_cast<int>(j));
        if (!changed) break;

        std::vector<std::vector<std::size_t>> clusters(boxes.size());
        for (std::size_t i = 0; i < boxes.size(); ++i)
            clusters[uf.find(static_cast<int>(i))].push_back(i);

        std::vector<Box> next;
        for (const auto& members : clusters) {
            if (members.empty()) continue;
            if (members.size() == 1) {
                next.push_back(boxes[members[0]]);
                continue;
            }
            double sw = 0, sh = 0, scx = 0, scy = 0;
            for (auto m : members) {
                sw += boxes[m].w;
                sh += boxes[m].h;
                scx += boxes[m].center_x();
                scy += boxes[m].center_y();
            }
            const double n = static_cast<double>(members.size());
            const int w = std::max(1, static_cast<int>(std::lround(sw / n)));
            const int h = std::max(1, static_cast<int>(std::lround(sh / n)));
            const int x = static_cast<int>(std::lround(scx / n - w / 2.0));
            const int y = static_cast<int>(std::lround(scy / n - h / 2.0));
            next.emplace_back(x, y, w, h);
        }
        boxes = std::move(next);
        sort_boxes(boxes);
    }
    return boxes;
}

/// Remove every box fully contained in another; exact duplicates keep one
/// survivor. Output is an antichain under containment.
inline std::vector<Box> remove_contained(std::vector<Box> boxes) {
    sort_boxes(boxes);
    boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
    std::vector<Box> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        bool inside = false;
        for (std::size_t j = 0; j < boxes.size() && !inside; ++j)
            inside = j != i && boxes[j].contains(boxes[i]);
        if (!inside) out.push_back(boxes[i]);
    }
    return out;
}

/// Merge every pair overlapping by at least overlap_frac of each box's own
/// area into their minimal bounding union; applied to fixpoint.
inline std::vector<Box> draw_super_box(std::vector<Box> boxes, double overlap_frac) {
    sort_boxes(boxes);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
                const auto ov = static_cast<double>(overlap_area(boxes[i], boxes[j]));
                if (ov >= overlap_frac * static_cast<double>(boxes[i].area()) &&
                    ov >= overlap_frac * static_cast<double>(boxes[j].area())) {
                    const Box u = union_box(boxes[i], boxes[j]);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                    boxes[i] = u;
                    sort_boxes(boxes);
                    merged = true;
                }
            }
        }
    }
    return boxes;
}

/// Merge every pair whose intersection covers at least overlap_frac of the
/// smaller box's area into their bounding union, to fixpoint: collapses boxes
/// that mostly restate a larger one without requiring strict containment.
inline std::vector<Box> merge_redundant(std::vector<Box> boxes, double overlap_frac) {
    sort_boxes(boxes);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
                const auto ov = static_cast<double>(overlap_area(boxes[i], boxes[j]));
                const auto smaller =
                    static_cast<double>(std::min(boxes[i].area(), boxes[j].area()));
                if (ov >= overlap_frac * smaller) {
                    const Box u = union_box(boxes[i], boxes[j]);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                    boxes[i] = u;
                    sort_boxes(boxes);
                    merged = true;
                }
            }
        }
    }
    return boxes;
}

/// Merge axis-continuous pairs (gap along one axis within offset_frac of the
/// boxes' mean size on that axis, perpendicular extents overlapping) into
/// their bounding union; applied to fixpoint. offset_frac 0 merges only
/// touching chains.
inline std::vector<Box> draw_extended_super_box(std::vector<Box> boxes, double offset_frac) {
    sort_boxes(boxes);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
                if (detail::axis_continuous(boxes[i], boxes[j], offset_frac)) {
                    const Box u = union_box(boxes[i], boxes[j]);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                    boxes[i] = u;
                    sort_boxes(boxes);
                    merged = true;
                }
            }
        }
    }
    return boxes;
}

namespace detail {

inline void sort_regions(std::vector<LabeledRegion>& regions) {
    std::sort(regions.begin(), regions.end(), [](const LabeledRegion& a, const LabeledRegion& b) {
        return std::tie(a.box.y, a.box.x, a.box.w, a.box.h, a.label, a.confidence) <
               std::tie(b.box.y, b.box.x, b.box.w, b.box.h, b.label, b.confidence);
    });
}

inline bool text_box_pair(const LabeledRegion& a, const LabeledRegion& b) {
    // (Text, Text) or (Text, Both); Both never chains with Both
    return (a.label == RegionLabel::Text && b.label != RegionLabel::NoText) ||
           (b.label == RegionLabel::Text && a.label != RegionLabel::NoText);
}

inline bool text_box_match(const LabeledRegion& a, const LabeledRegion& b, const TextBoxParams& p) {
    if (!text_box_pair(a, b)) return false;
    const double mean_h = (a.box.h + b.box.h) / 2.0;
    const double mean_w = (a.box.w + b.box.w) / 2.0;
    if (std::abs(a.box.h - b.box.h) > p.height_merge_frac * mean_h) return false;
    if (std::abs(a.box.w - b.box.w) > p.width_merge_frac * mean_w) return false;
    const int overlap_y = std::min(a.box.bottom(), b.box.bottom()) - std::max(a.box.y, b.box.y);
    const int overlap_x = std::min(a.box.right(), b.box.right()) - std::max(a.box.x, b.box.x);
    return overlap_y > 0 || overlap_x > 0;  // same row or same column, gaps allowed
}

}  // namespace detail

/// Merge aligned (Text,Text)/(Text,Both) pairs of similar dimensions into a
/// single Text region spanning both, to fixpoint. Overlap is not required.
inline std::vector<LabeledRegion> draw_text_box(std::vector<LabeledRegion> regions,
                                                const TextBoxParams& p) {
    detail::sort_regions(regions);
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i + 1 < regions.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < regions.size() && !merged; ++j) {
                if (detail::text_box_match(regions[i], regions[j], p)) {
                    LabeledRegion u;
                    u.box = union_box(regions[i].box, regions[j].box);
                    u.label = RegionLabel::Text;
                    u.confidence = std::max(regions[i].confidence, regions[j].confidence);
                    regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
                    regions[i] = u;
                    detail::sort_regions(regions);
                    merged = true;
                }
            }
        }
    }
    return regions;
}

/// Clip the overlapping slab off each Text region that a NoText region covers
/// by >= trim_major_frac along one axis and >= trim_minor_frac along the
/// other (fractions of the Text region's extents). The larger remaining piece
/// is kept; a Text region that would vanish or end up thinner than a
/// classifiable crop (4 px) is dropped with a warning.
inline std::vector<LabeledRegion> trim_text_box(std::vector<LabeledRegion> regions,
                                                const TextBoxParams& p) {
    detail::sort_regions(regions);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t ti = 0; ti < regions.size() && !changed; ++ti) {
            if (regions[ti].label != RegionLabel::Text) continue;
            for (std::size_t ni = 0; ni < regions.size() && !changed; ++ni) {
                if (regions[ni].label != RegionLabel::NoText) continue;
                const Box& t = regions[ti].box;
                const auto inter = intersect_box(t, regions[ni].box);
                if (!inter) continue;
                const double frac_h = static_cast<double>(inter->h) / t.h;
                const double frac_w = static_cast<double>(inter->w) / t.w;
                const bool tall_slab = frac_h >= p.trim_major_frac && frac_w >= p.trim_minor_frac;
                const bool wide_slab = frac_w >= p.trim_major_frac && frac_h >= p.trim_minor_frac;
                if (!tall_slab && !wide_slab) continue;

                int keep_lo, keep_len;
                const bool cut_columns = tall_slab && (!wide_slab || frac_h >= frac_w);
                if (cut_columns) {
                    const int left_w = inter->x - t.x;
                    const int right_w = t.right() - inter->right();
                    if (left_w >= right_w) { keep_lo = t.x; keep_len = left_w; }
                    else { keep_lo = inter->right(); keep_len = right_w; }
                } else {
                    const int top_h = inter->y - t.y;
                    const int bottom_h = t.bottom() - inter->bottom();
                    if (top_h >= bottom_h) { keep_lo = t.y; keep_len = top_h; }
                    else { keep_lo = inter->bottom(); keep_len = bottom_h; }
                }

                if (keep_len < 4) {  // nothing classifiable or segmentable survives
                    log_warn("trim_text_box: text region annihilated by trim, dropping it");
                    regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(ti));
                } else if (cut_columns) {
                    regions[ti].box = Box(keep_lo, t.y, keep_len, t.h);
                } else {
                    regions[ti].box = Box(t.x, keep_lo, t.w, keep_len);
                }
                detail::sort_regions(regions);
                changed = true;
            }
        }
    }
    return regions;
}

}  // namespace glyphline
