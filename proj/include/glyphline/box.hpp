#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace glyphline {

/// Integer axis-aligned rectangle. (x, y) is the top-left pixel, w/h >= 1.
struct Box {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    Box() = default;
    Box(int x_, int y_, int w_, int h_) : x(x_), y(y_), w(w_), h(h_) {
        if (w < 1 || h < 1) throw std::invalid_argument("Box: w and h must be >= 1");
    }

    int right() const { return x + w; }    // exclusive
    int bottom() const { return y + h; }   // exclusive
    std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }

    double center_x() const { return x + w / 2.0; }
    double center_y() const { return y + h / 2.0; }

    bool contains(const Box& o) const {
        return x <= o.x && y <= o.y && o.right() <= right() && o.bottom() <= bottom();
    }
    bool contains_point(int px, int py) const {
        return px >= x && px < right() && py >= y && py < bottom();
    }

    friend bool operator==(const Box& a, const Box& b) {
        return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
    }
    friend auto operator<=>(const Box& a, const Box& b) {
        return std::tie(a.y, a.x, a.w, a.h) <=> std::tie(b.y, b.x, b.w, b.h);
    }
};

/// Intersection area in pixels^2; 0 when disjoint. Symmetric.
inline std::int64_t overlap_area(const Box& a, const Box& b) {
    const int ox = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const int oy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (ox <= 0 || oy <= 0) return 0;
    return static_cast<std::int64_t>(ox) * oy;
}

/// Minimal box covering both inputs.
inline Box union_box(const Box& a, const Box& b) {
    const int x0 = std::min(a.x, b.x);
    const int y0 = std::min(a.y, b.y);
    const int x1 = std::max(a.right(), b.right());
    const int y1 = std::max(a.bottom(), b.bottom());
    return Box(x0, y0, x1 - x0, y1 - y0);
}

inline double iou(const Box& a, const Box& b) {
    const std::int64_t inter = overlap_area(a, b);
    const std::int64_t uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Clip to the rectangle [0,w) x [0,h). Throws if the box lies fully outside.
inline Box clamp_box(const Box& b, int w, int h) {
    const int x0 = std::clamp(b.x, 0, w - 1);
    const int y0 = std::clamp(b.y, 0, h - 1);
    const int x1 = std::clamp(b.right(), x0 + 1, w);
    const int y1 = std::clamp(b.bottom(), y0 + 1, h);
    return Box(x0, y0, x1 - x0, y1 - y0);
}

inline void sort_boxes(std::vector<Box>& boxes) {
    std::sort(boxes.begin(), boxes.end());
}

}  // namespace glyphline
