#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "glyphline/box.hpp"
#include "glyphline/image.hpp"
#include "glyphline/imaging.hpp"

namespace glyphline {

struct SegmentationParams {
    double scale = 450.0;     // threshold function tau(C) = scale / |C|
    double sigma = 0.8;       // pre-smoothing width
    int min_size = 60;        // enforced minimum component size
    std::int64_t min_area = 2000;  // minimum area of a proposed box

    SegmentationParams() = default;
    SegmentationParams(double scale_, double sigma_, int min_size_, std::int64_t min_area_ = 2000)
        : scale(scale_), sigma(sigma_), min_size(min_size_), min_area(min_area_) {
        if (scale <= 0 || sigma <= 0 || min_size < 1 || min_area < 1)
            throw std::invalid_argument("SegmentationParams: all parameters must be positive");
    }
};

/// The tuned parameter grid: scales {350, 450, 500} x min sizes {30, 60, 120},
/// sigma 0.8, minimum proposal area 2000.
inline std::vector<SegmentationParams> default_search_grid() {
    std::vector<SegmentationParams> grid;
    for (double scale : {350.0, 450.0, 500.0})
        for (int min_size : {30, 60, 120})
            grid.emplace_back(scale, 0.8, min_size, 2000);
    return grid;
}

struct SegmentMap {
    int width = 0;
    int height = 0;
    int segment_count = 0;
    std::vector<int> labels;  // row-major, ids contiguous in [0, segment_count)

    int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

struct FelzEdge {
    float w;
    int a, b;
};

struct FelzUniverse {
    std::vector<int> parent, rank_;
    std::vector<std::int64_t> size;
    explicit FelzUniverse(int n) : parent(n), rank_(n, 0), size(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int i) {
        int root = i;
        while (parent[root] != root) root = parent[root];
        while (parent[i] != root) {
            const int next = parent[i];
            parent[i] = root;
            i = next;
        }
        return root;
    }
    int join(int a, int b) {
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        if (rank_[a] == rank_[b]) ++rank_[a];
        return a;
    }
};

}  // namespace detail

/// Graph-based segmentation: Gaussian pre-smooth, 8-connected color-distance
/// edges merged in Kruskal order under tau(C) = scale/|C|, then a post-pass
/// folding every component smaller than min_size into its nearest neighbor.
inline SegmentMap felzenszwalb(const RasterImage& img, const SegmentationParams& p) {
    const int w = img.width, h = img.height;
    const int channels = img.channels;
    const std::size_t n = img.pixel_count();

    // smooth each channel
    std::vector<std::vector<double>> planes(channels);
    {
        const GaussianSpec spec = GaussianSpec::from_sigma(p.sigma);
        std::vector<double> plane(n);
        for (int c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < n; ++i) plane[i] = img.data[i * channels + c];
            planes[c] = gaussian_blur_plane(plane, w, h, spec);
        }
    }

    auto color_dist = [&](std::size_t a, std::size_t b) -> float {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double d = planes[c][a] - planes[c][b];
            acc += d * d;
        }
        return static_cast<float>(std::sqrt(acc));
    };

    std::vector<detail::FelzEdge> edges;
    edges.reserve(n * 4);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int a = y * w + x;
            if (x + 1 < w) edges.push_back({color_dist(a, a + 1), a, a + 1});
            if (y + 1 < h) edges.push_back({color_dist(a, a + w), a, a + w});
            if (x + 1 < w && y + 1 < h) edges.push_back({color_dist(a, a + w + 1), a, a + w + 1});
            if (x + 1 < w && y > 0) edges.push_back({color_dist(a, a - w + 1), a, a - w + 1});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const detail::FelzEdge& a, const detail::FelzEdge& b) {
        return std::tie(a.w, a.a, a.b) < std::tie(b.w, b.a, b.b);
    });

    detail::FelzUniverse uf(static_cast<int>(n));
    std::vector<double> threshold(n, p.scale);
    for (const auto& e : edges) {
        const int ra = uf.find(e.a);
        const int rb = uf.find(e.b);
        if (ra == rb) continue;
        if (e.w <= threshold[ra] && e.w <= threshold[rb]) {
            const int r = uf.join(ra, rb);
            threshold[r] = e.w + p.scale / static_cast<double>(uf.size[r]);
        }
    }

    // enforce minimum component size
    for (const auto& e : edges) {
        const int ra = uf.find(e.a);
        const int rb = uf.find(e.b);
        if (ra != rb && (uf.size[ra] < p.min_size || uf.size[rb] < p.min_size))
            uf.join(ra, rb);
    }

    SegmentMap seg;
    seg.width = w;
    seg.height = h;
    seg.labels.resize(n);
    std::map<int, int> remap;
    for (std::size_t i = 0; i < n; ++i) {
        const int root = uf.find(static_cast<int>(i));
        auto [it, inserted] = remap.try_emplace(root, static_cast<int>(remap.size()));
        seg.labels[i] = it->second;
    }
    seg.segment_count = static_cast<int>(remap.size());
    return seg;
}

// ---------------------------------------------------------------------------
// Hierarchical grouping
// ---------------------------------------------------------------------------

struct RegionNode {
    std::vector<int> segments;         // initial segment ids merged so far
    Box box;
    std::int64_t size = 0;
    std::vector<double> color_hist;    // 25 bins per channel, sums to 1
    std::vector<double> texture_hist;  // 8 orientations x 10 bins per channel, sums to 1
};

/// color + texture + size + fill similarity, each term in [0,1].
inline double similarity(const RegionNode& a, const RegionNode& b, std::int64_t image_area) {
    double s_color = 0.0;
    for (std::size_t i = 0; i < a.color_hist.size(); ++i)
        s_color += std::min(a.color_hist[i], b.color_hist[i]);
    double s_texture = 0.0;
    for (std::size_t i = 0; i < a.texture_hist.size(); ++i)
        s_texture += std::min(a.texture_hist[i], b.texture_hist[i]);
    const double area = static_cast<double>(image_area);
    const double s_size = 1.0 - static_cast<double>(a.size + b.size) / area;
    const Box bb = union_box(a.box, b.box);
    const double s_fill = 1.0 - (static_cast<double>(bb.area()) - static_cast<double>(a.size) -
                                 static_cast<double>(b.size)) / area;
    return s_color + s_texture + s_size + s_fill;
}

/// One region descriptor per segment of the map (histograms over the
/// original, unsmoothed image).
inline std::vector<RegionNode> build_region_nodes(const RasterImage& img, const SegmentMap& seg) {
    const int w = img.width, h = img.height, channels = img.channels;
    const int color_bins = 25 * channels;
    const int texture_bins = 8 * 10 * channels;
    std::vector<RegionNode> nodes(seg.segment_count);
    for (auto& nd : nodes) {
        nd.color_hist.assign(color_bins, 0.0);
        nd.texture_hist.assign(texture_bins, 0.0);
    }
    std::vector<int> min_x(seg.segment_count, w), max_x(seg.segment_count, -1);
    std::vector<int> min_y(seg.segment_count, h), max_y(seg.segment_count, -1);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int id = seg.at(x, y);
            RegionNode& nd = nodes[id];
            nd.size += 1;
            min_x[id] = std::min(min_x[id], x);
            max_x[id] = std::max(max_x[id], x);
            min_y[id] = std::min(min_y[id], y);
            max_y[id] = std::max(max_y[id], y);
            for (int c = 0; c < channels; ++c) {
                const int v = img.at(x, y, c);
                nd.color_hist[c * 25 + (v * 25) / 256] += 1.0;
                // central-difference gradient, mirrored at borders
                const int xl = detail::mirror_index(x - 1, w), xr = detail::mirror_index(x + 1, w);
                const int yu = detail::mirror_index(y - 1, h), yd = detail::mirror_index(y + 1, h);
                const double gx = static_cast<double>(img.at(xr, y, c)) - img.at(xl, y, c);
                const double gy = static_cast<double>(img.at(x, yd, c)) - img.at(x, yu, c);
                const double theta = std::atan2(gy, gx);  // [-pi, pi]
                int obin = static_cast<int>((theta + 3.14159265358979323846) / (2.0 * 3.14159265358979323846) * 8.0);
                obin = std::clamp(obin, 0, 7);
                const double mag = std::hypot(gx, gy);    // <= ~360.7
                const int mbin = std::min(9, static_cast<int>(mag / 361.0 * 10.0));
                nd.texture_hist[(c * 8 + obin) * 10 + mbin] += 1.0;
            }
        }
    }
    for (int id = 0; id < seg.segment_count; ++id) {
        RegionNode& nd = nodes[id];
        nd.segments = {id};
        nd.box = Box(min_x[id], min_y[id], max_x[id] - min_x[id] + 1, max_y[id] - min_y[id] + 1);
        const double total = static_cast<double>(nd.size) * channels;
        for (auto& v : nd.color_hist) v /= total;
        for (auto& v : nd.texture_hist) v /= total;
    }
    return nodes;
}

/// Weighted-sum merge of two region descriptors.
inline RegionNode merge_nodes(const RegionNode& a, const RegionNode& b) {
    RegionNode m;
    m.segments = a.segments;
    m.segments.insert(m.segments.end(), b.segments.begin(), b.segments.end());
    std::sort(m.segments.begin(), m.segments.end());
    m.size = a.size + b.size;
    m.box = union_box(a.box, b.box);
    const double sa = static_cast<double>(a.size), sb = static_cast<double>(b.size);
    m.color_hist.resize(a.color_hist.size());
    for (std::size_t i = 0; i < m.color_hist.size(); ++i)
        m.color_hist[i] = (a.color_hist[i] * sa + b.color_hist[i] * sb) / (sa + sb);
    m.texture_hist.resize(a.texture_hist.size());
    for (std::size_t i = 0; i < m.texture_hist.size(); ++i)
        m.texture_hist[i] = (a.texture_hist[i] * sa + b.texture_hist[i] * sb) / (sa + sb);
    return m;
}

/// Greedy most-similar-first merging over the segment adjacency graph,
/// collecting the bounding box of every region ever formed. An n-segment map
/// yields exactly 2n-1 boxes (duplicates included).
inline std::vector<Box> hierarchy_boxes(const RasterImage& img, const SegmentMap& seg) {
    const std::int64_t image_area = static_cast<std::int64_t>(img.width) * img.height;
    auto nodes_vec = build_region_nodes(img, seg);

    std::map<int, RegionNode> active;
    for (int i = 0; i < seg.segment_count; ++i) active.emplace(i, std::move(nodes_vec[i]));

    // adjacency between segments that touch (8-connectivity)
    std::map<int, std::set<int>> neighbors;
    const int w = seg.width, h = seg.height;
    auto connect = [&](int a, int b) {
        if (a == b) return;
        neighbors[a].insert(b);
        neighbors[b].insert(a);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int id = seg.at(x, y);
            if (x + 1 < w) connect(id, seg.at(x + 1, y));
            if (y + 1 < h) connect(id, seg.at(x, y + 1));
            if (x + 1 < w && y + 1 < h) connect(id, seg.at(x + 1, y + 1));
            if (x + 1 < w && y > 0) connect(id, seg.at(x + 1, y - 1));
        }
    }

    // highest similarity first; ties broken by the lower id pair
    struct Cmp {
        bool operator()(const std::tuple<double, int, int>& a,
                        const std::tuple<double, int, int>& b) const {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        }
    };
    std::set<std::tuple<double, int, int>, Cmp> sims;
    for (const auto& [id, nbs] : neighbors)
        for (int nb : nbs)
            if (id < nb)
                sims.emplace(similarity(active.at(id), active.at(nb), image_area), id, nb);

    std::vector<Box> boxes;
    boxes.reserve(2 * active.size());
    for (const auto& [id, nd] : active) boxes.push_back(nd.box);

    int next_id = seg.segment_count;
    while (active.size() > 1 && !sims.empty()) {
        const auto [s, a, b] = *sims.begin();
        sims.erase(sims.begin());
        RegionNode merged = merge_nodes(active.at(a), active.at(b));
        boxes.push_back(merged.box);

        std::set<int> merged_nbs;
        for (int id : {a, b}) {
            for (int nb : neighbors[id]) {
                if (nb == a || nb == b) continue;
                merged_nbs.insert(nb);
                neighbors[nb].erase(id);
                sims.erase({similarity(active.at(std::min(id, nb)), active.at(std::max(id, nb)), image_area),
                            std::min(id, nb), std::max(id, nb)});
            }
            neighbors.erase(id);
            active.erase(id);
        }

        const int c = next_id++;
        active.emplace(c, std::move(merged));
        neighbors[c] = merged_nbs;
        for (int nb : merged_nbs) {
            neighbors[nb].insert(c);
            sims.emplace(similarity(active.at(c), active.at(nb), image_area), std::min(nb, c), std::max(nb, c));
        }
    }
    return boxes;
}

/// Run the full grid, union the proposals, drop boxes under min_area, and
/// deduplicate. Deterministic for a fixed input and grid.
inline std::vector<Box> selective_search(const RasterImage& img,
                                         const std::vector<SegmentationParams>& grid) {
    std::vector<Box> all;
    for (const auto& p : grid) {
        const SegmentMap seg = felzenszwalb(img, p);
        auto boxes = hierarchy_boxes(img, seg);
        for (const auto& b : boxes)
            if (b.area() >= p.min_area) all.push_back(b);
    }
    sort_boxes(all);
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

}  // namespace glyphline
