#pragma once

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "glyphline/image.hpp"
#include "glyphline/imaging.hpp"
#include "glyphline/io.hpp"
#include "glyphline/labels.hpp"
#include "glyphline/log.hpp"
#include "glyphline/neuralnet.hpp"
#include "glyphline/rng.hpp"

namespace glyphline {

// ---------------------------------------------------------------------------
// Classifier handles
// ---------------------------------------------------------------------------

enum class ClassifierRole { Region3, Glyph2 };

inline std::string to_string(ClassifierRole r) {
    return r == ClassifierRole::Region3 ? "region3" : "glyph2";
}
inline ClassifierRole classifier_role_from_string(const std::string& s) {
    if (s == "region3") return ClassifierRole::Region3;
    if (s == "glyph2") return ClassifierRole::Glyph2;
    throw std::invalid_argument("unknown classifier role: " + s);
}

inline const std::vector<std::string>& class_names(ClassifierRole role) {
    static const std::vector<std::string> region = {"Text", "NoText", "Both"};
    static const std::vector<std::string> glyph = {"Jar", "NoJar"};
    return role == ClassifierRole::Region3 ? region : glyph;
}

inline int label_index(ClassifierRole role, const std::string& label) {
    const auto& names = class_names(role);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == label) return static_cast<int>(i);
    throw std::invalid_argument("unknown label '" + label + "' for role " + to_string(role));
}

struct Preprocessing {
    int resize_to = 32;
    bool grayscale = true;
    double divisor = 255.0;
};

/// Line-delimited JSON classifier plug-in over a child process's stdio:
/// request {"id", "png_base64"} -> response {"id", "label", "confidence"}.
class SubprocessClassifier {
public:
    explicit SubprocessClassifier(std::vector<std::string> argv) {
        if (argv.empty()) throw std::invalid_argument("SubprocessClassifier: empty argv");
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw std::runtime_error("SubprocessClassifier: pipe failed");
        pid_ = fork();
        if (pid_ < 0) throw std::runtime_error("SubprocessClassifier: fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> cargv;
            cargv.reserve(argv.size() + 1);
            for (auto& a : argv) cargv.push_back(a.data());
            cargv.push_back(nullptr);
            execvp(cargv[0], cargv.data());
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        to_child_ = to_child[1];
        from_child_ = from_child[0];
    }

    SubprocessClassifier(const SubprocessClassifier&) = delete;
    SubprocessClassifier& operator=(const SubprocessClassifier&) = delete;

    ~SubprocessClassifier() {
        if (to_child_ >= 0) close(to_child_);
        if (from_child_ >= 0) close(from_child_);
        if (pid_ > 0) waitpid(pid_, nullptr, 0);
    }

    nlohmann::json roundtrip(const nlohmann::json& request) {
        const std::string line = request.dump() + "\n";

        // Writing to a child that already died must surface as an exception,
        // not a fatal SIGPIPE: block it for the duration of the write and
        // swallow the pending signal on failure.
        sigset_t pipe_sig, previous;
        sigemptyset(&pipe_sig);
        sigaddset(&pipe_sig, SIGPIPE);
        pthread_sigmask(SIG_BLOCK, &pipe_sig, &previous);
        bool broken = false;
        std::size_t written = 0;
        while (written < line.size()) {
            const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
            if (n <= 0) {
                broken = true;
                break;
            }
            written += static_cast<std::size_t>(n);
        }
        if (broken) {
            struct timespec none = {0, 0};
            sigtimedwait(&pipe_sig, nullptr, &none);
        }
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        if (broken) throw std::runtime_error("classifier plug-in: write failed");
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                const std::string reply = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return nlohmann::json::parse(reply);
            }
            char chunk[4096];
            const ssize_t n = read(from_child_, chunk, sizeof(chunk));
            if (n <= 0) throw std::runtime_error("classifier plug-in: stream closed");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    pid_t pid_ = -1;
    int to_child_ = -1, from_child_ = -1;
    std::string buffer_;
};

/// A classification role bound to either an in-process net or an external
/// plug-in, plus its fixed input preprocessing.
struct ClassifierHandle {
    ClassifierRole role = ClassifierRole::Region3;
    Preprocessing preprocessing;
    std::shared_ptr<Network<float>> net;
    std::shared_ptr<SubprocessClassifier> plugin;
};

/// Untrained 3-way region classifier (64x64 grayscale input).
inline ClassifierHandle make_region_classifier() {
    ClassifierHandle h;
    h.role = ClassifierRole::Region3;
    h.preprocessing = {64, true, 255.0};
    h.net = std::make_shared<Network<float>>(make_symbolnet<float>(64, 3));
    return h;
}

/// Untrained 2-way glyph classifier (32x32 grayscale input).
inline ClassifierHandle make_glyph_classifier() {
    ClassifierHandle h;
    h.role = ClassifierRole::Glyph2;
    h.preprocessing = {32, true, 255.0};
    h.net = std::make_shared<Network<float>>(make_symbolnet<float>(32, 2));
    return h;
}

/// Resize, grayscale, and normalize a crop into one NCHW sample.
inline std::vector<float> preprocess_crop(const RasterImage& crop, const Preprocessing& pre) {
    RasterImage img = pre.grayscale ? to_grayscale(crop) : crop;
    if (img.width != pre.resize_to || img.height != pre.resize_to)
        img = resize_bilinear(img, pre.resize_to, pre.resize_to);
    std::vector<float> sample(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        sample[i] = static_cast<float>(img.data[i] / pre.divisor);
    return sample;
}

/// Class index + winning softmax probability. Degenerate crops (either side
/// < 4 px) short-circuit to class 1 (NoText / NoJar) with confidence 0.
inline std::pair<int, double> classify(const ClassifierHandle& h, const RasterImage& crop) {
    if (crop.width < 4 || crop.height < 4) {
        log_warn("classify: degenerate crop " + std::to_string(crop.width) + "x" +
                 std::to_string(crop.height) + ", returning " + class_names(h.role)[1]);
        return {1, 0.0};
    }
    if (h.plugin) {
        static int next_id = 0;
        nlohmann::json req;
        req["id"] = next_id++;
        req["png_base64"] = base64_encode(encode_png(crop));
        const nlohmann::json resp = h.plugin->roundtrip(req);
        return {label_index(h.role, resp.at("label").get<std::string>()),
                resp.at("confidence").get<double>()};
    }
    if (!h.net) throw std::runtime_error("classify: handle has no model");
    const auto sample = preprocess_crop(crop, h.preprocessing);
    h.net->forward(sample, 1, /*training=*/false);
    const auto probs = h.net->probabilities();
    int arg = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[arg]) arg = static_cast<int>(c);
    return {arg, static_cast<double>(probs[arg])};
}

inline std::pair<RegionLabel, double> classify_region(const ClassifierHandle& h, const RasterImage& crop) {
    if (h.role != ClassifierRole::Region3) throw std::invalid_argument("classify_region: wrong role");
    const auto [idx, conf] = classify(h, crop);
    return {static_cast<RegionLabel>(idx), conf};
}

inline std::pair<GlyphLabel, double> classify_glyph(const ClassifierHandle& h, const RasterImage& crop) {
    if (h.role != ClassifierRole::Glyph2) throw std::invalid_argument("classify_glyph: wrong role");
    const auto [idx, conf] = classify(h, crop);
    return {static_cast<GlyphLabel>(idx), conf};
}

// ---------------------------------------------------------------------------
// Classifier checkpoints
// ---------------------------------------------------------------------------

inline void save_classifier(const ClassifierHandle& h, const std::string& path) {
    if (!h.net) throw std::runtime_error("save_classifier: handle has no in-process model");
    nlohmann::json meta;
    meta["role"] = to_string(h.role);
    meta["preprocessing"] = {{"resize_to", h.preprocessing.resize_to},
                             {"grayscale", h.preprocessing.grayscale},
                             {"divisor", h.preprocessing.divisor}};
    meta["labels"] = class_names(h.role);
    write_file_atomic(path, serialize_checkpoint(*h.net, meta));
}

inline ClassifierHandle load_classifier(const std::string& path) {
    auto loaded = deserialize_checkpoint<float>(read_file(path));
    ClassifierHandle h;
    h.role = classifier_role_from_string(loaded.meta.at("role").get<std::string>());
    const auto& pre = loaded.meta.at("preprocessing");
    h.preprocessing = {pre.at("resize_to").get<int>(), pre.at("grayscale").get<bool>(),
                       pre.at("divisor").get<double>()};
    h.net = std::make_shared<Network<float>>(std::move(loaded.net));
    return h;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

enum class AugmentKind { HorizontalFlip, VerticalFlip, Rotate, Shear, Scale, Translate };

struct AugmentOp {
    AugmentKind kind{};
    double a = 0.0;  // rotate: degrees; shear/scale: factor; translate: dx pixels
    double b = 0.0;  // translate: dy pixels
};

/// Draws parameters for each requested kind from the generator: rotate within
/// +-15 degrees, shear within +-0.2, scale in 0.8-1.2, translate within +-10%
/// of each side.
inline std::vector<AugmentOp> draw_augment_plan(const std::vector<AugmentKind>& kinds,
                                                int width, int height, Rng& rng) {
    std::vector<AugmentOp> plan;
    plan.reserve(kinds.size());
    for (const auto kind : kinds) {
        AugmentOp op;
        op.kind = kind;
        switch (kind) {
            case AugmentKind::HorizontalFlip:
            case AugmentKind::VerticalFlip:
                break;
            case AugmentKind::Rotate:
                op.a = rng.uniform(-15.0, 15.0);
                break;
            case AugmentKind::Shear:
                op.a = rng.uniform(-0.2, 0.2);
                break;
            case AugmentKind::Scale:
                op.a = rng.uniform(0.8, 1.2);
                break;
            case AugmentKind::Translate:
                op.a = rng.uniform(-0.1, 0.1) * width;
                op.b = rng.uniform(-0.1, 0.1) * height;
                break;
        }
        plan.push_back(op);
    }
    return plan;
}

inline std::vector<AugmentKind> default_augment_kinds() {
    return {AugmentKind::HorizontalFlip, AugmentKind::VerticalFlip, AugmentKind::Rotate,
            AugmentKind::Shear,          AugmentKind::Scale,        AugmentKind::Translate};
}

namespace detail {

/// Median of the image's border pixels; the fill value for affine warps.
inline std::uint8_t border_median(const RasterImage& img) {
    std::vector<std::uint8_t> vals;
    vals.reserve(static_cast<std::size_t>(2 * (img.width + img.height)) * img.channels);
    for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
            vals.push_back(img.at(x, 0, c));
            vals.push_back(img.at(x, img.height - 1, c));
        }
    for (int y = 0; y < img.height; ++y)
        for (int c = 0; c < img.channels; ++c) {
            vals.push_back(img.at(0, y, c));
            vals.push_back(img.at(img.width - 1, y, c));
        }
    std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
    return vals[vals.size() / 2];
}

}  // namespace detail

/// One augmented copy; output dimensions always equal the input's, with
/// border-median fill for pixels mapped from outside. Identity parameters
/// reproduce the input exactly.
inline RasterImage apply_augment(const RasterImage& img, const AugmentOp& op) {
    switch (op.kind) {
        case AugmentKind::HorizontalFlip:
            return flip_horizontal(img);
        case AugmentKind::VerticalFlip:
            return flip_vertical(img);
        default:
            break;
    }
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;
    AffineMap map;
    switch (op.kind) {
        case AugmentKind::Rotate: {
            const double t = op.a * 3.14159265358979323846 / 180.0;
            const double c = std::cos(t), s = std::sin(t);
            map.m[0] = c;
            map.m[1] = -s;
            map.m[2] = cx - c * cx + s * cy;
            map.m[3] = s;
            map.m[4] = c;
            map.m[5] = cy - s * cx - c * cy;
            break;
        }
        case AugmentKind::Shear: {
            map.m[0] = 1.0;
            map.m[1] = op.a;
            map.m[2] = -op.a * cy;
            break;
        }
        case AugmentKind::Scale: {
            const double inv = 1.0 / op.a;
            map.m[0] = inv;
            map.m[4] = inv;
            map.m[2] = cx - inv * cx;
            map.m[5] = cy - inv * cy;
            break;
        }
        case AugmentKind::Translate: {
            map.m[2] = -op.a;
            map.m[5] = -op.b;
            break;
        }
        default:
            break;
    }
    return warp_affine(img, map, detail::border_median(img));
}

/// Applies every op of the plan to the original image; output count equals
/// the plan length.
inline std::vector<RasterImage> augment(const RasterImage& img, const std::vector<AugmentOp>& plan) {
    std::vector<RasterImage> out;
    out.reserve(plan.size());
    for (const auto& op : plan) out.push_back(apply_augment(img, op));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset manifests and splits
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string path;
    std::string label;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    double split_ratio = 0.70;
    std::uint64_t seed = 0;
};

/// CSV rows of `path,label`; blank lines ignored; an optional `path,label`
/// header row is skipped.
inline DatasetManifest load_manifest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest: " + path);
    DatasetManifest m;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error("manifest line missing comma: " + line);
        ManifestEntry e{line.substr(0, comma), line.substr(comma + 1)};
        if (first && e.path == "path" && e.label == "label") {
            first = false;
            continue;
        }
        first = false;
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void save_manifest_csv(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ostringstream out;
    out << "path,label\n";
    for (const auto& e : entries) out << e.path << "," << e.label << "\n";
    write_file_atomic(path, out.str());
}

/// Seeded per-class split: train share = floor(ratio*n + 0.5), clamped so
/// both sides stay non-empty. Classes are processed in label order; the two
/// sides partition the manifest.
inline std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> stratified_split(
    const DatasetManifest& m) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        by_class[m.entries[i].label].push_back(i);
    if (by_class.empty()) throw std::invalid_argument("stratified_split: empty manifest");
    for (const auto& [label, idx] : by_class)
        if (idx.size() < 2)
            throw std::invalid_argument("stratified_split: class '" + label + "' has fewer than 2 samples");

    Rng rng(m.seed);
    std::vector<ManifestEntry> train, val;
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const auto n = static_cast<std::int64_t>(idx.size());
        std::int64_t train_n = static_cast<std::int64_t>(std::floor(m.split_ratio * static_cast<double>(n) + 0.5));
        train_n = std::clamp<std::int64_t>(train_n, 1, n - 1);
        for (std::int64_t i = 0; i < n; ++i)
            (i < train_n ? train : val).push_back(m.entries[idx[static_cast<std::size_t>(i)]]);
    }
    return {std::move(train), std::move(val)};
}

/// Preprocess loaded crops into a training set for the handle's role.
inline BatchSet<float> build_batchset(const std::vector<RasterImage>& crops,
                                      const std::vector<int>& labels, const Preprocessing& pre) {
    if (crops.size() != labels.size())
        throw std::invalid_argument("build_batchset: crops/labels size mismatch");
    BatchSet<float> set;
    set.shape = {1, pre.resize_to, pre.resize_to};
    set.data.reserve(crops.size() * static_cast<std::size_t>(set.shape.volume()));
    for (std::size_t i = 0; i < crops.size(); ++i) set.add(preprocess_crop(crops[i], pre), labels[i]);
    return set;
}

/// Load manifest entries from disk into a preprocessed set.
inline BatchSet<float> load_batchset(const std::vector<ManifestEntry>& entries,
                                     ClassifierRole role, const Preprocessing& pre) {
    BatchSet<float> set;
    set.shape = {1, pre.resize_to, pre.resize_to};
    set.data.reserve(entries.size() * static_cast<std::size_t>(set.shape.volume()));
    for (const auto& e : entries)
        set.add(preprocess_crop(load_image(e.path), pre), label_index(role, e.label));
    return set;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
    std::vector<std::string> classes;
};

inline EvalResult evaluate_classifier(const ClassifierHandle& h, const std::vector<RasterImage>& crops,
                                      const std::vector<int>& labels) {
    if (crops.empty() || crops.size() != labels.size())
        throw std::invalid_argument("evaluate_classifier: bad input set");
    const auto& names = class_names(h.role);
    EvalResult r;
    r.classes = names;
    r.confusion.assign(names.size(), std::vector<std::int64_t>(names.size(), 0));
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const int truth = labels[i];
        if (truth < 0 || truth >= static_cast<int>(names.size()))
            throw std::invalid_argument("evaluate_classifier: label out of range");
        const auto [pred, conf] = classify(h, crops[i]);
        r.confusion[truth][pred] += 1;
        if (pred == truth) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(crops.size());
    return r;
}

}  // namespace glyphline
