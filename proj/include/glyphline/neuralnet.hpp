#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glyphline/rng.hpp"

namespace glyphline {

// ---------------------------------------------------------------------------
// Topology description
// ---------------------------------------------------------------------------

enum class LayerKind { Conv, MaxPool, FullyConnected, Relu, Dropout };

inline std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "max_pool";
        case LayerKind::FullyConnected: return "fully_connected";
        case LayerKind::Relu: return "relu";
        case LayerKind::Dropout: return "dropout";
    }
    throw std::logic_error("unknown LayerKind");
}

inline LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "max_pool") return LayerKind::MaxPool;
    if (s == "fully_connected") return LayerKind::FullyConnected;
    if (s == "relu") return LayerKind::Relu;
    if (s == "dropout") return LayerKind::Dropout;
    throw std::invalid_argument("unknown layer kind: " + s);
}

struct LayerSpec {
    LayerKind kind{};
    int out_channels = 0;  // Conv
    int kernel = 0;        // Conv, MaxPool
    int stride = 1;        // Conv, MaxPool
    int units = 0;         // FullyConnected
    double prob = 0.5;     // Dropout: fraction of activations zeroed in training

    static LayerSpec conv(int out_channels, int kernel, int stride = 1) {
        LayerSpec s;
        s.kind = LayerKind::Conv;
        s.out_channels = out_channels;
        s.kernel = kernel;
        s.stride = stride;
        return s;
    }
    static LayerSpec max_pool(int kernel, int stride) {
        LayerSpec s;
        s.kind = LayerKind::MaxPool;
        s.kernel = kernel;
        s.stride = stride;
        return s;
    }
    static LayerSpec fully_connected(int units) {
        LayerSpec s;
        s.kind = LayerKind::FullyConnected;
        s.units = units;
        return s;
    }
    static LayerSpec relu() {
        LayerSpec s;
        s.kind = LayerKind::Relu;
        return s;
    }
    static LayerSpec dropout(double prob) {
        LayerSpec s;
        s.kind = LayerKind::Dropout;
        s.prob = prob;
        return s;
    }
};

struct Shape3 {
    int c = 0, h = 0, w = 0;
    std::int64_t volume() const { return static_cast<std::int64_t>(c) * h * w; }
    bool operator==(const Shape3&) const = default;
};

// ---------------------------------------------------------------------------
// Flat matrix kernels (row-major)
// ---------------------------------------------------------------------------

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
inline void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x p] * B^T, where B is [n x p]
template <typename T>
inline void gemm_abt(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * p;
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::size_t>(j) * p;
            T acc = 0;
            for (int q = 0; q < p; ++q) acc += arow[q] * brow[q];
            crow[j] += acc;
        }
    }
}

// C[m x n] += A^T * B, where A is [p x m] and B is [p x n]
template <typename T>
inline void gemm_atb(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int q = 0; q < p; ++q) {
        const T* arow = a + static_cast<std::size_t>(q) * m;
        const T* brow = b + static_cast<std::size_t>(q) * n;
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Feed-forward net over NCHW batches: valid convolutions, max pooling,
/// inverted dropout, fully-connected layers, ReLU. The scalar type is a
/// template parameter so gradients can be verified in 64-bit.
template <typename T>
class Network {
public:
    Network(Shape3 input, std::vector<LayerSpec> specs)
        : input_(input), specs_(std::move(specs)) {
        if (input_.c < 1 || input_.h < 1 || input_.w < 1)
            throw std::invalid_argument("Network: input shape must be positive");
        Shape3 cur = input_;
        bool flattened = false;
        for (const auto& s : specs_) {
            in_shapes_.push_back(cur);
            switch (s.kind) {
                case LayerKind::Conv: {
                    if (flattened) throw std::invalid_argument("Network: conv after flatten");
                    if (s.kernel < 1 || s.stride < 1 || s.out_channels < 1 ||
                        s.kernel > cur.h || s.kernel > cur.w)
                        throw std::invalid_argument("Network: bad conv spec");
                    const int oh = (cur.h - s.kernel) / s.stride + 1;
                    const int ow = (cur.w - s.kernel) / s.stride + 1;
                    weights_.emplace_back(static_cast<std::size_t>(s.out_channels) * cur.c * s.kernel * s.kernel);
                    biases_.emplace_back(s.out_channels);
                    cur = {s.out_channels, oh, ow};
                    break;
                }
                case LayerKind::MaxPool: {
                    if (flattened) throw std::invalid_argument("Network: pool after flatten");
                    if (s.kernel < 1 || s.stride < 1 || s.kernel > cur.h || s.kernel > cur.w)
                        throw std::invalid_argument("Network: bad pool spec");
                    weights_.emplace_back();
                    biases_.emplace_back();
                    cur = {cur.c, (cur.h - s.kernel) / s.stride + 1, (cur.w - s.kernel) / s.stride + 1};
                    break;
                }
                case LayerKind::FullyConnected: {
                    if (s.units < 1) throw std::invalid_argument("Network: bad fc spec");
                    const std::int64_t d = cur.volume();
                    weights_.emplace_back(static_cast<std::size_t>(s.units) * d);
                    biases_.emplace_back(s.units);
                    cur = {s.units, 1, 1};
                    flattened = true;
                    break;
                }
                case LayerKind::Relu:
                case LayerKind::Dropout:
                    if (s.kind == LayerKind::Dropout && !(s.prob >= 0.0 && s.prob < 1.0))
                        throw std::invalid_argument("Network: dropout prob must be in [0,1)");
                    weights_.emplace_back();
                    biases_.emplace_back();
                    break;
            }
            out_shapes_.push_back(cur);
        }
        if (specs_.empty() || cur.h != 1 || cur.w != 1)
            throw std::invalid_argument("Network: must end in a fully-connected output");
        weight_grads_ = weights_;
        bias_grads_ = biases_;
        weight_vel_ = weights_;
        bias_vel_ = biases_;
        acts_.resize(specs_.size() + 1);
        masks_.resize(specs_.size());
        argmax_.resize(specs_.size());
    }

    const Shape3& input_shape() const { return input_; }
    const std::vector<LayerSpec>& specs() const { return specs_; }
    int num_classes() const { return out_shapes_.back().c; }

    std::vector<std::vector<T>*> param_buffers() {
        std::vector<std::vector<T>*> out;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!weights_[i].empty()) out.push_back(&weights_[i]);
            if (!biases_[i].empty()) out.push_back(&biases_[i]);
        }
        return out;
    }
    std::vector<std::vector<T>*> grad_buffers() {
        std::vector<std::vector<T>*> out;
        for (std::size_t i = 0; i < weight_grads_.size(); ++i) {
            if (!weight_grads_[i].empty()) out.push_back(&weight_grads_[i]);
            if (!biases_[i].empty()) out.push_back(&bias_grads_[i]);
        }
        return out;
    }
    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto* p : param_buffers()) n += static_cast<std::int64_t>(p->size());
        return n;
    }

    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases. Draw order is
    /// fixed: layer by layer, weights elementwise.
    void init_params(Rng& rng) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (weights_[i].empty()) continue;
            const Shape3& in = in_shapes_[i];
            const std::int64_t fan_in = specs_[i].kind == LayerKind::Conv
                ? static_cast<std::int64_t>(in.c) * specs_[i].kernel * specs_[i].kernel
                : in.volume();
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (auto& w : weights_[i]) w = static_cast<T>(rng.uniform(-limit, limit));
            std::fill(biases_[i].begin(), biases_[i].end(), T(0));
        }
        for (auto& v : weight_vel_) std::fill(v.begin(), v.end(), T(0));
        for (auto& v : bias_vel_) std::fill(v.begin(), v.end(), T(0));
    }

    /// When frozen, training-mode dropout reuses the last sampled masks
    /// (required for finite-difference verification).
    void set_dropout_frozen(bool frozen) { dropout_frozen_ = frozen; }

    /// Runs the net on a batch (NCHW, batch*input volume elements) and returns
    /// the logits (batch x num_classes). `rng` is only needed when training
    /// with unfrozen dropout.
    const std::vector<T>& forward(const std::vector<T>& x, int batch, bool training, Rng* rng = nullptr) {
        if (batch < 1 || static_cast<std::int64_t>(x.size()) != batch * input_.volume())
            throw std::invalid_argument("Network::forward: input size mismatch");
        batch_ = batch;
        training_ = training;
        acts_[0] = x;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            const Shape3& in = in_shapes_[i];
            const Shape3& out = out_shapes_[i];
            const std::vector<T>& src = acts_[i];
            std::vector<T>& dst = acts_[i + 1];
            dst.assign(static_cast<std::size_t>(batch) * out.volume(), T(0));
            switch (s.kind) {
                case LayerKind::Conv: {
                    const int kk = in.c * s.kernel * s.kernel;
                    const int pos = out.h * out.w;
                    cols_.resize(static_cast<std::size_t>(kk) * pos);
                    for (int n = 0; n < batch; ++n) {
                        const T* xn = src.data() + static_cast<std::size_t>(n) * in.volume();
                        T* yn = dst.data() + static_cast<std::size_t>(n) * out.volume();
                        im2col(xn, in, s.kernel, s.stride, out, cols_.data());
                        for (int oc = 0; oc < out.c; ++oc)
                            std::fill(yn + static_cast<std::size_t>(oc) * pos,
                                      yn + static_cast<std::size_t>(oc + 1) * pos, biases_[i][oc]);
                        detail::gemm_acc(weights_[i].data(), cols_.data(), yn, out.c, kk, pos);
                    }
                    break;
                }
                case LayerKind::MaxPool: {
                    argmax_[i].resize(dst.size());
                    for (int n = 0; n < batch; ++n) {
                        const T* xn = src.data() + static_cast<std::size_t>(n) * in.volume();
                        T* yn = dst.data() + static_cast<std::size_t>(n) * out.volume();
                        int* an = argmax_[i].data() + static_cast<std::size_t>(n) * out.volume();
                        for (int c = 0; c < in.c; ++c) {
                            const T* plane = xn + static_cast<std::size_t>(c) * in.h * in.w;
                            for (int oy = 0; oy < out.h; ++oy) {
                                for (int ox = 0; ox < out.w; ++ox) {
                                    int best = (oy * s.stride) * in.w + ox * s.stride;
                                    T bv = plane[best];
                                    for (int ky = 0; ky < s.kernel; ++ky) {
                                        for (int kx = 0; kx < s.kernel; ++kx) {
                                            const int idx = (oy * s.stride + ky) * in.w + ox * s.stride + kx;
                                            if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
                                        }
                                    }
                                    const std::size_t o = (static_cast<std::size_t>(c) * out.h + oy) * out.w + ox;
                                    yn[o] = bv;
                                    an[o] = c * in.h * in.w + best;
                                }
                            }
                        }
                    }
                    break;
                }
                case LayerKind::FullyConnected: {
                    const std::int64_t d = in.volume();
                    for (int n = 0; n < batch; ++n) {
                        T* yn = dst.data() + static_cast<std::size_t>(n) * s.units;
                        for (int u = 0; u < s.units; ++u) yn[u] = biases_[i][u];
                    }
                    detail::gemm_abt(src.data(), weights_[i].data(), dst.data(),
                                     batch, static_cast<int>(d), s.units);
                    break;
                }
                case LayerKind::Relu: {
                    for (std::size_t j = 0; j < src.size(); ++j)
                        dst[j] = src[j] > T(0) ? src[j] : T(0);
                    break;
                }
                case LayerKind::Dropout: {
                    if (!training) {
                        dst = src;
                        break;
                    }
                    auto& mask = masks_[i];
                    if (!dropout_frozen_ || mask.size() != src.size()) {
                        if (rng == nullptr)
                            throw std::invalid_argument("Network::forward: dropout needs an rng in training mode");
                        mask.resize(src.size());
                        const T scale = static_cast<T>(1.0 / (1.0 - s.prob));
                        for (auto& m : mask) m = rng->uniform() < s.prob ? T(0) : scale;
                    }
                    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] * mask[j];
                    break;
                }
            }
        }
        return acts_.back();
    }

    /// Mean softmax cross-entropy over the last forward batch; fills all
    /// gradient buffers (overwriting them) and returns the loss.
    T loss_and_backward(const std::vector<int>& labels) {
        if (static_cast<int>(labels.size()) != batch_)
            throw std::invalid_argument("Network::loss_and_backward: label count mismatch");
        const int classes = num_classes();
        const std::vector<T>& logits = acts_.back();
        std::vector<T> dy(logits.size());
        T loss = 0;
        for (int n = 0; n < batch_; ++n) {
            if (labels[n] < 0 || labels[n] >= classes)
                throw std::invalid_argument("Network::loss_and_backward: label out of range");
            const T* row = logits.data() + static_cast<std::size_t>(n) * classes;
            T* drow = dy.data() + static_cast<std::size_t>(n) * classes;
            T mx = row[0];
            for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
            T z = 0;
            for (int c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
            const T logz = std::log(z);
            loss += -(row[labels[n]] - mx - logz);
            for (int c = 0; c < classes; ++c) {
                const T p = std::exp(row[c] - mx) / z;
                drow[c] = (p - (c == labels[n] ? T(1) : T(0))) / static_cast<T>(batch_);
            }
        }
        loss /= static_cast<T>(batch_);

        for (auto& g : weight_grads_) std::fill(g.begin(), g.end(), T(0));
        for (auto& g : bias_grads_) std::fill(g.begin(), g.end(), T(0));

        for (int i = static_cast<int>(specs_.size()) - 1; i >= 0; --i) {
            const auto& s = specs_[i];
            const Shape3& in = in_shapes_[i];
            const Shape3& out = out_shapes_[i];
            const std::vector<T>& src = acts_[i];
            std::vector<T> dx(src.size(), T(0));
            switch (s.kind) {
                case LayerKind::Conv: {
                    const int kk = in.c * s.kernel * s.kernel;
                    const int pos = out.h * out.w;
                    cols_.resize(static_cast<std::size_t>(kk) * pos);
                    dcols_.assign(static_cast<std::size_t>(kk) * pos, T(0));
                    for (int n = 0; n < batch_; ++n) {
                        const T* xn = src.data() + static_cast<std::size_t>(n) * in.volume();
                        const T* dyn = dy.data() + static_cast<std::size_t>(n) * out.volume();
                        T* dxn = dx.data() + static_cast<std::size_t>(n) * in.volume();
                        im2col(xn, in, s.kernel, s.stride, out, cols_.data());
                        detail::gemm_abt(dyn, cols_.data(), weight_grads_[i].data(), out.c, pos, kk);
                        for (int oc = 0; oc < out.c; ++oc) {
                            T acc = 0;
                            const T* row = dyn + static_cast<std::size_t>(oc) * pos;
                            for (int p = 0; p < pos; ++p) acc += row[p];
                            bias_grads_[i][oc] += acc;
                        }
                        std::fill(dcols_.begin(), dcols_.end(), T(0));
                        detail::gemm_atb(weights_[i].data(), dyn, dcols_.data(), kk, out.c, pos);
                        col2im_add(dcols_.data(), in, s.kernel, s.stride, out, dxn);
                    }
                    break;
                }
                case LayerKind::MaxPool: {
                    for (int n = 0; n < batch_; ++n) {
                        const T* dyn = dy.data() + static_cast<std::size_t>(n) * out.volume();
                        T* dxn = dx.data() + static_cast<std::size_t>(n) * in.volume();
                        const int* an = argmax_[i].data() + static_cast<std::size_t>(n) * out.volume();
                        for (std::int64_t o = 0; o < out.volume(); ++o) dxn[an[o]] += dyn[o];
                    }
                    break;
                }
                case LayerKind::FullyConnected: {
                    const int d = static_cast<int>(in.volume());
                    detail::gemm_atb(dy.data(), src.data(), weight_grads_[i].data(), s.units, batch_, d);
                    for (int n = 0; n < batch_; ++n)
                        for (int u = 0; u < s.units; ++u)
                            bias_grads_[i][u] += dy[static_cast<std::size_t>(n) * s.units + u];
                    detail::gemm_acc(dy.data(), weights_[i].data(), dx.data(), batch_, s.units, d);
                    break;
                }
                case LayerKind::Relu: {
                    const std::vector<T>& y = acts_[i + 1];
                    for (std::size_t j = 0; j < dx.size(); ++j)
                        dx[j] = y[j] > T(0) ? dy[j] : T(0);
                    break;
                }
                case LayerKind::Dropout: {
                    if (!training_) {
                        dx = dy;
                    } else {
                        const auto& mask = masks_[i];
                        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = dy[j] * mask[j];
                    }
                    break;
                }
            }
            dy = std::move(dx);
        }
        return loss;
    }

    /// v <- momentum*v - lr*(grad + weight_decay*param); param += v
    void sgd_step(double lr, double momentum, double weight_decay) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            apply_sgd(weights_[i], weight_grads_[i], weight_vel_[i], lr, momentum, weight_decay);
            apply_sgd(biases_[i], bias_grads_[i], bias_vel_[i], lr, momentum, weight_decay);
        }
    }

    /// Softmax over the logits of the last forward pass.
    std::vector<T> probabilities() const {
        const int classes = out_shapes_.back().c;
        const std::vector<T>& logits = acts_.back();
        std::vector<T> probs(logits.size());
        for (int n = 0; n < batch_; ++n) {
            const T* row = logits.data() + static_cast<std::size_t>(n) * classes;
            T* prow = probs.data() + static_cast<std::size_t>(n) * classes;
            T mx = row[0];
            for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
            T z = 0;
            for (int c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
            for (int c = 0; c < classes; ++c) prow[c] = std::exp(row[c] - mx) / z;
        }
        return probs;
    }

private:
    static void im2col(const T* x, const Shape3& in, int kernel, int stride,
                       const Shape3& out, T* cols) {
        std::size_t idx = 0;
        for (int c = 0; c < in.c; ++c) {
            const T* plane = x + static_cast<std::size_t>(c) * in.h * in.w;
            for (int ky = 0; ky < kernel; ++ky)
                for (int kx = 0; kx < kernel; ++kx)
                    for (int oy = 0; oy < out.h; ++oy)
                        for (int ox = 0; ox < out.w; ++ox)
                            cols[idx++] = plane[(oy * stride + ky) * in.w + ox * stride + kx];
        }
    }
    static void col2im_add(const T* cols, const Shape3& in, int kernel, int stride,
                           const Shape3& out, T* dx) {
        std::size_t idx = 0;
        for (int c = 0; c < in.c; ++c) {
            T* plane = dx + static_cast<std::size_t>(c) * in.h * in.w;
            for (int ky = 0; ky < kernel; ++ky)
                for (int kx = 0; kx < kernel; ++kx)
                    for (int oy = 0; oy < out.h; ++oy)
                        for (int ox = 0; ox < out.w; ++ox)
                            plane[(oy * stride + ky) * in.w + ox * stride + kx] += cols[idx++];
        }
    }
    static void apply_sgd(std::vector<T>& p, const std::vector<T>& g, std::vector<T>& v,
                          double lr, double momentum, double weight_decay) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = static_cast<T>(momentum) * v[j] -
                   static_cast<T>(lr) * (g[j] + static_cast<T>(weight_decay) * p[j]);
            p[j] += v[j];
        }
    }

    Shape3 input_;
    std::vector<LayerSpec> specs_;
    std::vector<Shape3> in_shapes_, out_shapes_;
    std::vector<std::vector<T>> weights_, biases_;
    std::vector<std::vector<T>> weight_grads_, bias_grads_;
    std::vector<std::vector<T>> weight_vel_, bias_vel_;
    std::vector<std::vector<T>> acts_;   // acts_[0] = input, acts_[i+1] = layer i output
    std::vector<std::vector<T>> masks_;  // dropout scale factors
    std::vector<std::vector<int>> argmax_;
    std::vector<T> cols_, dcols_;
    int batch_ = 0;
    bool training_ = false;
    bool dropout_frozen_ = false;
};

/// The glyph/region classifier topology: two valid 5x5 convolutions each
/// followed by 2x2 max pooling, dropout, a 500-unit hidden layer with ReLU,
/// and a linear output read through softmax.
template <typename T>
Network<T> make_symbolnet(int input_size, int num_classes) {
    return Network<T>({1, input_size, input_size},
                      {LayerSpec::conv(20, 5), LayerSpec::max_pool(2, 2),
                       LayerSpec::conv(50, 5), LayerSpec::max_pool(2, 2),
                       LayerSpec::dropout(0.5), LayerSpec::fully_connected(500),
                       LayerSpec::relu(), LayerSpec::fully_connected(num_classes)});
}

// ---------------------------------------------------------------------------
// Learning-rate schedules and the solver loop
// ---------------------------------------------------------------------------

enum class LrPolicy { Step, Inv };

inline std::string to_string(LrPolicy p) { return p == LrPolicy::Step ? "step" : "inv"; }
inline LrPolicy lr_policy_from_string(const std::string& s) {
    if (s == "step") return LrPolicy::Step;
    if (s == "inv") return LrPolicy::Inv;
    throw std::invalid_argument("unknown lr policy: " + s);
}

struct SolverConfig {
    double base_lr = 0.001;
    LrPolicy policy = LrPolicy::Inv;
    double gamma = 1e-4;       // step: decay factor; inv: slope
    double power = 0.75;       // inv only
    int step_size = 1000;      // step only
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int batch_size = 100;
    int max_iter = 10000;
    int val_interval = 100;
    double target_accuracy = 0.0;  // early stop when validation >= target; 0 disables
};

/// step: base_lr * gamma^floor(iter / step_size); inv: base_lr * (1 + gamma*iter)^(-power)
inline double lr_at(const SolverConfig& cfg, int iter) {
    if (iter < 0) throw std::invalid_argument("lr_at: negative iteration");
    switch (cfg.policy) {
        case LrPolicy::Step:
            return cfg.base_lr * std::pow(cfg.gamma, static_cast<double>(iter / cfg.step_size));
        case LrPolicy::Inv:
            return cfg.base_lr * std::pow(1.0 + cfg.gamma * iter, -cfg.power);
    }
    throw std::logic_error("unknown lr policy");
}

/// Glyph solver: inv decay, batch 100.
inline SolverConfig default_glyph_solver() {
    SolverConfig cfg;
    cfg.base_lr = 0.001;
    cfg.policy = LrPolicy::Inv;
    cfg.gamma = 1e-4;
    cfg.power = 0.75;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0005;
    cfg.batch_size = 100;
    cfg.max_iter = 10000;
    return cfg;
}

/// Region solver: step decay every 1000 iterations, batch 30.
inline SolverConfig default_region_solver() {
    SolverConfig cfg;
    cfg.base_lr = 0.001;
    cfg.policy = LrPolicy::Step;
    cfg.gamma = 0.1;
    cfg.step_size = 1000;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0002;
    cfg.batch_size = 30;
    cfg.max_iter = 10000;
    return cfg;
}

template <typename T>
struct BatchSet {
    Shape3 shape;
    std::vector<T> data;  // count * shape.volume(), NCHW
    std::vector<int> labels;

    int count() const { return static_cast<int>(labels.size()); }
    void add(const std::vector<T>& sample, int label) {
        if (static_cast<std::int64_t>(sample.size()) != shape.volume())
            throw std::invalid_argument("BatchSet::add: sample size mismatch");
        data.insert(data.end(), sample.begin(), sample.end());
        labels.push_back(label);
    }
};

/// Accuracy of the net on a set, evaluated in chunks of batch_size.
template <typename T>
double evaluate_accuracy(Network<T>& net, const BatchSet<T>& set, int batch_size) {
    if (set.count() == 0) throw std::invalid_argument("evaluate_accuracy: empty set");
    const std::int64_t vol = set.shape.volume();
    int correct = 0;
    std::vector<T> chunk;
    for (int start = 0; start < set.count(); start += batch_size) {
        const int n = std::min(batch_size, set.count() - start);
        chunk.assign(set.data.begin() + static_cast<std::size_t>(start) * vol,
                     set.data.begin() + static_cast<std::size_t>(start + n) * vol);
        const auto& logits = net.forward(chunk, n, /*training=*/false);
        const int classes = net.num_classes();
        for (int i = 0; i < n; ++i) {
            const T* row = logits.data() + static_cast<std::size_t>(i) * classes;
            int arg = 0;
            for (int c = 1; c < classes; ++c)
                if (row[c] > row[arg]) arg = c;
            if (arg == set.labels[static_cast<std::size_t>(start) + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / set.count();
}

struct TraceRow {
    int iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
    double val_accuracy = 0.0;
    bool has_val = false;
};

struct TrainResult {
    std::vector<TraceRow> trace;
    double best_val_accuracy = 0.0;
    int best_iteration = -1;
    int iterations_run = 0;
};

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << "iteration,loss,lr,val_accuracy\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,", r.iteration, r.loss, r.lr);
        out << buf;
        if (r.has_val) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.val_accuracy);
            out << buf;
        }
        out << "\n";
    }
}

/// Seeded SGD training with per-epoch shuffling. Validation runs every
/// val_interval iterations and at the end; the best-scoring parameters (ties
/// to the earliest iteration) are restored into the net before returning.
template <typename T>
TrainResult train(Network<T>& net, const BatchSet<T>& train_set, const BatchSet<T>& val_set,
                  const SolverConfig& cfg, Rng& rng) {
    if (train_set.count() < 1 || val_set.count() < 1)
        throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.max_iter < 1 || cfg.val_interval < 1)
        throw std::invalid_argument("train: bad solver config");
    const std::int64_t vol = train_set.shape.volume();

    std::vector<int> order(train_set.count());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t cursor = 0;

    std::vector<T> batch(static_cast<std::size_t>(cfg.batch_size) * vol);
    std::vector<int> labels(cfg.batch_size);

    TrainResult result;
    std::vector<std::vector<T>> best_params;
    auto snapshot = [&]() {
        best_params.clear();
        for (auto* p : net.param_buffers()) best_params.push_back(*p);
    };
    auto restore = [&]() {
        auto bufs = net.param_buffers();
        for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i] = best_params[i];
    };

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const int s = order[cursor++];
            std::copy_n(train_set.data.begin() + static_cast<std::size_t>(s) * vol, vol,
                        batch.begin() + static_cast<std::size_t>(i) * vol);
            labels[i] = train_set.labels[s];
        }
        net.forward(batch, cfg.batch_size, /*training=*/true, &rng);
        const double loss = static_cast<double>(net.loss_and_backward(labels));
        const double lr = lr_at(cfg, iter);
        net.sgd_step(lr, cfg.momentum, cfg.weight_decay);

        TraceRow row;
        row.iteration = iter;
        row.loss = loss;
        row.lr = lr;

        const bool last = iter + 1 == cfg.max_iter;
        if ((iter + 1) % cfg.val_interval == 0 || last) {
            const double acc = evaluate_accuracy(net, val_set, cfg.batch_size);
            row.val_accuracy = acc;
            row.has_val = true;
            if (result.best_iteration < 0 || acc > result.best_val_accuracy) {
                result.best_val_accuracy = acc;
                result.best_iteration = iter;
                snapshot();
            }
            if (cfg.target_accuracy > 0.0 && acc >= cfg.target_accuracy) {
                result.trace.push_back(row);
                result.iterations_run = iter + 1;
                restore();
                return result;
            }
        }
        result.trace.push_back(row);
    }
    result.iterations_run = cfg.max_iter;
    if (result.best_iteration >= 0) restore();
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
constexpr const char* scalar_name() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else if constexpr (std::is_same_v<T, double>) return "f64";
    else static_assert(sizeof(T) == 0, "unsupported scalar");
}

inline void append_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t read_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

template <typename T>
void append_scalar_le(std::string& out, T v) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    if constexpr (sizeof(T) == 4) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    } else {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

template <typename T>
T read_scalar_le(const unsigned char* p) {
    if constexpr (sizeof(T) == 4) {
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        T v;
        std::memcpy(&v, &bits, 4);
        return v;
    } else {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        T v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
}

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    switch (s.kind) {
        case LayerKind::Conv:
            j["out_channels"] = s.out_channels;
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            break;
        case LayerKind::MaxPool:
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            break;
        case LayerKind::FullyConnected:
            j["units"] = s.units;
            break;
        case LayerKind::Dropout:
            j["prob"] = s.prob;
            break;
        case LayerKind::Relu:
            break;
    }
    return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::Conv:
            return LayerSpec::conv(j.at("out_channels").get<int>(), j.at("kernel").get<int>(),
                                   j.at("stride").get<int>());
        case LayerKind::MaxPool:
            return LayerSpec::max_pool(j.at("kernel").get<int>(), j.at("stride").get<int>());
        case LayerKind::FullyConnected:
            return LayerSpec::fully_connected(j.at("units").get<int>());
        case LayerKind::Dropout:
            return LayerSpec::dropout(j.at("prob").get<double>());
        case LayerKind::Relu:
            return LayerSpec::relu();
    }
    throw std::logic_error("unknown layer kind");
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'N', 'E', 'T', '0', '0', '1'};

/// Versioned checkpoint: 8-byte magic, little-endian u32 header length, JSON
/// header (topology + caller metadata), then every parameter buffer in layer
/// order as little-endian IEEE-754 scalars.
template <typename T>
std::string serialize_checkpoint(Network<T>& net, const nlohmann::json& meta) {
    nlohmann::json header;
    header["version"] = 1;
    header["scalar"] = detail::scalar_name<T>();
    header["input"] = {{"c", net.input_shape().c}, {"h", net.input_shape().h}, {"w", net.input_shape().w}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& s : net.specs()) layers.push_back(detail::layer_spec_to_json(s));
    header["layers"] = layers;
    header["meta"] = meta;
    const std::string hs = header.dump();

    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::append_le(out, static_cast<std::uint32_t>(hs.size()));
    out += hs;
    for (auto* buf : net.param_buffers())
        for (T v : *buf) detail::append_scalar_le(out, v);
    return out;
}

template <typename T>
struct LoadedCheckpoint {
    Network<T> net;
    nlohmann::json meta;
};

template <typename T>
LoadedCheckpoint<T> deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) + 4 ||
        std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t hlen = detail::read_le32(p + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen))
        throw std::runtime_error("checkpoint: truncated header");
    const nlohmann::json header = nlohmann::json::parse(bytes.substr(12, hlen));
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported version");
    if (header.at("scalar").get<std::string>() != detail::scalar_name<T>())
        throw std::runtime_error("checkpoint: scalar type mismatch");

    Shape3 input{header.at("input").at("c").get<int>(), header.at("input").at("h").get<int>(),
                 header.at("input").at("w").get<int>()};
    std::vector<LayerSpec> specs;
    for (const auto& j : header.at("layers")) specs.push_back(detail::layer_spec_from_json(j));

    LoadedCheckpoint<T> loaded{Network<T>(input, std::move(specs)), header.value("meta", nlohmann::json::object())};
    std::size_t off = 12 + hlen;
    for (auto* buf : loaded.net.param_buffers()) {
        if (bytes.size() < off + buf->size() * sizeof(T))
            throw std::runtime_error("checkpoint: truncated parameters");
        for (auto& v : *buf) {
            v = detail::read_scalar_le<T>(p + off);
            off += sizeof(T);
        }
    }
    if (off != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes");
    return loaded;
}

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace glyphline
