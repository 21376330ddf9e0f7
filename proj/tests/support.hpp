#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "vdpu/random.hpp"
#include "vdpu/vdpu.hpp"

namespace vdpu::testing {

inline std::filesystem::path source_dir() { return VDPU_SOURCE_DIR; }

inline TensorF32 random_tensor(Rng& rng, TensorShape s, float lo = -1.0f, float hi = 1.0f) {
    TensorF32 t(s);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline std::vector<float> random_vec(Rng& rng, std::size_t n, float lo, float hi) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline ConvSpec random_conv(Rng& rng, int c_in, int c_out, int k, int s, int pad, bool bias = true) {
    ConvSpec c;
    c.k = k;
    c.s = s;
    c.pad = pad;
    c.c_in = c_in;
    c.c_out = c_out;
    const float a = std::sqrt(6.0f / static_cast<float>(c_in * k * k));
    c.weights = random_vec(rng, static_cast<std::size_t>(c.weight_count()), -a, a);
    if (bias) c.bias = random_vec(rng, static_cast<std::size_t>(c_out), -0.1f, 0.1f);
    return c;
}

inline BatchNormSpec random_bn(Rng& rng, int c) {
    const auto n = static_cast<std::size_t>(c);
    return {random_vec(rng, n, 0.5f, 1.5f), random_vec(rng, n, -0.2f, 0.2f), random_vec(rng, n, -0.2f, 0.2f),
            random_vec(rng, n, 0.3f, 1.5f), 1e-5f};
}

struct RandomModelLimits {
    int max_layers = 10;
    int max_channels = 16;
    int max_hw = 16;
    bool batchnorm = true;
};

/// Random valid chain: conv blocks (optionally with BN and relu), pools,
/// standalone relus, optionally a gap + dense head. Never more than
/// `max_layers` layers.
inline ModelGraph random_graph(Rng& rng, const RandomModelLimits& lim = {}) {
    TensorShape s{1, rng.uniform_int(1, std::min(4, lim.max_channels)), 0, 0};
    s.h = s.w = rng.uniform_int(3, lim.max_hw);
    if (rng.uniform() < 0.3) s.w = rng.uniform_int(3, lim.max_hw);
    const TensorShape input = s;
    const int target_layers = rng.uniform_int(1, lim.max_layers);
    std::vector<Layer> layers;
    int idx = 0;
    auto id = [&](const char* p) { return std::string(p) + std::to_string(idx++); };
    auto room = [&](int n) { return static_cast<int>(layers.size()) + n <= target_layers; };
    bool head = false;
    while (static_cast<int>(layers.size()) < target_layers && !head) {
        const double r = rng.uniform();
        if (r < 0.5 && room(1)) {
            int k = std::vector<int>{1, 3, 5}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
            while (k > std::min(s.h, s.w)) k -= 2;
            const int pad = rng.uniform_int(0, k / 2);
            const int stride = rng.uniform_int(1, 2);
            const int c_out = rng.uniform_int(1, lim.max_channels);
            const bool with_bn = lim.batchnorm && rng.uniform() < 0.4 && room(2);
            ConvSpec c = random_conv(rng, s.c, c_out, k, stride, pad, rng.uniform() < 0.7);
            layers.push_back({id("conv"), c});
            s = infer_shape(c, s).shape;
            if (with_bn) layers.push_back({id("bn"), random_bn(rng, c_out)});
            if (rng.uniform() < 0.6 && room(1)) layers.push_back({id("relu"), ReluSpec{}});
        } else if (r < 0.65 && std::min(s.h, s.w) >= 2 && room(1)) {
            const int k = rng.uniform_int(2, std::min(3, std::min(s.h, s.w)));
            const int st = rng.uniform_int(1, k);
            layers.push_back({id("pool"), MaxPoolSpec{k, st}});
            s = infer_shape(MaxPoolSpec{k, st}, s).shape;
        } else if (r < 0.75 && room(1)) {
            layers.push_back({id("relu"), ReluSpec{}});
        } else if (r < 0.85 && room(1)) {
            layers.push_back({id("gap"), GlobalAvgPoolSpec{}});
            s = {s.n, s.c, 1, 1};
        } else if (room(1)) {
            DenseSpec d;
            d.in = static_cast<int>(s.per_image());
            d.out = rng.uniform_int(1, lim.max_channels);
            const float a = std::sqrt(6.0f / static_cast<float>(d.in));
            d.weights = random_vec(rng, static_cast<std::size_t>(d.in) * d.out, -a, a);
            if (rng.uniform() < 0.7) d.bias = random_vec(rng, static_cast<std::size_t>(d.out), -0.1f, 0.1f);
            layers.push_back({id("fc"), d});
            s = {s.n, d.out, 1, 1};
            head = true;
        }
    }
    if (layers.empty()) layers.push_back({id("relu"), ReluSpec{}});
    return ModelGraph::create("random", input, std::move(layers));
}

inline CalibrationSet random_calibration(Rng& rng, TensorShape s, int count) {
    CalibrationSet cal;
    for (int i = 0; i < count; ++i) cal.images.push_back(random_tensor(rng, s));
    cal.dataset_id = "random";
    return cal;
}

inline QuantizedModel quantize_random(const ModelGraph& g, Rng& rng, int cal_images = 4) {
    return quantize_graph(g, random_calibration(rng, g.input_shape(), cal_images), 2);
}

/// Direct 7-loop convolution over an explicitly zero-padded copy of the input.
inline TensorF32 naive_conv(const TensorF32& x, const ConvSpec& c) {
    const auto s = x.shape();
    const int hp = s.h + 2 * c.pad, wp = s.w + 2 * c.pad;
    std::vector<float> padded(static_cast<std::size_t>(s.n) * s.c * hp * wp, 0.0f);
    for (int n = 0; n < s.n; ++n)
        for (int ch = 0; ch < s.c; ++ch)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w)
                    padded[((static_cast<std::size_t>(n) * s.c + ch) * hp + h + c.pad) * wp + w + c.pad] =
                        x.data()[((static_cast<std::size_t>(n) * s.c + ch) * s.h + h) * s.w + w];
    const int ho = (hp - c.k) / c.s + 1, wo = (wp - c.k) / c.s + 1;
    TensorF32 y({s.n, c.c_out, ho, wo});
    auto out = y.data();
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n)
        for (int co = 0; co < c.c_out; ++co)
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) {
                    float acc = 0.0f;
                    for (int ci = 0; ci < s.c; ++ci)
                        for (int kh = 0; kh < c.k; ++kh)
                            for (int kw = 0; kw < c.k; ++kw) {
                                const int ih = oh * c.s + kh, iw = ow * c.s + kw;
                                const bool real = ih >= c.pad && ih < s.h + c.pad && iw >= c.pad && iw < s.w + c.pad;
                                if (!real) continue;
                                acc += padded[((static_cast<std::size_t>(n) * s.c + ci) * hp + ih) * wp + iw] *
                                       c.weights[((static_cast<std::size_t>(co) * s.c + ci) * c.k + kh) * c.k + kw];
                            }
                    if (!c.bias.empty()) acc += c.bias[static_cast<std::size_t>(co)];
                    if (c.fused_relu && acc < 0.0f) acc = 0.0f;
                    out[o++] = acc;
                }
    return y;
}

/// Multiply-accumulates counted by walking the full 7-loop nest.
inline std::int64_t naive_conv_macs(const ConvSpec& c, TensorShape s) {
    const int ho = (s.h + 2 * c.pad - c.k) / c.s + 1, wo = (s.w + 2 * c.pad - c.k) / c.s + 1;
    std::int64_t macs = 0;
    for (int n = 0; n < s.n; ++n)
        for (int co = 0; co < c.c_out; ++co)
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow)
                    for (int ci = 0; ci < c.c_in; ++ci)
                        for (int kh = 0; kh < c.k; ++kh)
                            for (int kw = 0; kw < c.k; ++kw) ++macs;
    return macs;
}

inline double max_rel_error(std::span<const float> a, std::span<const float> b) {
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        scale = std::max(scale, std::abs(static_cast<double>(b[i])));
        err = std::max(err, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return scale == 0.0 ? err : err / scale;
}

}  // namespace vdpu::testing
