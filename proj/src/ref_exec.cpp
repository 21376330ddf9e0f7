#include "vdpu/ref_exec.hpp"

#include <algorithm>
#include <cmath>

#include "vdpu/error.hpp"

namespace vdpu {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

TensorShape checked_shape(const LayerSpec& spec, const TensorShape& in) {
    auto r = infer_shape(spec, in);
    if (!r.ok()) throw ValidationError(r.error);
    return r.shape;
}

template <typename T>
int argmax_impl(std::span<const T> values) {
    if (values.empty()) throw ValidationError("argmax of an empty vector");
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

}  // namespace

TensorF32 conv2d_fp32(const TensorF32& input, const ConvSpec& spec) {
    const TensorShape in = input.shape();
    const TensorShape out_shape = checked_shape(spec, in);
    TensorF32 out(out_shape);
    const int k = spec.k;
    for (int n = 0; n < out_shape.n; ++n)
        for (int co = 0; co < out_shape.c; ++co)
            for (int oh = 0; oh < out_shape.h; ++oh)
                for (int ow = 0; ow < out_shape.w; ++ow) {
                    float acc = 0.0f;
                    for (int ci = 0; ci < in.c; ++ci) {
                        const float* wk = &spec.weights[((static_cast<std::size_t>(co) * in.c + ci) * k) * k];
                        for (int kh = 0; kh < k; ++kh) {
                            const int ih = oh * spec.s - spec.pad + kh;
                            if (ih < 0 || ih >= in.h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = ow * spec.s - spec.pad + kw;
                                if (iw < 0 || iw >= in.w) continue;
                                acc += input.at(n, ci, ih, iw) * wk[kh * k + kw];
                            }
                        }
                    }
                    if (!spec.bias.empty()) acc += spec.bias[static_cast<std::size_t>(co)];
                    if (spec.fused_relu) acc = std::max(acc, 0.0f);
                    out.at(n, co, oh, ow) = acc;
                }
    return out;
}

TensorF32 batchnorm_fp32(const TensorF32& input, const BatchNormSpec& bn) {
    const TensorShape s = input.shape();
    if (!(bn.eps >= 0.0f)) throw ValidationError("batchnorm eps must be >= 0");
    const auto c = static_cast<std::size_t>(s.c);
    if (bn.gamma.size() != c || bn.beta.size() != c || bn.mean.size() != c || bn.var.size() != c)
        throw ValidationError("batchnorm parameter length does not match " + std::to_string(s.c) + " channels");
    TensorF32 out(s);
    for (int n = 0; n < s.n; ++n)
        for (int ch = 0; ch < s.c; ++ch) {
            const auto i = static_cast<std::size_t>(ch);
            if (bn.var[i] < 0.0f) throw ValidationError("batchnorm variance must be >= 0");
            if (!(bn.var[i] + bn.eps > 0.0f)) throw ValidationError("batchnorm variance + eps must be > 0");
            const float denom = std::sqrt(bn.var[i] + bn.eps);
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w)
                    out.at(n, ch, h, w) = bn.gamma[i] * (input.at(n, ch, h, w) - bn.mean[i]) / denom + bn.beta[i];
        }
    return out;
}

TensorF32 relu_fp32(const TensorF32& input) {
    TensorF32 out = input;
    for (auto& v : out.data()) v = std::max(v, 0.0f);
    return out;
}

TensorF32 maxpool_fp32(const TensorF32& input, const MaxPoolSpec& spec) {
    const TensorShape in = input.shape();
    const TensorShape os = checked_shape(spec, in);
    TensorF32 out(os);
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int oh = 0; oh < os.h; ++oh)
                for (int ow = 0; ow < os.w; ++ow) {
                    float best = input.at(n, c, oh * spec.s, ow * spec.s);
                    for (int kh = 0; kh < spec.k; ++kh)
                        for (int kw = 0; kw < spec.k; ++kw)
                            best = std::max(best, input.at(n, c, oh * spec.s + kh, ow * spec.s + kw));
                    out.at(n, c, oh, ow) = best;
                }
    return out;
}

TensorF32 globalavgpool_fp32(const TensorF32& input) {
    const TensorShape in = input.shape();
    TensorF32 out({in.n, in.c, 1, 1});
    const float count = static_cast<float>(in.h) * static_cast<float>(in.w);
    for (int n = 0; n < in.n; ++n)
        for (int c = 0; c < in.c; ++c) {
            float sum = 0.0f;
            for (int h = 0; h < in.h; ++h)
                for (int w = 0; w < in.w; ++w) sum += input.at(n, c, h, w);
            out.at(n, c, 0, 0) = sum / count;
        }
    return out;
}

TensorF32 dense_fp32(const TensorF32& input, const DenseSpec& spec) {
    const TensorShape in = input.shape();
    const TensorShape os = checked_shape(spec, in);
    TensorF32 out(os);
    const auto per = static_cast<std::size_t>(in.per_image());
    for (int n = 0; n < in.n; ++n) {
        const float* x = input.data().data() + static_cast<std::size_t>(n) * per;
        for (int o = 0; o < spec.out; ++o) {
            const float* w = &spec.weights[static_cast<std::size_t>(o) * per];
            float acc = 0.0f;
            for (std::size_t i = 0; i < per; ++i) acc += x[i] * w[i];
            if (!spec.bias.empty()) acc += spec.bias[static_cast<std::size_t>(o)];
            out.at(n, o, 0, 0) = acc;
        }
    }
    return out;
}

TensorF32 softmax_fp32(const TensorF32& input) {
    TensorF32 out = input;
    const auto per = static_cast<std::size_t>(input.shape().per_image());
    for (int n = 0; n < input.shape().n; ++n) {
        float* x = out.data().data() + static_cast<std::size_t>(n) * per;
        const float mx = *std::max_element(x, x + per);
        float sum = 0.0f;
        for (std::size_t i = 0; i < per; ++i) {
            x[i] = std::exp(x[i] - mx);
            sum += x[i];
        }
        for (std::size_t i = 0; i < per; ++i) x[i] /= sum;
    }
    return out;
}

TensorF32 apply_layer(const LayerSpec& spec, const TensorF32& input) {
    return std::visit(overloaded{
                          [&](const ConvSpec& c) { return conv2d_fp32(input, c); },
                          [&](const BatchNormSpec& b) { return batchnorm_fp32(input, b); },
                          [&](const ReluSpec&) { return relu_fp32(input); },
                          [&](const MaxPoolSpec& p) { return maxpool_fp32(input, p); },
                          [&](const GlobalAvgPoolSpec&) { return globalavgpool_fp32(input); },
                          [&](const DenseSpec& d) { return dense_fp32(input, d); },
                          [&](const SoftmaxSpec&) { return softmax_fp32(input); },
                      },
                      spec);
}

TensorF32 forward(const ModelGraph& graph, const TensorF32& input, ExecutionTrace* trace) {
    if (input.shape() != graph.input_shape())
        throw ValidationError("input shape " + to_string(input.shape()) + " does not match graph input " +
                              to_string(graph.input_shape()));
    TensorF32 cur = input;
    for (const auto& layer : graph.layers()) {
        cur = apply_layer(layer.spec, cur);
        if (trace) trace->outputs.push_back(cur);
    }
    return cur;
}

int argmax(std::span<const float> values) { return argmax_impl(values); }
int argmax(std::span<const std::int8_t> values) { return argmax_impl(values); }

int predict(const ModelGraph& graph, const TensorF32& image) {
    const TensorF32 out = forward(graph, image);
    if (out.shape().n != 1 || out.shape().per_image() != 10)
        throw ValidationError("predict needs a length-10 output vector, got " + to_string(out.shape()));
    return argmax(out.data());
}

}  // namespace vdpu
