#include "vdpu/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "vdpu/error.hpp"
#include "vdpu/fixed_point.hpp"
#include "vdpu/passes.hpp"
#include "vdpu/ref_exec.hpp"

namespace vdpu {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double max_abs_of(std::span<const float> v) {
    double m = 0.0;
    for (float x : v) m = std::max(m, static_cast<double>(std::fabs(x)));
    return m;
}

std::string input_tensor_name(const ModelGraph& g, std::size_t i) {
    return i == 0 ? std::string("input") : g.layers()[i - 1].id;
}

bool passes_through(LayerKind k) { return k == LayerKind::relu || k == LayerKind::maxpool; }

std::vector<std::int32_t> quantize_bias(const std::vector<float>& bias, std::size_t count, int bits,
                                        const std::string& id) {
    std::vector<std::int32_t> out(count, 0);
    for (std::size_t i = 0; i < bias.size(); ++i) {
        const double v = fixed::round_half_even(std::ldexp(static_cast<double>(bias[i]), bits));
        if (v < static_cast<double>(fixed::kInt32Min) || v > static_cast<double>(fixed::kInt32Max))
            throw OverflowError("bias of layer '" + id + "' does not fit INT32 at scale 2^-" + std::to_string(bits));
        out[i] = static_cast<std::int32_t>(v);
    }
    return out;
}

std::int8_t requant(std::int64_t acc, int shift, bool relu, ClipStats* stats) {
    std::int64_t v = fixed::shift_round(acc, shift);
    if (relu) v = std::max<std::int64_t>(v, 0);
    bool clipped = false;
    const auto q = fixed::saturate_int8(v, clipped);
    if (stats) {
        stats->total += 1;
        stats->clipped += clipped ? 1 : 0;
    }
    return q;
}

}  // namespace

int fraction_bits_for(double max_abs) {
    if (!(max_abs > 0.0)) return 7;
    int f = static_cast<int>(std::floor(std::log2(127.0 / max_abs)));
    // log2 can be off by one ulp near powers of two; settle on the exact bound.
    while (std::ldexp(max_abs, f + 1) <= 127.0) ++f;
    while (std::ldexp(max_abs, f) > 127.0) --f;
    return f;
}

std::int8_t quantize_value(float x, int fraction_bits, bool* clipped) {
    const double scaled = fixed::round_half_even(std::ldexp(static_cast<double>(x), fraction_bits));
    bool c = false;
    std::int8_t q;
    if (scaled < -128.0) {
        q = -128;
        c = true;
    } else if (scaled > 127.0) {
        q = 127;
        c = true;
    } else {
        q = static_cast<std::int8_t>(scaled);
    }
    if (clipped) *clipped = c;
    return q;
}

TensorI8 quantize_tensor(const TensorF32& x, QuantParams p, ClipStats* stats) {
    TensorI8 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        bool c = false;
        out[i] = quantize_value(x[i], p.fraction_bits, &c);
        if (stats) {
            stats->total += 1;
            stats->clipped += c ? 1 : 0;
        }
    }
    return out;
}

TensorF32 dequantize_tensor(const TensorI8& q, QuantParams p) {
    TensorF32 out(q.shape());
    for (std::size_t i = 0; i < q.size(); ++i)
        out[i] = static_cast<float>(std::ldexp(static_cast<double>(q[i]), -p.fraction_bits));
    return out;
}

Calibration calibrate(const ModelGraph& graph, const CalibrationSet& cal, std::size_t batch, unsigned threads) {
    if (cal.images.empty()) throw ValidationError("calibration set is empty");
    if (batch == 0) throw ValidationError("calibration batch size must be positive");
    if (has_batchnorm(graph)) throw ValidationError("calibrate expects a batchnorm-free graph; fold first");
    for (const auto& img : cal.images)
        if (img.shape() != graph.input_shape())
            throw ValidationError("calibration image shape " + to_string(img.shape()) + " does not match model input " +
                                  to_string(graph.input_shape()));

    const std::size_t n_layers = graph.size();
    const std::size_t n_batches = (cal.images.size() + batch - 1) / batch;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_batches)));

    // slot 0 is the input tensor, slot i + 1 the output of layer i
    auto run = [&](unsigned worker, std::vector<double>& maxes) {
        maxes.assign(n_layers + 1, 0.0);
        for (std::size_t b = worker; b < n_batches; b += threads) {
            std::vector<double> batch_max(n_layers + 1, 0.0);
            const std::size_t end = std::min(cal.images.size(), (b + 1) * batch);
            for (std::size_t i = b * batch; i < end; ++i) {
                ExecutionTrace trace;
                forward(graph, cal.images[i], &trace);
                batch_max[0] = std::max(batch_max[0], max_abs_of(cal.images[i].data()));
                for (std::size_t l = 0; l < n_layers; ++l)
                    batch_max[l + 1] = std::max(batch_max[l + 1], max_abs_of(trace.outputs[l].data()));
            }
            for (std::size_t s = 0; s <= n_layers; ++s) maxes[s] = std::max(maxes[s], batch_max[s]);
        }
    };

    std::vector<std::vector<double>> partial(threads);
    if (threads == 1) {
        run(0, partial[0]);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, t, std::ref(partial[t]));
        for (auto& th : pool) th.join();
    }
    std::vector<double> maxes(n_layers + 1, 0.0);
    for (const auto& p : partial)
        for (std::size_t s = 0; s <= n_layers; ++s) maxes[s] = std::max(maxes[s], p[s]);

    Calibration c;
    c.dataset_id = cal.dataset_id;
    c.image_count = cal.images.size();
    c.batch = batch;
    c.max_abs["input"] = maxes[0];
    c.params["input"] = {fraction_bits_for(maxes[0])};
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = graph.layers()[l];
        c.max_abs[layer.id] = maxes[l + 1];
        c.params[layer.id] = passes_through(layer.kind()) ? c.params.at(input_tensor_name(graph, l))
                                                         : QuantParams{fraction_bits_for(maxes[l + 1])};
        const std::vector<float>* weights = nullptr;
        if (const auto* conv = std::get_if<ConvSpec>(&layer.spec)) weights = &conv->weights;
        if (const auto* dense = std::get_if<DenseSpec>(&layer.spec)) weights = &dense->weights;
        if (weights) {
            const double m = max_abs_of(*weights);
            c.max_abs[layer.id + ".weight"] = m;
            c.params[layer.id + ".weight"] = {fraction_bits_for(m)};
        }
    }
    return c;
}

LayerKind kind_of(const QLayerSpec& spec) noexcept {
    return std::visit(overloaded{
                          [](const QConv&) { return LayerKind::conv2d; },
                          [](const QDense&) { return LayerKind::dense; },
                          [](const QRelu&) { return LayerKind::relu; },
                          [](const QMaxPool&) { return LayerKind::maxpool; },
                          [](const QGlobalAvgPool&) { return LayerKind::globalavgpool; },
                          [](const QSoftmax&) { return LayerKind::softmax; },
                      },
                      spec);
}

std::size_t QuantizedModel::host_tail_begin() const {
    std::size_t i = layers.size();
    while (i > 0 && layers[i - 1].kind() == LayerKind::softmax) --i;
    return i;
}

QuantizedModel quantize_model(const ModelGraph& graph, const Calibration& calibration) {
    std::vector<std::string> diags;
    auto param = [&](const std::string& name) -> QuantParams {
        auto it = calibration.params.find(name);
        if (it == calibration.params.end()) {
            diags.push_back("missing QuantParams for tensor '" + name + "'");
            return {};
        }
        return it->second;
    };

    QuantizedModel m;
    m.name = graph.name();
    m.input_shape = graph.input_shape();
    m.input = param("input");
    m.calibration_dataset = calibration.dataset_id;
    m.calibration_images = calibration.image_count;
    m.calibration_batch = calibration.batch;

    for (std::size_t i = 0; i < graph.size(); ++i) {
        const auto& layer = graph.layers()[i];
        const QuantParams in = i == 0 ? m.input : m.layers.back().out;
        QLayer q{layer.id, QRelu{}, {}, graph.output_shape(i)};
        std::visit(overloaded{
                       [&](const ConvSpec& c) {
                           QConv qc{c.k, c.s, c.pad, c.c_in, c.c_out, {}, {}, 0, 0, c.fused_relu};
                           const QuantParams w = param(layer.id + ".weight");
                           q.out = param(layer.id);
                           qc.weight_bits = w.fraction_bits;
                           qc.weights.reserve(c.weights.size());
                           for (float x : c.weights) qc.weights.push_back(quantize_value(x, w.fraction_bits));
                           qc.bias = quantize_bias(c.bias, static_cast<std::size_t>(c.c_out),
                                                   in.fraction_bits + w.fraction_bits, layer.id);
                           qc.shift = in.fraction_bits + w.fraction_bits - q.out.fraction_bits;
                           q.spec = std::move(qc);
                       },
                       [&](const DenseSpec& d) {
                           QDense qd{d.in, d.out, {}, {}, 0, 0};
                           const QuantParams w = param(layer.id + ".weight");
                           q.out = param(layer.id);
                           qd.weight_bits = w.fraction_bits;
                           qd.weights.reserve(d.weights.size());
                           for (float x : d.weights) qd.weights.push_back(quantize_value(x, w.fraction_bits));
                           qd.bias = quantize_bias(d.bias, static_cast<std::size_t>(d.out),
                                                   in.fraction_bits + w.fraction_bits, layer.id);
                           qd.shift = in.fraction_bits + w.fraction_bits - q.out.fraction_bits;
                           q.spec = std::move(qd);
                       },
                       [&](const BatchNormSpec&) {
                           diags.push_back("unfolded batchnorm '" + layer.id + "'; run fold_batchnorm first");
                       },
                       [&](const ReluSpec&) {
                           q.spec = QRelu{};
                           q.out = in;
                       },
                       [&](const MaxPoolSpec& p) {
                           q.spec = QMaxPool{p.k, p.s};
                           q.out = in;
                       },
                       [&](const GlobalAvgPoolSpec&) {
                           q.spec = QGlobalAvgPool{};
                           q.out = param(layer.id);
                       },
                       [&](const SoftmaxSpec&) {
                           q.spec = QSoftmax{};
                           q.out = param(layer.id);
                       },
                   },
                   layer.spec);
        m.layers.push_back(std::move(q));
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return m;
}

QuantizedModel quantize_graph(const ModelGraph& graph, const CalibrationSet& cal, std::size_t batch,
                              unsigned threads) {
    const ModelGraph folded = fold_batchnorm(graph);
    return quantize_model(folded, calibrate(folded, cal, batch, threads));
}

QuantizedModel fuse_relu(const QuantizedModel& model) {
    QuantizedModel out = model;
    out.layers.clear();
    for (const auto& layer : model.layers) {
        if (layer.kind() == LayerKind::relu && !out.layers.empty()) {
            auto& prev = out.layers.back();
            if (auto* conv = std::get_if<QConv>(&prev.spec); conv && !conv->fused_relu) {
                conv->fused_relu = true;
                continue;
            }
        }
        out.layers.push_back(layer);
    }
    return out;
}

TensorI8 execute_qlayer(const QLayer& layer, QuantParams in_params, const TensorI8& input, ClipStats* stats) {
    const TensorShape in = input.shape();
    return std::visit(
        overloaded{
            [&](const QConv& c) {
                const TensorShape os{in.n, c.c_out, (in.h + 2 * c.pad - c.k) / c.s + 1,
                                     (in.w + 2 * c.pad - c.k) / c.s + 1};
                if (in.c != c.c_in || os.h < 1 || os.w < 1)
                    throw ValidationError("layer '" + layer.id + "' cannot consume input " + to_string(in));
                TensorI8 out(os);
                for (int n = 0; n < os.n; ++n)
                    for (int co = 0; co < os.c; ++co)
                        for (int oh = 0; oh < os.h; ++oh)
                            for (int ow = 0; ow < os.w; ++ow) {
                                std::int64_t acc = c.bias[static_cast<std::size_t>(co)];
                                for (int ci = 0; ci < in.c; ++ci)
                                    for (int kh = 0; kh < c.k; ++kh) {
                                        const int ih = oh * c.s - c.pad + kh;
                                        if (ih < 0 || ih >= in.h) continue;
                                        for (int kw = 0; kw < c.k; ++kw) {
                                            const int iw = ow * c.s - c.pad + kw;
                                            if (iw < 0 || iw >= in.w) continue;
                                            const auto w = c.weights[((static_cast<std::size_t>(co) * c.c_in + ci) * c.k + kh) * c.k + kw];
                                            acc = fixed::accumulate(acc, std::int64_t{input.at(n, ci, ih, iw)} * w);
                                        }
                                    }
                                out.at(n, co, oh, ow) = requant(acc, c.shift, c.fused_relu, stats);
                            }
                return out;
            },
            [&](const QDense& d) {
                if (in.per_image() != d.in)
                    throw ValidationError("layer '" + layer.id + "' cannot consume input " + to_string(in));
                TensorI8 out({in.n, d.out, 1, 1});
                const auto per = static_cast<std::size_t>(d.in);
                for (int n = 0; n < in.n; ++n)
                    for (int o = 0; o < d.out; ++o) {
                        std::int64_t acc = d.bias[static_cast<std::size_t>(o)];
                        for (std::size_t i = 0; i < per; ++i)
                            acc = fixed::accumulate(acc, std::int64_t{input[n * per + i]} * d.weights[o * per + i]);
                        out.at(n, o, 0, 0) = requant(acc, d.shift, false, stats);
                    }
                return out;
            },
            [&](const QRelu&) {
                TensorI8 out = input;
                for (auto& v : out.data()) v = std::max<std::int8_t>(v, 0);
                return out;
            },
            [&](const QMaxPool& p) {
                if (p.k > in.h || p.k > in.w)
                    throw ValidationError("pool window of layer '" + layer.id + "' exceeds input " + to_string(in));
                TensorI8 out({in.n, in.c, (in.h - p.k) / p.s + 1, (in.w - p.k) / p.s + 1});
                const auto& os = out.shape();
                for (int n = 0; n < os.n; ++n)
                    for (int c = 0; c < os.c; ++c)
                        for (int oh = 0; oh < os.h; ++oh)
                            for (int ow = 0; ow < os.w; ++ow) {
                                std::int8_t best = -128;
                                for (int kh = 0; kh < p.k; ++kh)
                                    for (int kw = 0; kw < p.k; ++kw)
                                        best = std::max(best, input.at(n, c, oh * p.s + kh, ow * p.s + kw));
                                out.at(n, c, oh, ow) = best;
                            }
                return out;
            },
            [&](const QGlobalAvgPool&) {
                TensorI8 out({in.n, in.c, 1, 1});
                const int diff = layer.out.fraction_bits - in_params.fraction_bits;
                const std::int64_t count = static_cast<std::int64_t>(in.h) * in.w;
                for (int n = 0; n < in.n; ++n)
                    for (int c = 0; c < in.c; ++c) {
                        std::int64_t sum = 0;
                        for (int h = 0; h < in.h; ++h)
                            for (int w = 0; w < in.w; ++w) sum = fixed::accumulate(sum, input.at(n, c, h, w));
                        // round(sum * 2^diff / count); the shifted operand is exact in int64
                        const std::int64_t num = diff >= 0 ? fixed::shift_round(sum, -std::min(diff, 31)) : sum;
                        const std::int64_t den = diff >= 0 ? count : count << std::min(-diff, 30);
                        bool clipped = false;
                        out.at(n, c, 0, 0) = fixed::saturate_int8(fixed::round_div(num, den), clipped);
                        if (stats) {
                            stats->total += 1;
                            stats->clipped += clipped ? 1 : 0;
                        }
                    }
                return out;
            },
            [&](const QSoftmax&) {
                const TensorF32 probs = softmax_fp32(dequantize_tensor(input, in_params));
                return quantize_tensor(probs, layer.out, stats);
            },
        },
        layer.spec);
}

QForwardResult qforward(const QuantizedModel& model, const TensorF32& image) {
    if (image.shape() != model.input_shape)
        throw ValidationError("image shape " + to_string(image.shape()) + " does not match model input " +
                              to_string(model.input_shape));
    QForwardResult r;
    TensorI8 cur = quantize_tensor(image, model.input, &r.clips);
    const std::size_t end = model.host_tail_begin();
    for (std::size_t i = 0; i < end; ++i) cur = execute_qlayer(model.layers[i], model.input_params_of(i), cur, &r.clips);
    r.class_index = argmax(cur.data());
    r.output = std::move(cur);
    return r;
}

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw ValidationError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                              std::to_string(labels.size()) + " labels");
    if (labels.empty()) throw ValidationError("accuracy: empty image set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 9) throw ValidationError("label out of range [0, 9]");
        correct += predictions[i] == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy_eval(const ModelGraph& graph, std::span<const TensorF32> images, std::span<const int> labels) {
    if (images.size() != labels.size()) throw ValidationError("accuracy: images and labels differ in length");
    std::vector<int> pred;
    pred.reserve(images.size());
    for (const auto& img : images) pred.push_back(predict(graph, img));
    return top1_accuracy(pred, labels);
}

double accuracy_eval(const QuantizedModel& model, std::span<const TensorF32> images, std::span<const int> labels) {
    if (images.size() != labels.size()) throw ValidationError("accuracy: images and labels differ in length");
    std::vector<int> pred;
    pred.reserve(images.size());
    for (const auto& img : images) pred.push_back(qforward(model, img).class_index);
    return top1_accuracy(pred, labels);
}

json qmodel_manifest(const QuantizedModel& model, BlobWriter& blob) {
    json layers = json::array();
    for (const auto& layer : model.layers) {
        const auto& s = layer.out_shape;
        json l{{"id", layer.id},
               {"kind", to_string(layer.kind())},
               {"out_f", layer.out.fraction_bits},
               {"out_shape", {s.n, s.c, s.h, s.w}}};
        std::visit(overloaded{
                       [&](const QConv& c) {
                           l.update({{"k", c.k}, {"s", c.s}, {"pad", c.pad}, {"c_in", c.c_in}, {"c_out", c.c_out},
                                     {"weight_f", c.weight_bits}, {"shift", c.shift}, {"fused_relu", c.fused_relu}});
                           l["params"] = {{"weight", blob.add<std::int8_t>(c.weights, {c.c_out, c.c_in, c.k, c.k})},
                                          {"bias", blob.add<std::int32_t>(c.bias, {c.c_out})}};
                       },
                       [&](const QDense& d) {
                           l.update({{"in", d.in}, {"out", d.out}, {"weight_f", d.weight_bits}, {"shift", d.shift}});
                           l["params"] = {{"weight", blob.add<std::int8_t>(d.weights, {d.out, d.in})},
                                          {"bias", blob.add<std::int32_t>(d.bias, {d.out})}};
                       },
                       [&](const QMaxPool& p) { l.update({{"k", p.k}, {"s", p.s}}); },
                       [](const auto&) {},
                   },
                   layer.spec);
        layers.push_back(std::move(l));
    }
    const auto& s = model.input_shape;
    return {{"name", model.name},
            {"input_shape", {s.n, s.c, s.h, s.w}},
            {"input_f", model.input.fraction_bits},
            {"batch_size", model.batch_size},
            {"calibration",
             {{"dataset", model.calibration_dataset},
              {"images", model.calibration_images},
              {"batch", model.calibration_batch}}},
            {"layers", std::move(layers)}};
}

QuantizedModel qmodel_from_manifest(const json& m, const BlobReader& blob) {
    QuantizedModel model;
    try {
        model.name = m.at("name").get<std::string>();
        const auto dims = m.at("input_shape").get<std::vector<int>>();
        if (dims.size() != 4) throw ValidationError("input_shape must have 4 dimensions");
        model.input_shape = {dims[0], dims[1], dims[2], dims[3]};
        model.input = {m.at("input_f").get<int>()};
        model.batch_size = m.at("batch_size").get<int>();
        if (model.batch_size != 1)
            throw ValidationError("quantized model batch_size must be 1, found " + std::to_string(model.batch_size));
        const auto& cal = m.at("calibration");
        model.calibration_dataset = cal.value("dataset", std::string{});
        model.calibration_images = cal.value("images", std::size_t{0});
        model.calibration_batch = cal.value("batch", std::size_t{1});
        for (const auto& l : m.at("layers")) {
            QLayer q;
            q.id = l.at("id").get<std::string>();
            q.out = {l.at("out_f").get<int>()};
            const auto os = l.at("out_shape").get<std::vector<int>>();
            if (os.size() != 4) throw ValidationError("out_shape must have 4 dimensions");
            q.out_shape = {os[0], os[1], os[2], os[3]};
            switch (layer_kind_from_string(l.at("kind").get<std::string>())) {
                case LayerKind::conv2d: {
                    QConv c{l.at("k").get<int>(), l.at("s").get<int>(), l.at("pad").get<int>(),
                            l.at("c_in").get<int>(), l.at("c_out").get<int>(), {}, {},
                            l.at("weight_f").get<int>(), l.at("shift").get<int>(), l.value("fused_relu", false)};
                    c.weights = blob.read<std::int8_t>(l.at("params").at("weight"));
                    c.bias = blob.read<std::int32_t>(l.at("params").at("bias"));
                    if (static_cast<std::int64_t>(c.weights.size()) != static_cast<std::int64_t>(c.c_out) * c.c_in * c.k * c.k ||
                        static_cast<int>(c.bias.size()) != c.c_out)
                        throw ValidationError("layer '" + q.id + "': payload size mismatch");
                    q.spec = std::move(c);
                    break;
                }
                case LayerKind::dense: {
                    QDense d{l.at("in").get<int>(), l.at("out").get<int>(), {}, {}, l.at("weight_f").get<int>(),
                             l.at("shift").get<int>()};
                    d.weights = blob.read<std::int8_t>(l.at("params").at("weight"));
                    d.bias = blob.read<std::int32_t>(l.at("params").at("bias"));
                    if (d.weights.size() != static_cast<std::size_t>(d.in) * static_cast<std::size_t>(d.out) ||
                        static_cast<int>(d.bias.size()) != d.out)
                        throw ValidationError("layer '" + q.id + "': payload size mismatch");
                    q.spec = std::move(d);
                    break;
                }
                case LayerKind::relu: q.spec = QRelu{}; break;
                case LayerKind::maxpool: q.spec = QMaxPool{l.at("k").get<int>(), l.at("s").get<int>()}; break;
                case LayerKind::globalavgpool: q.spec = QGlobalAvgPool{}; break;
                case LayerKind::softmax: q.spec = QSoftmax{}; break;
                case LayerKind::batchnorm:
                    throw ValidationError("quantized model contains unfolded batchnorm '" + q.id + "'");
            }
            model.layers.push_back(std::move(q));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("quantized model manifest: ") + e.what());
    }
    return model;
}

Document serialize_qmodel(const QuantizedModel& model) {
    BlobWriter blob;
    Document doc;
    doc.manifest = qmodel_manifest(model, blob);
    doc.manifest["format"] = "vdpu-qmodel";
    doc.manifest["format_version"] = kFormatVersion;
    doc.manifest["batch_size"] = 1;
    doc.blob = blob.take();
    return doc;
}

QuantizedModel deserialize_qmodel(const Document& doc) {
    check_format_version(doc.manifest, "vdpu-qmodel");
    return qmodel_from_manifest(doc.manifest, BlobReader(doc.blob));
}

QuantizedModel load_qmodel(const std::filesystem::path& manifest_path) {
    return deserialize_qmodel(read_document(manifest_path));
}

void save_qmodel(const QuantizedModel& model, const std::filesystem::path& manifest_path) {
    write_document(serialize_qmodel(model), manifest_path);
}

}  // namespace vdpu
