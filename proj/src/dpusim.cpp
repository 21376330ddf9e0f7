#include "vdpu/dpusim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vdpu/error.hpp"
#include "vdpu/fixed_point.hpp"
#include "vdpu/ref_exec.hpp"

namespace vdpu {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t scaled_cost(int cores, std::int64_t dual_cost, int peak) {
    return ceil_div(static_cast<std::int64_t>(cores) * dual_cost * peak, 2LL * 4096);
}

// On-chip state of one core while it walks the instruction stream.
class Core {
public:
    Core(const CompiledModel& c, std::int64_t buffer) : c_(c), buffer_(buffer), ddr_(c.tensors.size()) {}

    void set_input(const TensorI8& q) { ddr_[0].assign(q.data().begin(), q.data().end()); }

    void run(const Instruction& ins) {
        if (ins.layer != layer_) {
            // a new layer starts with an empty buffer
            act_.clear();
            weights_.clear();
            bias_.clear();
            out_.clear();
            layer_ = ins.layer;
        }
        switch (ins.op) {
            case Opcode::LOAD: load(ins); break;
            case Opcode::CONV: conv(ins); break;
            case Opcode::POOL: pool(ins); break;
            case Opcode::ELTWISE: eltwise(ins); break;
            case Opcode::SAVE: save(ins); break;
        }
        const std::int64_t resident = static_cast<std::int64_t>(act_.size() + weights_.size() + out_.size()) +
                                      4 * static_cast<std::int64_t>(bias_.size());
        if (resident > buffer_)
            throw Error("core buffer overflow: " + std::to_string(resident) + " bytes resident, capacity " +
                        std::to_string(buffer_));
    }

    TensorI8 read(int tensor, TensorShape shape) const {
        return TensorI8(shape, ddr_.at(static_cast<std::size_t>(tensor)));
    }

private:
    const QLayer& qlayer(const Instruction& ins) const { return c_.model.layers.at(static_cast<std::size_t>(ins.layer)); }

    void load(const Instruction& ins) {
        const auto& entry = c_.tensors.at(static_cast<std::size_t>(ins.tensor));
        const Region& r = ins.region;
        const int w = ins.view.w;
        const auto row_len = static_cast<std::size_t>(w);
        switch (entry.role) {
            case TensorRole::activation: {
                const auto& src = ddr_.at(static_cast<std::size_t>(ins.tensor));
                act_.resize(static_cast<std::size_t>(r.channels()) * r.rows() * row_len);
                for (int c = r.c_begin; c < r.c_end; ++c)
                    for (int h = r.h_begin; h < r.h_end; ++h) {
                        const auto s = (static_cast<std::size_t>(c) * ins.view.h + h) * row_len;
                        const auto d = (static_cast<std::size_t>(c - r.c_begin) * r.rows() + (h - r.h_begin)) * row_len;
                        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s), row_len,
                                    act_.begin() + static_cast<std::ptrdiff_t>(d));
                    }
                act_region_ = r;
                act_view_ = ins.view;
                break;
            }
            case TensorRole::weight: {
                const auto& q = qlayer(ins);
                const auto& src = std::holds_alternative<QConv>(q.spec) ? std::get<QConv>(q.spec).weights
                                                                        : std::get<QDense>(q.spec).weights;
                const auto taps = static_cast<std::size_t>(ins.view.h);
                weights_.assign(src.begin() + static_cast<std::ptrdiff_t>(r.c_begin * taps),
                                src.begin() + static_cast<std::ptrdiff_t>(r.c_end * taps));
                weight_region_ = r;
                break;
            }
            case TensorRole::bias: {
                const auto& q = qlayer(ins);
                const auto& src = std::holds_alternative<QConv>(q.spec) ? std::get<QConv>(q.spec).bias
                                                                        : std::get<QDense>(q.spec).bias;
                bias_.assign(src.begin() + r.c_begin, src.begin() + r.c_end);
                break;
            }
        }
    }

    std::int8_t requant(std::int64_t acc, int shift, bool relu) const {
        std::int64_t v = fixed::shift_round(acc, shift);
        if (relu) v = std::max<std::int64_t>(v, 0);
        bool clipped = false;
        return fixed::saturate_int8(v, clipped);
    }

    std::int8_t act(int c, int h, int w) const {
        return act_[(static_cast<std::size_t>(c - act_region_.c_begin) * act_region_.rows() + (h - act_region_.h_begin)) *
                        static_cast<std::size_t>(act_view_.w) +
                    static_cast<std::size_t>(w)];
    }

    void conv(const Instruction& ins) {
        const auto& q = qlayer(ins);
        int k = 1, s = 1, pad = 0;
        if (const auto* c = std::get_if<QConv>(&q.spec)) {
            k = c->k;
            s = c->s;
            pad = c->pad;
        }
        const TileShape in = act_view_;
        const Region& r = ins.region;
        const int ow_count = ins.out_tile.w;
        const auto taps = static_cast<std::size_t>(in.c) * k * k;
        out_.assign(static_cast<std::size_t>(ins.out_tile.elements()), 0);
        std::size_t o = 0;
        for (int co = r.c_begin; co < r.c_end; ++co) {
            const auto wrow = static_cast<std::size_t>(co - weight_region_.c_begin) * taps;
            for (int oh = r.h_begin; oh < r.h_end; ++oh)
                for (int ow = 0; ow < ow_count; ++ow) {
                    std::int64_t acc = bias_[static_cast<std::size_t>(co - weight_region_.c_begin)];
                    for (int ci = 0; ci < in.c; ++ci)
                        for (int kh = 0; kh < k; ++kh) {
                            const int ih = oh * s - pad + kh;
                            if (ih < 0 || ih >= in.h) continue;
                            if (ih < act_region_.h_begin || ih >= act_region_.h_end)
                                throw Error("CONV reads row " + std::to_string(ih) + " outside the loaded band");
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = ow * s - pad + kw;
                                if (iw < 0 || iw >= in.w) continue;
                                const auto wv = weights_[wrow + (static_cast<std::size_t>(ci) * k + kh) * k + kw];
                                acc = fixed::accumulate(acc, std::int64_t{act(ci, ih, iw)} * wv);
                            }
                        }
                    out_[o++] = requant(acc, ins.shift, ins.fused_relu);
                }
        }
    }

    void pool(const Instruction& ins) {
        const auto& q = qlayer(ins);
        const Region& r = ins.region;
        out_.assign(static_cast<std::size_t>(ins.out_tile.elements()), 0);
        std::size_t o = 0;
        if (const auto* p = std::get_if<QMaxPool>(&q.spec)) {
            for (int c = r.c_begin; c < r.c_end; ++c)
                for (int oh = r.h_begin; oh < r.h_end; ++oh)
                    for (int ow = 0; ow < ins.out_tile.w; ++ow) {
                        std::int8_t best = -128;
                        for (int kh = 0; kh < p->k; ++kh)
                            for (int kw = 0; kw < p->k; ++kw)
                                best = std::max(best, act(c, oh * p->s + kh, ow * p->s + kw));
                        out_[o++] = best;
                    }
            return;
        }
        if (!std::holds_alternative<QGlobalAvgPool>(q.spec)) throw Error("POOL issued for a non-pool layer");
        const int f_in = c_.model.input_params_of(static_cast<std::size_t>(ins.layer)).fraction_bits;
        const int diff = q.out.fraction_bits - f_in;
        const std::int64_t count = static_cast<std::int64_t>(act_view_.h) * act_view_.w;
        for (int c = r.c_begin; c < r.c_end; ++c) {
            std::int64_t sum = 0;
            for (int h = 0; h < act_view_.h; ++h)
                for (int w = 0; w < act_view_.w; ++w) sum = fixed::accumulate(sum, act(c, h, w));
            const std::int64_t num = diff >= 0 ? fixed::shift_round(sum, -std::min(diff, 31)) : sum;
            const std::int64_t den = diff >= 0 ? count : count << std::min(-diff, 30);
            bool clipped = false;
            out_[o++] = fixed::saturate_int8(fixed::round_div(num, den), clipped);
        }
    }

    void eltwise(const Instruction& ins) {
        const Region& r = ins.region;
        out_.assign(static_cast<std::size_t>(ins.out_tile.elements()), 0);
        std::size_t o = 0;
        for (int c = r.c_begin; c < r.c_end; ++c)
            for (int h = r.h_begin; h < r.h_end; ++h)
                for (int w = 0; w < ins.out_tile.w; ++w) out_[o++] = std::max<std::int8_t>(act(c, h, w), 0);
    }

    void save(const Instruction& ins) {
        auto& dst = ddr_.at(static_cast<std::size_t>(ins.tensor));
        const auto& view = ins.view;
        dst.resize(static_cast<std::size_t>(view.elements()));
        const Region& r = ins.region;
        const auto row_len = static_cast<std::size_t>(view.w);
        if (out_.size() != static_cast<std::size_t>(r.channels()) * r.rows() * row_len)
            throw Error("SAVE region does not match the resident output tile");
        for (int c = r.c_begin; c < r.c_end; ++c)
            for (int h = r.h_begin; h < r.h_end; ++h) {
                const auto d = (static_cast<std::size_t>(c) * view.h + h) * row_len;
                const auto s = (static_cast<std::size_t>(c - r.c_begin) * r.rows() + (h - r.h_begin)) * row_len;
                std::copy_n(out_.begin() + static_cast<std::ptrdiff_t>(s), row_len,
                            dst.begin() + static_cast<std::ptrdiff_t>(d));
            }
        out_.clear();
    }

    const CompiledModel& c_;
    std::int64_t buffer_;
    int layer_ = -1;
    std::vector<std::vector<std::int8_t>> ddr_;
    std::vector<std::int8_t> act_;
    Region act_region_;
    TileShape act_view_;
    std::vector<std::int8_t> weights_;
    Region weight_region_;
    std::vector<std::int32_t> bias_;
    std::vector<std::int8_t> out_;
};

}  // namespace

const ResourceUsage& ResourceReport::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    throw Error("no resource row '" + name + "'");
}

std::string ResourceReport::to_text() const {
    std::ostringstream os;
    for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%-5s %8lld / %-8lld (%.2f%%)%s\n", r.name.c_str(),
                      static_cast<long long>(r.used), static_cast<long long>(r.total), r.percent,
                      r.ok ? "" : "  EXCEEDED");
        os << line;
    }
    os << (pass ? "resources: pass\n" : "resources: FAIL\n");
    return os.str();
}

ResourceReport estimate_resources(const TargetConfig& target) {
    const int peak = target.peak_ops();
    const struct {
        const char* name;
        std::int64_t cost;
        std::int64_t total;
    } classes[] = {
        {"DSP", target.dual_core_cost.dsp, target.device.dsp},
        {"BRAM", target.dual_core_cost.bram, target.device.bram},
        {"FF", target.dual_core_cost.ff, target.device.ff},
        {"LUT", target.dual_core_cost.lut, target.device.lut},
    };
    ResourceReport report;
    for (const auto& c : classes) {
        ResourceUsage u;
        u.name = c.name;
        u.used = scaled_cost(target.cores, c.cost, peak);
        u.total = c.total;
        u.percent = 100.0 * static_cast<double>(u.used) / static_cast<double>(u.total);
        u.ok = u.used <= u.total;
        if (!u.ok) {
            report.pass = false;
            report.exceeded.push_back(u.name);
        }
        report.rows.push_back(u);
    }
    return report;
}

const char* to_string(Bound b) { return b == Bound::compute ? "compute" : "memory"; }

LayerCycles layer_cycles(std::int64_t ops, std::int64_t bytes, const TargetConfig& target, double allocated_mbps) {
    if (!(allocated_mbps > 0.0)) throw ValidationError("allocated bandwidth must be positive");
    LayerCycles lc;
    lc.compute = ceil_div(ops, target.peak_ops());
    // bytes per cycle = (MB/s * 1e6) / (MHz * 1e6)
    lc.memory = static_cast<std::int64_t>(std::ceil(static_cast<double>(bytes) * target.clock_mhz / allocated_mbps));
    lc.bound = lc.compute >= lc.memory ? Bound::compute : Bound::memory;
    return lc;
}

LayerCycles layer_cycles(const LayerTotals& totals, const TargetConfig& target, double allocated_mbps) {
    return layer_cycles(totals.ops.total(), totals.bytes_moved, target, allocated_mbps);
}

double arbitrate_bandwidth(int active_streams, const TargetConfig& target, double kappa) {
    if (active_streams < 1) throw ValidationError("active stream count must be >= 1");
    const double excess = std::max(0, active_streams - target.cores);
    return target.bandwidth_mbps / active_streams / (1.0 + kappa * excess);
}

std::string CycleTrace::to_csv() const {
    std::ostringstream os;
    os << "layer,compute_cycles,memory_cycles,bound\n";
    for (const auto& l : layers)
        os << l.layer << ',' << l.cycles.compute << ',' << l.cycles.memory << ',' << to_string(l.cycles.bound) << '\n';
    return os.str();
}

CycleTrace frame_trace(const std::vector<LayerTotals>& layers, const TargetConfig& target, int active_streams,
                       const StreamModel& model) {
    const double bw = arbitrate_bandwidth(active_streams, target, model.kappa);
    std::int64_t total_ops = 0;
    for (const auto& l : layers) total_ops += l.ops.total();
    const double core_cycles = model.core_time_s ? *model.core_time_s * target.clock_hz() : 0.0;

    CycleTrace trace;
    trace.active_streams = active_streams;
    for (const auto& l : layers) {
        LayerCycles lc = layer_cycles(l, target, bw);
        if (model.core_time_s && total_ops > 0)
            lc.compute = static_cast<std::int64_t>(
                std::ceil(core_cycles * static_cast<double>(l.ops.total()) / static_cast<double>(total_ops)));
        if (active_streams > target.cores) lc.compute = ceil_div(lc.compute * active_streams, target.cores);
        lc.bound = lc.compute >= lc.memory ? Bound::compute : Bound::memory;
        trace.layers.push_back({l.id, lc});
        trace.total_cycles += lc.cycles();
    }
    return trace;
}

CycleTrace frame_trace(const CompiledModel& compiled, const TargetConfig& target, int active_streams,
                       const StreamModel& model) {
    return frame_trace(compiled.layers, target, active_streams, model);
}

LoadedModel load_model(CompiledModel compiled, const TargetConfig& target) {
    const auto fp = verify_fingerprint(compiled, target);
    if (!fp.ok) throw FingerprintMismatch(fp.compiled, fp.target);
    auto report = estimate_resources(target);
    if (!report.pass) {
        std::string list;
        for (const auto& e : report.exceeded) list += (list.empty() ? "" : ", ") + e;
        throw ResourceFailure("target " + target.name + " exceeds device resources: " + list, report.exceeded);
    }
    LoadedModel handle;
    handle.compiled_ = std::make_shared<const CompiledModel>(std::move(compiled));
    handle.target_ = target;
    handle.resources_ = std::move(report);
    return handle;
}

FrameResult simulate_frame(const LoadedModel& handle, const TensorF32& image, int core) {
    const CompiledModel& c = handle.compiled();
    if (image.shape() != c.model.input_shape)
        throw ValidationError("image shape " + to_string(image.shape()) + " does not match model input " +
                              to_string(c.model.input_shape));
    if (c.layers.empty()) throw ValidationError("compiled model has no accelerator layers");
    Core engine(c, c.buffer_bytes);
    engine.set_input(quantize_tensor(image, c.model.input));
    for (const auto& sg : c.subgraphs)
        for (const auto& ins : sg.instructions) engine.run(ins);

    FrameResult r;
    const auto& last = c.layers.back();
    r.output = engine.read(last.output_tensor, c.model.layers[c.layers.size() - 1].out_shape);
    r.class_index = argmax(r.output.data());
    r.trace = frame_trace(c, handle.target(), 1);
    r.trace.core = core;
    return r;
}

}  // namespace vdpu
