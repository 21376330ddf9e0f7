// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vdpu/random.hpp"
#include "vdpu/vdpu.hpp"
#include "support.hpp"

using namespace vdpu;
using namespace vdpu::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome resources() {
    Outcome o;
    const auto r = estimate_resources(default_target());
    const std::string text = r.to_text();
    for (const char* cell : {"1420", "82.18%", "210", "67.31%", "198725", "43.13%", "105845", "45.94%"})
        o.expect(text.find(cell) != std::string::npos, std::string("missing ") + cell);
    o.expect(r.pass, "B4096x2 should fit");
    for (int cores : {3, 4}) {
        auto t = default_target();
        t.cores = cores;
        const auto e = estimate_resources(t);
        o.expect(!e.pass, "B4096x" + std::to_string(cores) + " should fail");
        o.expect(std::find(e.exceeded.begin(), e.exceeded.end(), "BRAM") != e.exceeded.end(),
                 "BRAM not listed for " + std::to_string(cores) + " cores");
    }
    o.detail = o.pass ? "1420/82.18% 210/67.31% 198725/43.13% 105845/45.94%; x3, x4 exceed BRAM" : o.detail;
    return o;
}

Outcome comparison_table() {
    Outcome o;
    const std::vector<MetricRow> rows = parse_metric_rows(
        "platform,fps,power_w,images,reported_efficiency\n"
        "cpu,175.47,65,10000,\n"
        "gpu,223.31,350,10000,\n"
        "fpga-1t,584.11,60,10000,9.14\n"
        "fpga-2t,1021.45,60,10000,\n");
    const auto rep = compare_report(rows, "cpu");
    const auto check = [&](double got, double want, const std::string& what) {
        o.expect(near(std::round(got * 100) / 100, want, 0.01 + 1e-9), what + " " + fmt("%.4f", got) + " vs " + fmt("%.2f", want));
    };
    check(rep.row("cpu").metrics.latency_s, 56.99, "cpu latency");
    check(rep.row("gpu").metrics.latency_s, 44.78, "gpu latency");
    check(rep.row("fpga-1t").metrics.latency_s, 17.12, "fpga-1t latency");
    check(rep.row("fpga-2t").metrics.latency_s, 9.79, "fpga-2t latency");
    check(rep.row("cpu").metrics.efficiency, 2.70, "cpu efficiency");
    check(rep.row("gpu").metrics.efficiency, 0.64, "gpu efficiency");
    check(rep.row("fpga-2t").metrics.efficiency, 17.02, "fpga-2t efficiency");
    check(rep.row("gpu").throughput_ratio, 1.27, "gpu speedup");
    check(rep.row("fpga-1t").throughput_ratio, 3.33, "fpga-1t speedup");
    check(rep.row("fpga-2t").throughput_ratio, 5.82, "fpga-2t speedup");
    const auto& one = rep.row("fpga-1t");
    o.expect(one.reported_efficiency_ratio.has_value(), "fpga-1t reported ratio missing");
    if (one.reported_efficiency_ratio) check(*one.reported_efficiency_ratio, 3.39, "fpga-1t printed efficiency ratio");
    check(rep.row("fpga-2t").efficiency_ratio, 6.30, "fpga-2t efficiency ratio");
    // the inconsistent cell is shown as computed, with the footnote
    check(one.metrics.efficiency, 9.74, "fpga-1t computed efficiency");
    o.expect(one.footnote.has_value() && rep.footnotes.size() == 1, "footnote missing");
    const std::string text = rep.to_text();
    o.expect(text.find("9.74") != std::string::npos && text.find("9.14") != std::string::npos,
             "table text lacks the computed value or its footnote");
    if (o.pass)
        o.detail = "latencies 56.99/44.78/17.12/9.79, eff 2.70/0.64/17.02, ratios 1.27/3.33/5.82, eff ratio " +
                   fmt("%.2f", rep.row("fpga-2t").efficiency_ratio) + "; fpga-1t shown as " +
                   fmt("%.2f", one.metrics.efficiency) + " FPS/W (" + fmt("%.2f", one.efficiency_ratio) +
                   "x) with footnote for printed 9.14 (" + fmt("%.2f", *one.reported_efficiency_ratio) + "x)";
    return o;
}

Outcome thread_scaling() {
    Outcome o;
    auto s = load_scenario(source_dir() / "scenarios" / "thread_fit.json");
    s.threads = {1, 2, 3};
    s.images = 10000;
    const auto rep = run_benchmark(s);
    const double want[] = {584.11, 1021.45, 920.81};
    std::string got;
    for (std::size_t i = 0; i < 3; ++i) {
        const double fps = rep.rows[i].fps;
        got += fmt(i ? "/%.2f" : "%.2f", fps);
        o.expect(std::abs(fps - want[i]) <= 0.05 * want[i], "T=" + std::to_string(i + 1) + " off by more than 5%");
    }
    o.expect(rep.rows[1].fps > rep.rows[0].fps && rep.rows[2].fps < rep.rows[1].fps, "not rise-then-fall");
    o.detail = "fps " + got + " vs 584.11/1021.45/920.81" + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome bit_exact() {
    Outcome o;
    Rng rng(2026);
    const RandomModelLimits lim{10, 16, 16, true};
    int models = 0, frames = 0;
    while (models < 120) {
        const auto g = random_graph(rng, lim);
        auto t = default_target();
        if (models % 4 == 0) t.buffer_bytes = 2048;
        CompiledModel cm;
        try {
            cm = compile(quantize_random(g, rng), t);
        } catch (const ValidationError&) {
            continue;
        }
        const auto handle = load_model(cm, t);
        for (int i = 0; i < 5; ++i) {
            const auto x = random_tensor(rng, g.input_shape());
            if (simulate_frame(handle, x).output != qforward(cm.model, x).output) {
                o.expect(false, "mismatch on model " + std::to_string(models) + " image " + std::to_string(i));
            }
            ++frames;
        }
        ++models;
    }
    if (o.pass) o.detail = std::to_string(models) + " models, " + std::to_string(frames) + " frames identical";
    return o;
}

Outcome bn_fold() {
    Outcome o;
    Rng rng(77);
    double worst = 0.0;
    int pairs = 0, identical = 0;
    while (pairs < 150) {
        const int ci = rng.uniform_int(1, 8), co = rng.uniform_int(1, 8);
        const int k = std::vector<int>{1, 3, 5}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        const int hw = rng.uniform_int(k, 12);
        const auto g = ModelGraph::create("pair", {1, ci, hw, hw},
                                          {{"conv", random_conv(rng, ci, co, k, rng.uniform_int(1, 2), rng.uniform_int(0, k / 2), rng.uniform() < 0.5)},
                                           {"bn", random_bn(rng, co)},
                                           {"relu", ReluSpec{}}});
        const auto x = random_tensor(rng, g.input_shape());
        const auto folded = fold_batchnorm(g);
        worst = std::max(worst, max_rel_error(forward(folded, x).data(), forward(g, x).data()));
        const auto qm = quantize_random(g, rng);
        const auto fused = fuse_relu(qm);
        const CalibrationSet cal{{x}, "x"};
        const bool same = qforward(qm, x).output == qforward(fused, x).output &&
                          quantize_graph(folded, cal, 1) == quantize_graph(g, cal, 1);
        identical += same ? 1 : 0;
        ++pairs;
    }
    o.expect(worst <= 1e-4, "max relative error " + fmt("%.3g", worst));
    o.expect(identical == pairs, std::to_string(pairs - identical) + " pairs changed INT8 output");
    if (o.pass) o.detail = std::to_string(pairs) + " pairs, max rel err " + fmt("%.2e", worst) + ", INT8 identical";
    return o;
}

Outcome quantization() {
    Outcome o;
    for (int f = 0; f <= 7; ++f) {
        const QuantParams p{f};
        for (int code = -128; code <= 127; ++code) {
            const float x = static_cast<float>(std::ldexp(code, -f));
            const auto q = quantize_value(x, f);
            o.expect(q == code, "code " + std::to_string(code) + " f=" + std::to_string(f));
        }
        Rng rng(static_cast<std::uint64_t>(100 + f));
        for (int i = 0; i < 100000; ++i) {
            const float x = rng.uniform(static_cast<float>(p.min_representable()), static_cast<float>(p.max_representable()));
            const double back = std::ldexp(static_cast<double>(quantize_value(x, f)), -f);
            if (std::abs(back - x) > std::ldexp(1.0, -(f + 1))) {
                o.expect(false, "roundtrip bound broken at f=" + std::to_string(f));
                break;
            }
        }
    }
    const auto g = load_graph(source_dir() / "models" / "tiny8.json");
    const auto data = synthetic_cifar10(200, 99);
    const CalibrationSet cal{data.images, "synthetic"};
    const auto folded = fold_batchnorm(g);
    const auto c100 = calibrate(folded, cal, 100);
    const auto c1 = calibrate(folded, cal, 1);
    o.expect(c100.params == c1.params, "batch 100 and batch 1 disagree");
    const auto qm = quantize_model(folded, c100);
    ClipStats clips;
    for (const auto& x : data.images) clips += qforward(qm, x).clips;
    o.expect(clips.rate() <= 0.01, "clip rate " + fmt("%.4f", clips.rate()));
    if (o.pass)
        o.detail = "256 codes x 8 f exact, 8e5 random reals within 2^-(f+1), clip rate " + fmt("%.5f", clips.rate()) +
                   ", batch 100 == batch 1";
    return o;
}

Outcome conv_oracle() {
    Outcome o;
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const int c = rng.uniform_int(1, 4), h = rng.uniform_int(1, 8), w = rng.uniform_int(1, 8);
        int k = std::vector<int>{1, 3, 5}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        while (k > std::min(h, w) + 2 * (k / 2)) k -= 2;
        const int pad = rng.uniform_int(0, k / 2);
        if (k > std::min(h, w) + 2 * pad) {
            --i;
            continue;
        }
        const auto conv = random_conv(rng, c, rng.uniform_int(1, 4), k, rng.uniform_int(1, 2), pad, rng.uniform() < 0.5);
        const auto x = random_tensor(rng, {1, c, h, w});
        if (!(conv2d_fp32(x, conv) == naive_conv(x, conv))) {
            o.expect(false, "instance " + std::to_string(i) + " differs");
            break;
        }
    }
    if (o.pass) o.detail = "1000 instances bit-identical";
    return o;
}

#ifdef VDPU_CLI
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + VDPU_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

Outcome gates() {
    Outcome o;
#ifndef VDPU_CLI
    o.expect(false, "built without the CLI");
#else
    const fs::path dir = fs::temp_directory_path() / "vdpu_acceptance_gates";
    fs::create_directories(dir);
    const auto log = dir / "log.txt";
    const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    save_target(default_target(), dir / "target.json");
    auto slow = default_target();
    slow.clock_mhz = 250.0;
    save_target(slow, dir / "target_250.json");
    o.expect(run_cli("synth --count 20 --seed 3 --out " + q(dir / "calib.bin"), log) == 0, "synth failed");
    o.expect(run_cli("quantize " + q(source_dir() / "models" / "tiny8.json") + " --calib " + q(dir / "calib.bin") +
                         " --out " + q(dir / "tiny8.q.json"),
                     log) == 0,
             "quantize failed");
    o.expect(run_cli("compile " + q(dir / "tiny8.q.json") + " --target " + q(dir / "target.json") + " --out " +
                         q(dir / "tiny8.c.json"),
                     log) == 0,
             "compile failed");
    const int fp = run_cli("run " + q(dir / "tiny8.c.json") + " --target " + q(dir / "target_250.json") + " --count 10", log);
    o.expect(fp == 3, "fingerprint mismatch exit " + std::to_string(fp));
    const int ok = run_cli("run " + q(dir / "tiny8.c.json") + " --target " + q(dir / "target.json") + " --count 10", log);
    o.expect(ok == 0, "matching target exit " + std::to_string(ok));
    o.expect(run_cli("quantize " + q(source_dir() / "tests" / "fixtures" / "interior_softmax.json") + " --calib " +
                         q(dir / "calib.bin") + " --out " + q(dir / "split.q.json"),
                     log) == 0,
             "quantize of split model failed");
    const int gate = run_cli("compile " + q(dir / "split.q.json") + " --target " + q(dir / "target.json") + " --out " +
                                 q(dir / "split.c.json"),
                             log);
    o.expect(gate == 5, "subgraph gate exit " + std::to_string(gate));
    if (o.pass) o.detail = "fingerprint mismatch -> 3, two subgraphs -> 5, matching target -> 0";
#endif
    return o;
}

Outcome accuracy_substitute() {
    Outcome o;
    const auto golden = TensorBundle::load(source_dir() / "tests" / "golden" / "tiny8.json");
    const auto& cal_meta = golden.meta().at("calibration");
    const auto& a = golden.meta().at("agreement");
    const auto g = load_graph(source_dir() / "models" / "tiny8.json");
    const auto data = synthetic_cifar10(cal_meta.at("images").get<std::size_t>(), cal_meta.at("seed").get<std::uint64_t>());
    const auto qm = quantize_graph(g, CalibrationSet{data.images, "synthetic"}, cal_meta.at("batch").get<std::size_t>(), 4);
    const auto eval = synthetic_cifar10(a.at("images").get<std::size_t>(), a.at("seed").get<std::uint64_t>());
    int matches = 0;
    std::set<int> classes;
    for (const auto& x : eval.images) {
        const int fp = predict(g, x);
        classes.insert(fp);
        matches += fp == qforward(qm, x).class_index ? 1 : 0;
    }
    const double rate = matches / static_cast<double>(eval.count());
    const double threshold = a.at("threshold").get<double>();
    o.expect(rate >= threshold, "agreement " + fmt("%.3f", rate) + " below " + fmt("%.3f", threshold));
    if (o.pass) o.detail = "FP32/INT8 top-1 agreement " + fmt("%.3f", rate) + " >= recorded " + fmt("%.3f", threshold) +
                         " (FP32 predictions span " + std::to_string(classes.size()) + " class(es))";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "resource table", 1.0, resources},
        {2, "comparison table arithmetic", 1.0, comparison_table},
        {3, "thread-scaling fit", 30.0, thread_scaling},
        {4, "bit-exact simulation", 120.0, bit_exact},
        {5, "batchnorm fold equivalence", 0.0, bn_fold},
        {6, "quantization properties", 0.0, quantization},
        {7, "conv oracle", 0.0, conv_oracle},
        {8, "CLI gates", 0.0, gates},
        {9, "FP32/INT8 agreement substitute", 0.0, accuracy_substitute},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs > c.limit_s) o.expect(false, "took " + fmt("%.2f", secs) + " s, limit " + fmt("%.0f", c.limit_s) + " s");
        std::printf("%s %d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
