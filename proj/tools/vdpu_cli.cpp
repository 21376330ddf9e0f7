#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

#include "vdpu/vdpu.hpp"

namespace fs = std::filesystem;
using namespace vdpu;

namespace {

enum Exit { kOk = 0, kOther = 1, kValidation = 2, kFingerprint = 3, kResource = 4, kSubgraph = 5 };

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

Cifar10Batch load_images(const fs::path& path) {
    if (!fs::is_directory(path)) return load_cifar10(path);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
        if (e.path().extension() == ".bin") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no .bin files in " + path.string());
    Cifar10Batch all;
    for (const auto& f : files) {
        auto b = load_cifar10(f);
        std::move(b.images.begin(), b.images.end(), std::back_inserter(all.images));
        all.labels.insert(all.labels.end(), b.labels.begin(), b.labels.end());
    }
    return all;
}

void truncate(Cifar10Batch& b, std::size_t n) {
    if (n == 0 || n >= b.count()) return;
    b.images.resize(n);
    b.labels.resize(n);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vdpu: INT8 quantizer, compiler and DPU simulator"};
    app.require_subcommand(1);

    // quantize
    auto* q = app.add_subcommand("quantize", "calibrate and quantize a model to INT8");
    std::string q_model, q_calib, q_out;
    std::size_t q_images = 1000, q_batch = 100;
    unsigned q_threads = 1;
    q->add_option("model", q_model, "model manifest")->required();
    q->add_option("--calib", q_calib, "CIFAR-10 .bin file or directory of them")->required();
    q->add_option("--out", q_out, "quantized model manifest")->required();
    q->add_option("--images", q_images, "calibration images to use (0 = all)");
    q->add_option("--batch", q_batch, "calibration batch size");
    q->add_option("--threads", q_threads, "calibration worker threads");

    // compile
    auto* c = app.add_subcommand("compile", "compile a quantized model for a target");
    std::string c_qmodel, c_target, c_out;
    c->add_option("qmodel", c_qmodel, "quantized model manifest")->required();
    c->add_option("--target", c_target, "target JSON")->required();
    c->add_option("--out", c_out, "compiled model manifest")->required();

    // run
    auto* r = app.add_subcommand("run", "benchmark a compiled model on the simulator");
    std::string r_cmodel, r_target, r_images, r_out, r_scenario;
    std::vector<int> r_threads{1, 2, 3};
    bool r_labels = false;
    std::int64_t r_count = 0;
    double r_kappa = 0.0, r_core_time = 0.0;
    unsigned r_host = 0;
    r->add_option("cmodel", r_cmodel, "compiled model manifest");
    r->add_option("--target", r_target, "target JSON");
    r->add_option("--images", r_images, "CIFAR-10 .bin file (frame count and, with --labels, data)");
    r->add_flag("--labels", r_labels, "execute every frame and report accuracy against the labels");
    r->add_option("--threads", r_threads, "thread counts to sweep")->delimiter(',');
    r->add_option("--count", r_count, "frames per run (default: images in the file, else 10000)");
    r->add_option("--kappa", r_kappa, "bandwidth contention parameter");
    r->add_option("--core-time", r_core_time, "per-frame core time override in seconds");
    r->add_option("--scenario", r_scenario, "scenario JSON (supplies model, target and timing knobs)");
    r->add_option("--host-threads", r_host, "host worker threads (0 = one per stream)");
    r->add_option("--out", r_out, "report CSV");

    // fit
    auto* f = app.add_subcommand("fit", "fit core time and contention to observed fps");
    std::string f_obs, f_target, f_model, f_write;
    std::int64_t f_images = 10000;
    f->add_option("--observations", f_obs, "CSV threads,fps")->required();
    f->add_option("--target", f_target, "target JSON")->required();
    f->add_option("--model", f_model, "compiled model manifest supplying layer totals")->required();
    f->add_option("--images", f_images, "frames per simulated run");
    f->add_option("--write-scenario", f_write, "write a scenario JSON with the fitted parameters");
    std::string f_baselines;
    f->add_option("--baselines", f_baselines, "metric-row CSV copied into the written scenario");

    // report
    auto* p = app.add_subcommand("report", "comparison table from metric rows");
    std::string p_rows, p_baseline = "cpu", p_out;
    p->add_option("--rows", p_rows, "CSV platform,fps,power_w[,images,accuracy,reported_efficiency]")->required();
    p->add_option("--baseline", p_baseline, "baseline platform");
    p->add_option("--out", p_out, "CSV output");

    // synth
    auto* y = app.add_subcommand("synth", "write deterministic synthetic images in CIFAR-10 binary format");
    std::size_t y_count = 1000;
    std::uint64_t y_seed = 1;
    std::string y_out;
    y->add_option("--count", y_count, "records");
    y->add_option("--seed", y_seed, "generator seed");
    y->add_option("--out", y_out, "output .bin")->required();

    // resources
    auto* s = app.add_subcommand("resources", "estimate FPGA resources for a target");
    std::string s_target;
    s->add_option("--target", s_target, "target JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*q) {
            const ModelGraph graph = load_graph(q_model);
            Cifar10Batch data = load_images(q_calib);
            truncate(data, q_images);
            CalibrationSet cal{data.images, fs::path(q_calib).filename().string()};
            const QuantizedModel qm = quantize_graph(graph, cal, q_batch, q_threads);
            save_qmodel(qm, q_out);
            std::cout << "quantized " << qm.name << ": " << qm.layers.size() << " layers, calibrated on "
                      << cal.count() << " images (batch " << q_batch << ")\n";
        } else if (*c) {
            const TargetConfig target = load_target(c_target);
            const CompiledModel cm = compile(load_qmodel(c_qmodel), target);
            save_compiled(cm, c_out);
            std::size_t n = 0;
            for (const auto& sg : cm.subgraphs) n += sg.instructions.size();
            std::cout << "compiled " << cm.model.name << ": " << cm.subgraphs.size() << " DPU subgraph, " << n
                      << " instructions, fingerprint " << cm.fingerprint.hex() << "\n";
        } else if (*r) {
            Scenario sc;
            if (!r_scenario.empty()) sc = load_scenario(r_scenario);
            if (!r_cmodel.empty()) sc.model = r_cmodel;
            if (!r_target.empty()) sc.target = r_target;
            if (sc.model.empty() || sc.target.empty())
                throw ValidationError("run needs a compiled model and --target (or --scenario)");
            if (r->count("--threads")) sc.threads = r_threads;
            if (r->count("--kappa")) sc.kappa = r_kappa;
            if (r->count("--core-time")) sc.core_time_s = r_core_time;
            std::optional<Cifar10Batch> data;
            if (!r_images.empty()) {
                data = load_cifar10(r_images);
                if (data->count() == 0) throw ValidationError("empty image set");
                sc.images = static_cast<std::int64_t>(data->count());
            } else if (r_labels) {
                throw ValidationError("--labels needs --images");
            }
            if (r_count > 0) sc.images = r_count;
            const RunReport rep = run_benchmark(sc, r_labels ? &*data : nullptr, r_host);
            std::cout << rep.to_text();
            if (!r_out.empty()) write_file(r_out, rep.to_csv());
        } else if (*f) {
            const TargetConfig target = load_target(f_target);
            const CompiledModel cm = load_compiled(f_model);
            const FitResult fit = fit_scenario(load_observations(f_obs), target, cm.layers, f_images);
            std::cout << fit.to_json().dump(2) << "\n";
            if (!f_write.empty()) {
                const fs::path dir = fs::absolute(f_write).parent_path();
                Scenario sc;
                sc.name = fs::path(f_write).stem().string();
                sc.target = fs::relative(fs::absolute(f_target), dir);
                sc.model = fs::relative(fs::absolute(f_model), dir);
                if (!f_baselines.empty()) sc.baselines = load_metric_rows(f_baselines);
                sc.images = f_images;
                sc.threads.clear();
                for (const auto& o : fit.observed) sc.threads.push_back(o.threads);
                sc.kappa = fit.kappa;
                sc.core_time_s = fit.core_time_s;
                sc.extra["fit"] = fit.to_json();
                write_file(f_write, scenario_to_json(sc).dump(2) + "\n");
            }
        } else if (*p) {
            const ComparisonReport rep = compare_report(load_metric_rows(p_rows), p_baseline);
            std::cout << rep.to_text();
            if (!p_out.empty()) write_file(p_out, rep.to_csv());
        } else if (*y) {
            write_cifar10(synthetic_cifar10(y_count, y_seed), y_out);
            std::cout << "wrote " << y_count << " records to " << y_out << "\n";
        } else if (*s) {
            const ResourceReport rep = estimate_resources(load_target(s_target));
            std::cout << rep.to_text();
            if (!rep.pass) return kResource;
        }
    } catch (const FingerprintMismatch& e) {
        std::cerr << "fingerprint mismatch: " << e.what() << "\n";
        return kFingerprint;
    } catch (const ResourceFailure& e) {
        std::cerr << "resource failure: " << e.what() << "\n";
        return kResource;
    } catch (const SubgraphGateViolation& e) {
        std::cerr << "subgraph gate: " << e.what() << "\n";
        return kSubgraph;
    } catch (const ValidationError& e) {
        std::cerr << "validation failed: " << e.what() << "\n";
        return kValidation;
    } catch (const FormatError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOk;
}
