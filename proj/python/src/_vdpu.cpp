#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vdpu/vdpu.hpp"

namespace py = pybind11;
using namespace vdpu;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

TensorF32 image_from(py::array_t<float, py::array::c_style | py::array::forcecast> a) {
    TensorShape s;
    if (a.ndim() == 3)
        s = {1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
    else if (a.ndim() == 4)
        s = {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
             static_cast<int>(a.shape(3))};
    else
        throw ValidationError("image array must be (c, h, w) or (n, c, h, w)");
    return TensorF32(s, std::vector<float>(a.data(), a.data() + a.size()));
}

std::vector<TensorF32> images_from(py::array_t<float, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 4) throw ValidationError("image batch must be (n, c, h, w)");
    const TensorShape s{1, static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3))};
    const auto per = static_cast<std::size_t>(s.per_image());
    std::vector<TensorF32> out;
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        out.emplace_back(s, std::vector<float>(a.data() + i * per, a.data() + (i + 1) * per));
    return out;
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
    const auto s = t.shape();
    py::array_t<T> a({s.n, s.c, s.h, s.w});
    std::copy(t.data().begin(), t.data().end(), a.mutable_data());
    return a;
}

py::array_t<float> stack(const std::vector<TensorF32>& images) {
    const auto s = images.empty() ? TensorShape{1, 3, 32, 32} : images[0].shape();
    py::array_t<float> a({static_cast<py::ssize_t>(images.size()), static_cast<py::ssize_t>(s.c),
                          static_cast<py::ssize_t>(s.h), static_cast<py::ssize_t>(s.w)});
    float* d = a.mutable_data();
    for (const auto& img : images) d = std::copy(img.data().begin(), img.data().end(), d);
    return a;
}

py::dict ops_dict(const OpCounts& o) {
    py::dict d;
    d["conv"] = o.conv;
    d["dense"] = o.dense;
    d["eltwise"] = o.eltwise;
    d["pool"] = o.pool;
    d["total"] = o.total();
    return d;
}

py::dict metric_dict(const MetricRow& m) {
    py::dict d;
    d["platform"] = m.platform;
    d["fps"] = m.fps;
    d["power_w"] = m.power_w;
    d["images"] = m.images;
    d["latency_s"] = m.latency_s;
    d["efficiency"] = m.efficiency;
    d["achieved_gops"] = m.achieved_gops;
    d["accuracy"] = m.accuracy ? py::cast(*m.accuracy) : py::none();
    return d;
}

MetricRow metric_from(const py::dict& d) {
    auto m = compute_metrics(d["fps"].cast<double>(), d["power_w"].cast<double>(),
                             d.contains("images") ? d["images"].cast<std::int64_t>() : 10000,
                             d.contains("ops_per_frame") ? d["ops_per_frame"].cast<std::int64_t>() : 0);
    m.platform = d["platform"].cast<std::string>();
    if (d.contains("accuracy") && !d["accuracy"].is_none()) m.accuracy = d["accuracy"].cast<double>();
    if (d.contains("reported_efficiency") && !d["reported_efficiency"].is_none())
        m.reported_efficiency = d["reported_efficiency"].cast<double>();
    return m;
}

py::dict report_dict(const RunReport& r) {
    py::dict d;
    d["model"] = r.model;
    d["target"] = r.target;
    d["ops_per_frame"] = r.ops_per_frame;
    d["bytes_per_frame"] = r.bytes_per_frame;
    py::list rows;
    for (const auto& t : r.rows) {
        py::dict row;
        row["threads"] = t.threads;
        row["images"] = t.images;
        row["makespan_cycles"] = t.makespan_cycles;
        row["seconds"] = t.seconds;
        row["fps"] = t.fps;
        row["latency_s"] = t.latency_s;
        row["achieved_gops"] = t.achieved_gops;
        row["bandwidth_mbps_used"] = t.bandwidth_mbps_used;
        row["fps_per_watt"] = t.fps_per_watt;
        row["accuracy"] = t.accuracy ? py::cast(*t.accuracy) : py::none();
        rows.append(row);
    }
    d["rows"] = rows;
    d["text"] = r.to_text();
    d["csv"] = r.to_csv();
    return d;
}

}  // namespace

PYBIND11_MODULE(_vdpu, m) {
    m.doc() = "INT8 quantizer, compiler and cycle-approximate DPU simulator";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<OverflowError>(m, "OverflowError", base.ptr());
    py::register_exception<FingerprintMismatch>(m, "FingerprintMismatch", base.ptr());
    py::register_exception<ResourceFailure>(m, "ResourceFailure", base.ptr());
    py::register_exception<SubgraphGateViolation>(m, "SubgraphGateViolation", base.ptr());

    py::class_<ModelGraph>(m, "Graph")
        .def_property_readonly("name", &ModelGraph::name)
        .def_property_readonly("input_shape",
                               [](const ModelGraph& g) {
                                   const auto s = g.input_shape();
                                   return py::make_tuple(s.n, s.c, s.h, s.w);
                               })
        .def_property_readonly("layer_ids",
                               [](const ModelGraph& g) {
                                   std::vector<std::string> ids;
                                   for (const auto& l : g.layers()) ids.push_back(l.id);
                                   return ids;
                               })
        .def("param_count", [](const ModelGraph& g) { return count_params(g); })
        .def("ops", [](const ModelGraph& g) { return ops_dict(count_ops(g).total); })
        .def("__len__", &ModelGraph::size);

    m.def("load_graph", &load_graph, py::arg("path"));
    m.def("save_graph", &save_graph, py::arg("graph"), py::arg("path"));
    m.def("fold_batchnorm", &fold_batchnorm, py::arg("graph"));
    m.def(
        "forward", [](const ModelGraph& g, py::array_t<float> image) { return to_array(forward(g, image_from(image))); },
        py::arg("graph"), py::arg("image"));
    m.def(
        "predict", [](const ModelGraph& g, py::array_t<float> image) { return predict(g, image_from(image)); },
        py::arg("graph"), py::arg("image"));

    py::class_<QuantizedModel>(m, "QuantizedModel")
        .def_readonly("name", &QuantizedModel::name)
        .def_property_readonly("input_fraction_bits", [](const QuantizedModel& q) { return q.input.fraction_bits; })
        .def_property_readonly("fraction_bits",
                               [](const QuantizedModel& q) {
                                   py::dict d;
                                   for (const auto& l : q.layers) d[py::str(l.id)] = l.out.fraction_bits;
                                   return d;
                               })
        .def("__eq__", [](const QuantizedModel& a, const QuantizedModel& b) { return a == b; });

    m.def(
        "quantize",
        [](const ModelGraph& g, py::array_t<float> images, std::size_t batch, unsigned threads) {
            return quantize_graph(g, CalibrationSet{images_from(images), "python"}, batch, threads);
        },
        py::arg("graph"), py::arg("images"), py::arg("batch") = 100, py::arg("threads") = 1);
    m.def(
        "qforward",
        [](const QuantizedModel& q, py::array_t<float> image) {
            const auto r = qforward(q, image_from(image));
            return py::make_tuple(r.class_index, to_array(r.output));
        },
        py::arg("model"), py::arg("image"));
    m.def("save_qmodel", &save_qmodel, py::arg("model"), py::arg("path"));
    m.def("load_qmodel", &load_qmodel, py::arg("path"));

    py::class_<TargetConfig>(m, "Target")
        .def_readwrite("name", &TargetConfig::name)
        .def_readwrite("cores", &TargetConfig::cores)
        .def_readwrite("clock_mhz", &TargetConfig::clock_mhz)
        .def_readwrite("bandwidth_mbps", &TargetConfig::bandwidth_mbps)
        .def_readwrite("power_w", &TargetConfig::power_w)
        .def_readwrite("buffer_bytes", &TargetConfig::buffer_bytes)
        .def_property(
            "arch", [](const TargetConfig& t) { return std::string(to_string(t.arch)); },
            [](TargetConfig& t, const std::string& a) { t.arch = arch_from_string(a); })
        .def("to_dict", [](const TargetConfig& t) { return to_py(target_to_json(t)); })
        .def_static("from_dict", [](const py::object& d) { return target_from_json(from_py(d)); });
    m.def("default_target", &default_target);
    m.def("load_target", &load_target, py::arg("path"));
    m.def(
        "estimate_resources",
        [](const TargetConfig& t) {
            const auto r = estimate_resources(t);
            py::dict d;
            py::list rows;
            for (const auto& u : r.rows) {
                py::dict row;
                row["name"] = u.name;
                row["used"] = u.used;
                row["total"] = u.total;
                row["percent"] = u.percent;
                row["ok"] = u.ok;
                rows.append(row);
            }
            d["rows"] = rows;
            d["pass"] = r.pass;
            d["exceeded"] = r.exceeded;
            d["text"] = r.to_text();
            return d;
        },
        py::arg("target"));

    py::class_<CompiledModel>(m, "CompiledModel")
        .def_property_readonly("fingerprint", [](const CompiledModel& c) { return c.fingerprint.hex(); })
        .def_property_readonly("subgraph_count", [](const CompiledModel& c) { return c.subgraphs.size(); })
        .def_readonly("host_layers", &CompiledModel::host_layers)
        .def_property_readonly("instruction_count",
                               [](const CompiledModel& c) {
                                   std::size_t n = 0;
                                   for (const auto& s : c.subgraphs) n += s.instructions.size();
                                   return n;
                               })
        .def("ops", [](const CompiledModel& c) { return ops_dict(c.total_ops()); })
        .def("bytes", &CompiledModel::total_bytes)
        .def("listing", &instruction_listing);
    m.def("compile", &compile, py::arg("model"), py::arg("target"));
    m.def("fingerprint", [](const TargetConfig& t) { return compute_fingerprint(t).hex(); }, py::arg("target"));
    m.def("save_compiled", &save_compiled, py::arg("model"), py::arg("path"));
    m.def("load_compiled", &load_compiled, py::arg("path"));

    py::class_<LoadedModel>(m, "LoadedModel")
        .def_property_readonly("compiled", &LoadedModel::compiled, py::return_value_policy::reference_internal);
    m.def("load_model", &load_model, py::arg("model"), py::arg("target"));
    m.def(
        "simulate_frame",
        [](const LoadedModel& h, py::array_t<float> image, int core) {
            const auto r = simulate_frame(h, image_from(image), core);
            py::dict d;
            d["class_index"] = r.class_index;
            d["output"] = to_array(r.output);
            d["cycles"] = r.trace.total_cycles;
            d["trace_csv"] = r.trace.to_csv();
            return d;
        },
        py::arg("handle"), py::arg("image"), py::arg("core") = 0);
    m.def(
        "run_benchmark",
        [](const LoadedModel& h, std::vector<int> threads, std::int64_t images, double kappa,
           std::optional<double> core_time_s) {
            BenchmarkOptions o;
            o.threads = std::move(threads);
            o.images = images;
            o.stream = {kappa, core_time_s};
            return report_dict(run_benchmark(h, o));
        },
        py::arg("handle"), py::arg("threads") = std::vector<int>{1, 2, 3}, py::arg("images") = 10000,
        py::arg("kappa") = 0.0, py::arg("core_time_s") = py::none());
    m.def(
        "run_scenario", [](const std::filesystem::path& p) { return report_dict(run_benchmark(load_scenario(p))); },
        py::arg("path"));
    m.def(
        "fit_scenario",
        [](const std::vector<std::pair<int, double>>& obs, const TargetConfig& t, const CompiledModel& c,
           std::int64_t images) {
            std::vector<Observation> o;
            for (auto [th, fps] : obs) o.push_back({th, fps});
            return to_py(fit_scenario(o, t, c.layers, images).to_json());
        },
        py::arg("observations"), py::arg("target"), py::arg("model"), py::arg("images") = 10000);
    m.def(
        "compare_report",
        [](const std::vector<py::dict>& rows, const std::string& baseline) {
            std::vector<MetricRow> in;
            for (const auto& d : rows) in.push_back(metric_from(d));
            const auto rep = compare_report(in, baseline);
            py::list out;
            for (const auto& r : rep.rows) {
                auto d = metric_dict(r.metrics);
                d["throughput_ratio"] = r.throughput_ratio;
                d["efficiency_ratio"] = r.efficiency_ratio;
                d["footnote"] = r.footnote ? py::cast(*r.footnote) : py::none();
                out.append(d);
            }
            py::dict d;
            d["rows"] = out;
            d["footnotes"] = rep.footnotes;
            d["text"] = rep.to_text();
            return d;
        },
        py::arg("rows"), py::arg("baseline") = "cpu");

    m.def(
        "synthetic_cifar10",
        [](std::size_t count, std::uint64_t seed) {
            const auto b = synthetic_cifar10(count, seed);
            return py::make_tuple(stack(b.images), py::array_t<int>(static_cast<py::ssize_t>(b.labels.size()), b.labels.data()));
        },
        py::arg("count"), py::arg("seed"));
    m.def(
        "load_cifar10",
        [](const std::filesystem::path& p) {
            const auto b = load_cifar10(p);
            return py::make_tuple(stack(b.images), py::array_t<int>(static_cast<py::ssize_t>(b.labels.size()), b.labels.data()));
        },
        py::arg("path"));
    m.def(
        "parse_cifar10",
        [](py::bytes data) {
            const std::string s = data;
            const auto b = parse_cifar10(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
            return py::make_tuple(stack(b.images), py::array_t<int>(static_cast<py::ssize_t>(b.labels.size()), b.labels.data()));
        },
        py::arg("data"));
}
