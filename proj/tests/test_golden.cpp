#include <doctest.h>

#include "support.hpp"

using namespace vdpu;
using namespace vdpu::testing;

namespace {

struct Fixture {
    TensorBundle golden = TensorBundle::load(source_dir() / "tests" / "golden" / "tiny8.json");
    ModelGraph graph = load_graph(source_dir() / "models" / "tiny8.json");
    QuantizedModel qm;

    Fixture() {
        const auto& cal = golden.meta().at("calibration");
        const auto data = synthetic_cifar10(cal.at("images").get<std::size_t>(), cal.at("seed").get<std::uint64_t>());
        qm = quantize_graph(graph, CalibrationSet{data.images, "synthetic"}, cal.at("batch").get<std::size_t>(), 4);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("golden image matches the synthetic source") {
    CHECK(fixture().golden.get<float>("image") == synthetic_cifar10(1, 42).images[0]);
}

TEST_CASE("golden FP32 output") {
    const auto& f = fixture();
    const auto out = forward(f.graph, f.golden.get<float>("image"));
    const auto expected = f.golden.get<float>("fp32_output");
    CHECK(max_rel_error(out.data(), expected.data()) <= 1e-5);
    CHECK(argmax(out.data()) == f.golden.meta().at("fp32_class").get<int>());
}

TEST_CASE("golden fraction bits") {
    const auto& f = fixture();
    const auto& bits = f.golden.meta().at("fraction_bits");
    CHECK(f.qm.input.fraction_bits == bits.at("input").get<int>());
    for (const auto& layer : f.qm.layers) {
        if (bits.contains(layer.id)) CHECK(layer.out.fraction_bits == bits.at(layer.id).get<int>());
        if (const auto* c = std::get_if<QConv>(&layer.spec))
            CHECK(c->weight_bits == bits.at(layer.id + ".weight").get<int>());
        if (const auto* d = std::get_if<QDense>(&layer.spec))
            CHECK(d->weight_bits == bits.at(layer.id + ".weight").get<int>());
    }
}

TEST_CASE("golden INT8 output, reference and simulator") {
    const auto& f = fixture();
    const auto image = f.golden.get<float>("image");
    const auto expected = f.golden.get<std::int8_t>("int8_output");
    const auto ref = qforward(f.qm, image);
    CHECK(ref.output == expected);
    CHECK(ref.class_index == f.golden.meta().at("int8_class").get<int>());
    const auto handle = load_model(compile(f.qm, default_target()), default_target());
    const auto sim = simulate_frame(handle, image);
    CHECK(sim.output == expected);
    CHECK(sim.trace.total_cycles == f.golden.meta().at("frame_cycles").get<std::int64_t>());
    CHECK(handle.compiled().total_ops().total() == f.golden.meta().at("frame_ops").get<std::int64_t>());
}

TEST_CASE("golden FP32/INT8 top-1 agreement") {
    const auto& f = fixture();
    const auto& a = f.golden.meta().at("agreement");
    const auto eval = synthetic_cifar10(a.at("images").get<std::size_t>(), a.at("seed").get<std::uint64_t>());
    int matches = 0;
    for (const auto& x : eval.images) matches += predict(f.graph, x) == qforward(f.qm, x).class_index ? 1 : 0;
    CHECK(matches == a.at("matches").get<int>());
    CHECK(matches / 1000.0 >= a.at("threshold").get<double>());
}
