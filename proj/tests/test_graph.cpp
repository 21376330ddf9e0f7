#include <doctest.h>

#include <thread>

#include <fstream>

#include "support.hpp"

using namespace vdpu;
using namespace vdpu::testing;

namespace {

Document seeded_doc(json layers, std::vector<int> input = {1, 3, 32, 32}) {
    Document d;
    d.manifest = {{"format", "vdpu-model"}, {"format_version", 1}, {"input_shape", input},
                  {"init", {{"seed", 1}}},   {"layers", layers}};
    return d;
}

json conv_doc(const std::string& id, int k, int s, int pad, int ci, int co) {
    return {{"id", id}, {"kind", "conv2d"}, {"k", k}, {"s", s}, {"pad", pad}, {"c_in", ci}, {"c_out", co}};
}

bool mentions(const ValidationError& e, const std::string& needle) {
    for (const auto& d : e.diagnostics())
        if (d.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("same-padded 3x3 conv keeps the spatial shape") {
    const auto g = build_graph(seeded_doc(json::array({conv_doc("c", 3, 1, 1, 3, 3)})));
    CHECK(g.final_shape() == TensorShape{1, 3, 32, 32});
}

TEST_CASE("5x5 stride-2 unpadded conv on 32x32 gives 14x14") {
    const auto g = build_graph(seeded_doc(json::array({conv_doc("c", 5, 2, 0, 3, 7)})));
    CHECK(g.final_shape() == TensorShape{1, 7, 14, 14});
}

TEST_CASE("a two-node cycle is rejected") {
    auto d = seeded_doc(json::array({{{"id", "a"}, {"kind", "relu"}}, {{"id", "b"}, {"kind", "relu"}}}));
    d.manifest["edges"] = json::array({json::array({"a", "b"}), json::array({"b", "a"})});
    try {
        build_graph(d);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(mentions(e, "cycle"));
    }
}

TEST_CASE("build_graph reports every diagnostic at once") {
    auto layers = json::array({conv_doc("c0", 3, 1, 1, 3, 8), {{"id", "x"}, {"kind", "lstm"}}, conv_doc("c1", 3, 1, 1, 8, 8)});
    layers[2].erase("c_out");
    try {
        build_graph(seeded_doc(layers));
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.diagnostics().size() >= 2);
        CHECK(mentions(e, "lstm"));
        CHECK(mentions(e, "c1"));
    }
}

TEST_CASE("shape mismatch between consecutive layers") {
    auto layers = json::array({conv_doc("c0", 3, 1, 1, 3, 8), conv_doc("c1", 3, 1, 1, 4, 8)});
    try {
        build_graph(seeded_doc(layers));
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(mentions(e, "c1"));
    }
}

TEST_CASE("parameter payload size mismatch") {
    Rng rng(3);
    ConvSpec c = random_conv(rng, 3, 4, 3, 1, 1);
    c.weights.pop_back();
    CHECK_THROWS_AS(ModelGraph::create("m", {1, 3, 8, 8}, {{"c", c}}), ValidationError);
}

TEST_CASE("branching topologies are rejected") {
    std::vector<Layer> layers{{"a", ReluSpec{}}, {"b", ReluSpec{}}, {"c", ReluSpec{}}};
    CHECK_THROWS_AS(ModelGraph::create("m", {1, 1, 4, 4}, layers, {{"a", "b"}, {"a", "c"}}), ValidationError);
}

TEST_CASE("count_params") {
    Rng rng(1);
    const auto g = ModelGraph::create("m", {1, 3, 32, 32}, {{"c", random_conv(rng, 3, 16, 3, 1, 1)}});
    CHECK(count_params(g) == 448);
    const auto p = ModelGraph::create("p", {1, 3, 8, 8}, {{"r", ReluSpec{}}, {"m", MaxPoolSpec{2, 2}}});
    CHECK(count_params(p) == 0);
}

TEST_CASE("shipped example models record their true parameter counts") {
    for (const char* name : {"tiny8", "backbone35", "net52"}) {
        CAPTURE(name);
        const auto path = source_dir() / "models" / (std::string(name) + ".json");
        const auto doc = read_document(path);
        const auto g = build_graph(doc);
        CHECK(count_params(g) == doc.manifest.at("param_count").get<std::int64_t>());
        int convs = 0;
        for (const auto& l : g.layers()) convs += l.kind() == LayerKind::conv2d;
        if (doc.manifest.contains("conv_layers")) CHECK(convs == doc.manifest["conv_layers"].get<int>());
    }
    const auto net = build_graph(read_document(source_dir() / "models" / "net52.json"));
    CHECK(count_params(net) > 2'500'000);
    CHECK(count_params(net) < 3'700'000);
    const auto backbone = build_graph(read_document(source_dir() / "models" / "backbone35.json"));
    CHECK(count_params(backbone) > 250'000);
    CHECK(count_params(backbone) < 400'000);
}

TEST_CASE("count_ops examples") {
    Rng rng(1);
    const auto g = ModelGraph::create("m", {1, 3, 32, 32}, {{"c", random_conv(rng, 3, 16, 3, 1, 1)}});
    CHECK(count_ops(g).total.conv == 884'736);
    const auto one = ModelGraph::create("o", {1, 1, 1, 1}, {{"c", random_conv(rng, 1, 1, 1, 1, 0)}});
    CHECK(count_ops(one).total.conv == 2);
    const auto relu = ModelGraph::create("r", {1, 3, 32, 32}, {{"r", ReluSpec{}}});
    CHECK(count_ops(relu).total.total() == 3072);
}

TEST_CASE("property: shape inference matches the closed-form formulas") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_graph(rng);
        TensorShape s = g.input_shape();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto& spec = g.layers()[i].spec;
            if (const auto* c = std::get_if<ConvSpec>(&spec)) {
                s = {s.n, c->c_out, (s.h + 2 * c->pad - c->k) / c->s + 1, (s.w + 2 * c->pad - c->k) / c->s + 1};
            } else if (const auto* p = std::get_if<MaxPoolSpec>(&spec)) {
                s = {s.n, s.c, (s.h - p->k) / p->s + 1, (s.w - p->k) / p->s + 1};
            } else if (std::holds_alternative<GlobalAvgPoolSpec>(spec)) {
                s = {s.n, s.c, 1, 1};
            } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
                s = {s.n, d->out, 1, 1};
            }
            REQUIRE(g.output_shape(i) == s);
        }
    }
}

TEST_CASE("property: count_params equals the number of stored scalars") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_graph(rng);
        std::int64_t n = 0;
        for (const auto& l : g.layers()) {
            if (const auto* c = std::get_if<ConvSpec>(&l.spec)) n += static_cast<std::int64_t>(c->weights.size() + c->bias.size());
            if (const auto* d = std::get_if<DenseSpec>(&l.spec)) n += static_cast<std::int64_t>(d->weights.size() + d->bias.size());
            if (const auto* b = std::get_if<BatchNormSpec>(&l.spec))
                n += static_cast<std::int64_t>(b->gamma.size() + b->beta.size() + b->mean.size() + b->var.size());
        }
        REQUIRE(count_params(g) == n);
    }
}

TEST_CASE("property: conv op count equals a 7-loop MAC counter") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = std::vector<int>{1, 3, 5}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        const TensorShape s{1, rng.uniform_int(1, 4), rng.uniform_int(k, 9), rng.uniform_int(k, 9)};
        const ConvSpec c = random_conv(rng, s.c, rng.uniform_int(1, 5), k, rng.uniform_int(1, 2), rng.uniform_int(0, k / 2));
        REQUIRE(count_layer_ops(c, s).conv == 2 * naive_conv_macs(c, s));
    }
}

TEST_CASE("property: serialization round trip is exact") {
    Rng rng(14);
    const auto dir = std::filesystem::temp_directory_path() / "vdpu_test_graph";
    std::filesystem::create_directories(dir);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng);
        REQUIRE(deserialize_graph(serialize_graph(g)) == g);
        if (trial % 10 == 0) {
            save_graph(g, dir / "g.json");
            REQUIRE(load_graph(dir / "g.json") == g);
        }
    }
}

TEST_CASE("unsupported format version is refused") {
    Rng rng(15);
    auto doc = serialize_graph(random_graph(rng));
    doc.manifest["format_version"] = 99;
    CHECK_THROWS_AS(deserialize_graph(doc), FormatError);
}

TEST_CASE("truncated or corrupted parameter blob fails its checksum") {
    Rng rng(16);
    const auto g = ModelGraph::create("m", {1, 3, 8, 8}, {{"c", random_conv(rng, 3, 4, 3, 1, 1)}});
    auto doc = serialize_graph(g);
    auto truncated = doc;
    truncated.blob.resize(truncated.blob.size() - 5);
    CHECK_THROWS_AS(deserialize_graph(truncated), FormatError);
    auto flipped = doc;
    flipped.blob[3] ^= 0x40;
    CHECK_THROWS_AS(deserialize_graph(flipped), FormatError);
}

TEST_CASE("graphs are safe to read concurrently") {
    Rng rng(17);
    const auto g = random_graph(rng);
    const auto expected = count_ops(g).total;
    std::vector<std::thread> pool;
    std::vector<int> ok(4, 0);
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] { ok[static_cast<std::size_t>(t)] = count_ops(g).total == expected; });
    for (auto& th : pool) th.join();
    CHECK(std::count(ok.begin(), ok.end(), 1) == 4);
}
