#include <doctest.h>

#include <numeric>

#include "support.hpp"

using namespace vdpu;
using namespace vdpu::testing;

TEST_CASE("1x1 identity kernel reproduces the input") {
    Rng rng(1);
    const auto x = random_tensor(rng, {1, 1, 6, 5});
    ConvSpec c{1, 1, 0, 1, 1, {1.0f}, {0.0f}, false};
    CHECK(conv2d_fp32(x, c) == x);
}

TEST_CASE("all-ones 3x3 kernel over all-ones 3x3 input sums to 9") {
    const TensorF32 x({1, 1, 3, 3}, 1.0f);
    ConvSpec c{3, 1, 0, 1, 1, std::vector<float>(9, 1.0f), {}, false};
    const auto y = conv2d_fp32(x, c);
    CHECK(y.shape() == TensorShape{1, 1, 1, 1});
    CHECK(y[0] == 9.0f);
}

TEST_CASE("random 2x5x5 conv equals the naive oracle") {
    Rng rng(2);
    const auto x = random_tensor(rng, {1, 2, 5, 5});
    const auto c = random_conv(rng, 2, 3, 3, 1, 1);
    CHECK(conv2d_fp32(x, c) == naive_conv(x, c));
}

TEST_CASE("conv errors") {
    Rng rng(3);
    CHECK_THROWS_AS(conv2d_fp32(random_tensor(rng, {1, 2, 5, 5}), random_conv(rng, 3, 1, 3, 1, 1)), ValidationError);
    CHECK_THROWS_AS(conv2d_fp32(random_tensor(rng, {1, 1, 2, 2}), random_conv(rng, 1, 1, 5, 1, 0)), ValidationError);
}

TEST_CASE("property: conv2d equals the 7-loop oracle bit for bit") {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = std::vector<int>{1, 3, 5}[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        const TensorShape s{1, rng.uniform_int(1, 4), rng.uniform_int(k, 8), rng.uniform_int(k, 8)};
        auto c = random_conv(rng, s.c, rng.uniform_int(1, 4), k, rng.uniform_int(1, 2), rng.uniform_int(0, k / 2),
                             rng.uniform() < 0.5);
        c.fused_relu = rng.uniform() < 0.3;
        const auto x = random_tensor(rng, s);
        REQUIRE(conv2d_fp32(x, c) == naive_conv(x, c));
    }
}

TEST_CASE("property: conv is linear without bias") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = random_conv(rng, 3, 4, 3, 1, 1, false);
        const auto x = random_tensor(rng, {1, 3, 6, 6});
        const float a = rng.uniform(-4.0f, 4.0f);
        TensorF32 ax = x;
        for (auto& v : ax.data()) v *= a;
        auto y = conv2d_fp32(x, c);
        for (auto& v : y.data()) v *= a;
        REQUIRE(max_rel_error(conv2d_fp32(ax, c).data(), y.data()) <= 1e-6);
    }
}

TEST_CASE("batchnorm examples") {
    Rng rng(6);
    const auto x = random_tensor(rng, {1, 2, 3, 3});
    BatchNormSpec id{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0f};
    CHECK(batchnorm_fp32(x, id) == x);
    BatchNormSpec affine{{2}, {3}, {0}, {1}, 0.0f};
    CHECK(batchnorm_fp32(TensorF32({1, 1, 1, 1}, 1.0f), affine)[0] == 5.0f);
    BatchNormSpec neg{{1}, {0}, {0}, {-1}, 1e-5f};
    CHECK_THROWS_AS(batchnorm_fp32(TensorF32({1, 1, 1, 1}, 1.0f), neg), ValidationError);
}

TEST_CASE("batchnorm matches a scalar loop oracle exactly") {
    Rng rng(7);
    const auto x = random_tensor(rng, {1, 4, 5, 5});
    const auto bn = random_bn(rng, 4);
    const auto y = batchnorm_fp32(x, bn);
    for (int c = 0; c < 4; ++c)
        for (int h = 0; h < 5; ++h)
            for (int w = 0; w < 5; ++w) {
                const auto i = static_cast<std::size_t>(c);
                const float ref = bn.gamma[i] * (x.at(0, c, h, w) - bn.mean[i]) / std::sqrt(bn.var[i] + bn.eps) + bn.beta[i];
                REQUIRE(y.at(0, c, h, w) == ref);
            }
}

TEST_CASE("relu, softmax, maxpool examples") {
    const TensorF32 x({1, 3, 1, 1}, std::vector<float>{-1, 0, 2});
    CHECK(relu_fp32(x).values() == std::vector<float>{0, 0, 2});
    const auto p = softmax_fp32(TensorF32({1, 10, 1, 1}, 0.3f));
    for (float v : p.data()) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
    const TensorF32 q({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    CHECK(maxpool_fp32(q, {2, 2})[0] == 4.0f);
    CHECK_THROWS_AS(maxpool_fp32(q, {3, 1}), ValidationError);
}

TEST_CASE("property: softmax sums to one and ignores a constant shift") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = random_tensor(rng, {1, 10, 1, 1}, -8.0f, 8.0f);
        const auto p = softmax_fp32(x);
        double sum = 0.0;
        for (float v : p.data()) sum += v;
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);
        TensorF32 shifted = x;
        const float k = rng.uniform(-5.0f, 5.0f);
        for (auto& v : shifted.data()) v += k;
        const auto ps = softmax_fp32(shifted);
        for (std::size_t i = 0; i < 10; ++i) REQUIRE(std::abs(ps[i] - p[i]) <= 1e-6);
    }
}

TEST_CASE("forward composes layers") {
    Rng rng(9);
    const auto x = random_tensor(rng, {1, 2, 6, 6}, 0.0f, 1.0f);
    const auto relu_only = ModelGraph::create("r", x.shape(), {{"r", ReluSpec{}}});
    CHECK(forward(relu_only, x) == x);
    const auto c = random_conv(rng, 2, 3, 3, 1, 1);
    const auto g = ModelGraph::create("cr", x.shape(), {{"c", c}, {"r", ReluSpec{}}});
    CHECK(forward(g, x) == relu_fp32(conv2d_fp32(x, c)));
    ExecutionTrace trace;
    forward(g, x, &trace);
    CHECK(trace.outputs.size() == 2);
}

TEST_CASE("forward is deterministic across runs and threads") {
    Rng rng(10);
    const auto g = random_graph(rng);
    const auto x = random_tensor(rng, g.input_shape());
    const auto ref = forward(g, x);
    std::vector<TensorF32> outs(4);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) pool.emplace_back([&, t] { outs[static_cast<std::size_t>(t)] = forward(g, x); });
    for (auto& th : pool) th.join();
    for (const auto& o : outs) CHECK(o == ref);
}

TEST_CASE("predict uses argmax with lowest-index ties") {
    std::vector<float> logits(10, 0.0f);
    logits[9] = 1.0f;
    CHECK(argmax(std::span<const float>(logits)) == 9);
    std::vector<float> flat(10, 0.5f);
    CHECK(argmax(std::span<const float>(flat)) == 0);
    Rng rng(11);
    const auto nonvec = ModelGraph::create("r", {1, 3, 4, 4}, {{"r", ReluSpec{}}});
    CHECK_THROWS_AS(predict(nonvec, random_tensor(rng, {1, 3, 4, 4})), ValidationError);
}
