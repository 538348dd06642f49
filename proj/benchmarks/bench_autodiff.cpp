#include <benchmark/benchmark.h>

#include "skylens/tensor.hpp"

using namespace skylens;
using namespace skylens::nn;

static void BM_Conv2dForwardBackward(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> in(static_cast<std::size_t>(8) * 40 * 100);
    for (auto& v : in) v = rng.uniform();
    std::vector<double> k(static_cast<std::size_t>(16) * 8 * 3 * 3);
    for (auto& v : k) v = rng.uniform(-0.1, 0.1);
    for (auto _ : state) {
        Tensor input = Tensor::from({8, 40, 100}, in, true);
        Tensor kernel = Tensor::from({16, 8, 3, 3}, k, true);
        Tensor bias = Tensor::zeros({16}, true);
        Tensor out = conv2d(input, kernel, bias);
        Tensor loss = mse_loss(reshape(out, {16 * 40 * 100}),
                               std::vector<double>(16 * 40 * 100, 0.0));
        loss.backward();
        benchmark::DoNotOptimize(kernel.grad().data());
    }
}
BENCHMARK(BM_Conv2dForwardBackward);

static void BM_AttentionForwardBackward(benchmark::State& state) {
    Rng rng(5);
    const int n = 33, d = 64, heads = 4, hd = d / heads;
    std::vector<double> xv(static_cast<std::size_t>(n) * d);
    for (auto& v : xv) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        Tensor x = Tensor::from({n, d}, xv, true);
        std::vector<Tensor> wq, wk, wv;
        for (int h = 0; h < heads; ++h) {
            wq.push_back(Tensor::zeros({d, hd}, true));
            wk.push_back(Tensor::zeros({d, hd}, true));
            wv.push_back(Tensor::zeros({d, hd}, true));
        }
        Tensor wo = Tensor::zeros({d, d}, true);
        Tensor out = multi_head_self_attention(x, wq, wk, wv, wo);
        Tensor loss = mse_loss(reshape(out, {n * d}), std::vector<double>(n * d, 0.0));
        loss.backward();
        benchmark::DoNotOptimize(x.grad().data());
    }
}
BENCHMARK(BM_AttentionForwardBackward);
