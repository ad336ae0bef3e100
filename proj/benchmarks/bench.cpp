// Microbenchmarks for the hot paths: tensor matmul with backward, the three
// channel encoders, and trigram tokenization.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "mcnn/layers.hpp"
#include "mcnn/rng.hpp"
#include "mcnn/tensor.hpp"
#include "mcnn/tokenizer.hpp"

using namespace mcnn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, bool grad) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from(std::move(data), std::move(shape), grad);
}

std::string random_protein(Rng& rng, std::size_t len) {
    static constexpr char kResidues[] = "ACDEFGHIKLMNPQRSTVWY";
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s.push_back(kResidues[rng.next_below(20)]);
    return s;
}

void bm_matmul_backward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor a = random_tensor({n, n}, rng, true);
    Tensor b = random_tensor({n, n}, rng, true);
    for (auto _ : state) {
        a.clear_grad();
        b.clear_grad();
        backward(sum(matmul(a, b)));
        benchmark::DoNotOptimize(a.grad().data());
    }
}
BENCHMARK(bm_matmul_backward)->Arg(32)->Arg(64)->Arg(128);

void bm_conv1d_forward(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    Tensor x = random_tensor({len, 100}, rng, false);
    Tensor kernels = random_tensor({3, 100, 64}, rng, false);
    Tensor bias = random_tensor({1, 64}, rng, false);
    for (auto _ : state) {
        Tensor y = conv1d_valid(x, kernels, bias);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(bm_conv1d_forward)->Arg(128)->Arg(598);

void bm_bigru_encode(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    Tensor xs = random_tensor({len, 64}, rng, false);
    GruCell fwd = GruCell::create(64, 64, rng);
    GruCell bwd = GruCell::create(64, 64, rng);
    std::vector<bool> mask(len, true);
    for (auto _ : state) {
        Tensor h = bigru_encode(xs, mask, fwd, bwd);
        benchmark::DoNotOptimize(h.values().data());
    }
}
BENCHMARK(bm_bigru_encode)->Arg(64)->Arg(256);

void bm_attention(benchmark::State& state) {
    const auto len = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    Tensor x = random_tensor({len, 64}, rng, false);
    AttentionParams p = AttentionParams::create(64, 4, rng);
    std::vector<bool> mask(len, true);
    for (auto _ : state) {
        Tensor y = multi_head_self_attention(x, p, mask);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(bm_attention)->Arg(64)->Arg(256);

void bm_tokenize(benchmark::State& state) {
    Rng rng(5);
    std::vector<std::string> seqs;
    for (int i = 0; i < 64; ++i) seqs.push_back(random_protein(rng, 600));
    std::vector<std::vector<std::string>> grams;
    for (const auto& s : seqs) grams.push_back(extract_ngrams(s, 3));
    TrigramVocab vocab = TrigramVocab::build(grams);
    std::size_t i = 0;
    for (auto _ : state) {
        auto toks = extract_ngrams(seqs[i % seqs.size()], 3);
        auto ids = vocab.encode(toks, 600);
        benchmark::DoNotOptimize(ids.data());
        ++i;
    }
}
BENCHMARK(bm_tokenize);

}  // namespace

BENCHMARK_MAIN();
