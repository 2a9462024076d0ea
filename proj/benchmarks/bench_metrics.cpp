#include <benchmark/benchmark.h>

#include <random>

#include "caloraify/eval_metrics.hpp"

using namespace caloraify;

namespace {

eval::TokenSequence random_tokens(std::mt19937_64& rng, std::size_t n) {
    eval::TokenSequence out(n);
    for (auto& t : out) t = "w" + std::to_string(rng() % 200);
    return out;
}

void bm_rouge_l(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_tokens(rng, n), b = random_tokens(rng, n);
    for (auto _ : state) benchmark::DoNotOptimize(eval::rouge_l(a, b));
}
BENCHMARK(bm_rouge_l)->Arg(32)->Arg(256)->Arg(1024);

void bm_corpus_bleu(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::vector<eval::SequencePair> pairs;
    for (int64_t i = 0; i < state.range(0); ++i) pairs.push_back({random_tokens(rng, 40), random_tokens(rng, 40)});
    for (auto _ : state) benchmark::DoNotOptimize(eval::corpus_bleu(pairs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_corpus_bleu)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
