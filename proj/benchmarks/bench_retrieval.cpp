#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "caloraify/retrieval.hpp"

using namespace caloraify;

namespace {

std::string random_text(std::mt19937_64& rng) {
    std::string t;
    for (int w = 0; w < 2 + static_cast<int>(rng() % 5); ++w) t += "food" + std::to_string(rng() % 5000) + " ";
    return t;
}

void bm_embed(benchmark::State& state) {
    retrieval::HashingEmbedder e;
    const std::string text = "Chicken breast, roasted; Poultry; piece, cup, slice";
    for (auto _ : state) benchmark::DoNotOptimize(e.embed_text(text));
}
BENCHMARK(bm_embed);

void bm_search(benchmark::State& state) {
    std::mt19937_64 rng(1);
    retrieval::VectorIndex index(std::make_shared<retrieval::HashingEmbedder>());
    for (int64_t d = 0; d < state.range(0); ++d) index.add("d" + std::to_string(d), random_text(rng));
    const auto k = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(index.search("food42 food7", k));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_search)->Args({1000, 5})->Args({10000, 5})->Args({10000, 50})->Unit(benchmark::kMicrosecond);

}  // namespace
