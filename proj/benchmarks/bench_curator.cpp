#include <benchmark/benchmark.h>

#include "caloraify/caldata_curator.hpp"

using namespace caloraify;

namespace {

void bm_split(benchmark::State& state) {
    std::vector<curate::PairEntry> pairs;
    for (int64_t s = 0; s < state.range(0); ++s) {
        curate::RecipeSample sample;
        sample.sample_id = "r" + std::to_string(s);
        for (int i = 0; i < 11; ++i) sample.image_ids.push_back("i" + std::to_string(i));
        for (int i = 0; i < 5; ++i) sample.instructions.push_back("q" + std::to_string(i));
        auto p = curate::build_pairs(sample, 11, 5);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    for (auto _ : state) benchmark::DoNotOptimize(curate::split(pairs, {}, 42));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pairs.size()));
}
BENCHMARK(bm_split)->Arg(100)->Arg(5801)->Unit(benchmark::kMillisecond);

}  // namespace
