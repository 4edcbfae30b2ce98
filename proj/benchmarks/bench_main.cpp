#include <benchmark/benchmark.h>

#include "sigbench/dtw.hpp"
#include "sigbench/eval.hpp"
#include "sigbench/synth.hpp"
#include "sigbench/tarnn.hpp"
#include "sigbench/timefunc.hpp"

using namespace sigbench;

namespace {

Signature genuine(int index) { return synth::sample_genuine(synth::make_subject(11), 1, index); }

void BM_ExtractTimeFunctions(benchmark::State& state) {
  const auto sig = genuine(0);
  for (auto _ : state) benchmark::DoNotOptimize(timefunc::extract_time_functions(sig));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sig.size()));
}
BENCHMARK(BM_ExtractTimeFunctions);

void BM_DtwAlign(benchmark::State& state) {
  const auto a = timefunc::extract_time_functions(genuine(0));
  const auto b = timefunc::extract_time_functions(genuine(1));
  dtw::DtwOptions opts;
  if (state.range(0) > 0) opts.band = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtw::dtw_align(a.values, b.values, timefunc::kBaselineChannels, opts));
  }
  state.counters["cells"] = static_cast<double>(a.rows() * b.rows());
}
BENCHMARK(BM_DtwAlign)->Arg(0)->Arg(20);

void BM_TaRnnForward(benchmark::State& state) {
  const auto p = tarnn::TaRnnParams::initialize(tarnn::Architecture{}, 1);
  const auto pair = tarnn::align_pair(timefunc::extract_time_functions(genuine(0)),
                                      timefunc::extract_time_functions(genuine(1)));
  for (auto _ : state) benchmark::DoNotOptimize(tarnn::forward(p, pair.a, pair.b));
  state.counters["L"] = static_cast<double>(pair.a.rows());
}
BENCHMARK(BM_TaRnnForward)->Unit(benchmark::kMillisecond);

void BM_TaRnnBackward(benchmark::State& state) {
  const auto p = tarnn::TaRnnParams::initialize(tarnn::Architecture{}, 1);
  std::vector<tarnn::TrainingExample> batch{
      {tarnn::align_pair(timefunc::extract_time_functions(genuine(0)),
                         timefunc::extract_time_functions(genuine(1))),
       1}};
  for (auto _ : state) benchmark::DoNotOptimize(tarnn::loss_and_gradients(p, batch));
}
BENCHMARK(BM_TaRnnBackward)->Unit(benchmark::kMillisecond);

void BM_ComputeDet(benchmark::State& state) {
  Rng rng(3);
  eval::ScoreSet s;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n; ++i) {
    s.genuine.push_back(rng.normal(1.0, 1.0));
    s.impostor.push_back(rng.normal(0.0, 1.0));
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::compute_det(s));
}
BENCHMARK(BM_ComputeDet)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
