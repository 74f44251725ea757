#include <benchmark/benchmark.h>

#include <map>

#include "mediaflow/evaluation.hpp"
#include "mediaflow/vision_dataset.hpp"

using namespace mediaflow;

namespace {

struct Workload {
  LabeledDataset corpus;
  SyntheticDetector model;
  std::vector<ScoredPrediction> preds;

  explicit Workload(std::size_t n) {
    std::array<double, kLabelCount> prevalence;
    prevalence.fill(0.25);
    corpus = generate_corpus(n, prevalence, 1);
    model.seed = 2;
    model.box_jitter = 0.02;
    preds = predict_dataset(model, corpus);
  }
};

const Workload& workload(std::size_t n) {
  static std::map<std::size_t, Workload> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, Workload(n)).first;
  return it->second;
}

Thresholds half() {
  Thresholds t;
  t.fill(0.5);
  return t;
}

void BM_PredictDataset(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(predict_dataset(w.model, w.corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictDatasetSerial(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::predict_dataset(w.model, w.corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Evaluate(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(w.preds, w.corpus, half()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::evaluate(w.preds, w.corpus, half()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SelectThresholds(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(select_thresholds(w.preds, w.corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SelectThresholdsSerial(benchmark::State& state) {
  const auto& w = workload(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::select_thresholds(w.preds, w.corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_PredictDataset)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictDatasetSerial)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectThresholds)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectThresholdsSerial)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
