#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "activebasis/detection.hpp"
#include "activebasis/pursuit.hpp"
#include "activebasis/stat_model.hpp"

using namespace abm;

namespace {

std::shared_ptr<const ReferenceModel> reference(const Dictionary& dict) {
  static const auto ref = std::make_shared<const ReferenceModel>(
      pool_reference(synthetic_background(4, 96, 0), dict, {}, kSyntheticBackgroundLabel));
  return ref;
}

void BM_ComputeResponses(benchmark::State& state) {
  const Dictionary dict;
  const int side = static_cast<int>(state.range(0));
  const GrayImage im = synthetic_background(1, side, 1).front();
  for (auto _ : state) benchmark::DoNotOptimize(compute_responses(im, dict));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_ComputeResponses)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SharedSketch(benchmark::State& state) {
  const Dictionary dict;
  std::vector<ResponseMaps> maps;
  for (const auto& im : synthetic_background(static_cast<int>(state.range(0)), 80, 2)) {
    maps.push_back(prepare_image(im, dict).responses);
  }
  SketchOptions opt;
  opt.n = 20;
  for (auto _ : state) {
    std::vector<WeightedImage> imgs;
    for (const auto& m : maps) imgs.push_back({m, 1.0});
    benchmark::DoNotOptimize(shared_sketch(std::move(imgs), dict, reference(dict), opt));
  }
}
BENCHMARK(BM_SharedSketch)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
  const Dictionary dict;
  std::vector<WeightedImage> imgs;
  for (const auto& im : synthetic_background(2, 64, 3)) imgs.push_back({prepare_image(im, dict).responses, 1.0});
  SketchOptions opt;
  opt.n = 20;
  const ActiveBasisTemplate tmpl = shared_sketch(std::move(imgs), dict, reference(dict), opt).tmpl;
  const GrayImage scene = synthetic_background(1, 160, 4).front();
  const std::vector<double> factors = state.range(0) == 1 ? std::vector<double>{1.0} : default_factor_ladder();
  for (auto _ : state) benchmark::DoNotOptimize(detect(scene, tmpl, dict, factors));
}
BENCHMARK(BM_Detect)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
