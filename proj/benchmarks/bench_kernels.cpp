#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pointcpr/geometry.hpp"
#include "pointcpr/model.hpp"
#include "pointcpr/ops.hpp"
#include "pointcpr/pretrain.hpp"
#include "pointcpr/synth.hpp"

using namespace pointcpr;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return PointCloud(std::move(pts));
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(r * c);
  for (double& x : v) x = g(rng);
  return Tensor({r, c}, std::move(v));
}

void BM_Fps(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud pc = random_cloud(n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sample(pc, 64));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Fps)->Arg(1024)->Arg(4096)->Complexity();

void BM_KnnGroup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud pc = random_cloud(n, 2);
  const auto centers = farthest_point_sample(pc, 64);
  for (auto _ : state) benchmark::DoNotOptimize(knn_group(pc, centers, 32));
}
BENCHMARK(BM_KnnGroup)->Arg(1024)->Arg(4096);

void BM_Chamfer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 3);
  const PointCloud b = random_cloud(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_l2(a.points(), b.points()));
}
BENCHMARK(BM_Chamfer)->Arg(256)->Arg(1024);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 5);
  const Tensor b = random_matrix(n, n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.counters["flops"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(192);

void BM_EncodeVisible(benchmark::State& state) {
  const ModelConfig c = state.range(0) ? reference_config() : toy_config();
  const PointCprModel model = build_model(c, ModelTarget::encoder_only, 1);
  const PatchSet patches = prepare_patches(random_cloud(c.num_points, 7), c);
  const MaskPartition mask = make_mask(c.num_patches, c.mask_ratio, 1);
  for (auto _ : state) benchmark::DoNotOptimize(encode_visible(model, patches, mask));
}
BENCHMARK(BM_EncodeVisible)->ArgName("reference")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStepToy(benchmark::State& state) {
  const ModelConfig c = toy_config();
  std::vector<PatchSet> data;
  for (const auto& l : synth_dataset({{ShapeKind::sphere, ShapeKind::cube}, 4, c.num_points, 0.01, true, 1}))
    data.push_back(prepare_patches(l.cloud, c));
  TrainState st = make_train_state(c, 0);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(st, std::span<const PatchSet>(data)));
}
BENCHMARK(BM_TrainStepToy)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
