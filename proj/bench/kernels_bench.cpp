// Serial reference kernels against their OpenMP forms on square grids.
// Thread count follows NFTM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nftm/kernels.hpp"

namespace k = nftm::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

template <auto Kernel>
void BM_heat(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto u = noise(n * n, 1);
  const std::vector<double> alpha{0.2};
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(u, alpha, 1, n, n, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Kernel>
void BM_laplacian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto u = noise(n * n, 2);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(u, 1, n, n, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Kernel>
void BM_gather(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto f = noise(n * n, 3);
  const auto offs = k::box_offsets(1, true);
  std::vector<double> out(n * n * offs.size());
  for (auto _ : state) {
    Kernel(f, 1, n, n, offs, nftm::Boundary::periodic, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Kernel>
void BM_attention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto f = noise(n * n, 4);
  const auto offs = k::box_offsets(1, true);
  auto a = noise(n * n * offs.size(), 5);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(f, a, n, n, offs, nftm::Boundary::periodic, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <auto Kernel>
void BM_conv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  k::ConvGeometry geo{7, 16, n, n, 3, nftm::Boundary::replicate};
  auto x = noise(geo.in_channels * geo.pixels(), 6);
  auto w = noise(geo.out_channels * geo.patch(), 7);
  auto b = noise(geo.out_channels, 8);
  std::vector<double> out(geo.out_channels * geo.pixels());
  for (auto _ : state) {
    Kernel(x, w, b, geo, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

}  // namespace

#define GRID_SIZES RangeMultiplier(2)->Range(64, 256)

BENCHMARK(BM_heat<k::heat_step_serial>)->Name("heat_step/serial")->GRID_SIZES;
BENCHMARK(BM_heat<k::heat_step_omp>)->Name("heat_step/omp")->GRID_SIZES;
BENCHMARK(BM_laplacian<k::laplacian5_serial>)->Name("laplacian5/serial")->GRID_SIZES;
BENCHMARK(BM_laplacian<k::laplacian5_omp>)->Name("laplacian5/omp")->GRID_SIZES;
BENCHMARK(BM_gather<k::gather_serial>)->Name("gather/serial")->GRID_SIZES;
BENCHMARK(BM_gather<k::gather_omp>)->Name("gather/omp")->GRID_SIZES;
BENCHMARK(BM_attention<k::local_attention_serial>)->Name("local_attention/serial")->GRID_SIZES;
BENCHMARK(BM_attention<k::local_attention_omp>)->Name("local_attention/omp")->GRID_SIZES;
BENCHMARK(BM_conv<k::conv2d_direct>)->Name("conv2d/direct")->GRID_SIZES;
BENCHMARK(BM_conv<k::conv2d_gemm>)->Name("conv2d/gemm")->GRID_SIZES;

BENCHMARK_MAIN();
