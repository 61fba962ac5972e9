// Copyright 2026 The corefcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "corefcl/kernels.hpp"
#include "corefcl/rng.hpp"

namespace {

using corefcl::Matrix;
namespace k = corefcl::kernels;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  corefcl::Rng rng(seed);
  Matrix m(r, c);
  for (auto& x : m.values()) x = rng.normal(0.0, 1.0);
  return m;
}

template <bool Omp>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix c(n, n);
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::matmul(a, b, c);
    else
      k::serial::matmul(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Omp>
void BM_MatmulAtAccum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
  Matrix c(n, n);
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::matmul_at_accum(a, b, c);
    else
      k::serial::matmul_at_accum(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Omp>
void BM_LayerNorm(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  const Matrix x = random_matrix(rows, d, 5);
  Matrix gamma(1, d), beta(1, d), y(rows, d), xhat(rows, d), rstd(rows, 1);
  for (auto& g : gamma.values()) g = 1.0;
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::layer_norm_forward(x, gamma, beta, 1e-5, y, xhat, rstd);
    else
      k::serial::layer_norm_forward(x, gamma, beta, 1e-5, y, xhat, rstd);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Omp>
void BM_Attention(benchmark::State& state) {
  const k::AttentionShape shape{static_cast<std::size_t>(state.range(0)), 32, 4};
  const std::size_t rows = shape.batch * shape.seq_len, d = 64;
  const Matrix q = random_matrix(rows, d, 6), kk = random_matrix(rows, d, 7), v = random_matrix(rows, d, 8);
  const std::vector<std::uint8_t> valid(rows, 1);
  Matrix probs(shape.batch * shape.heads * shape.seq_len, shape.seq_len), out(rows, d);
  Matrix dq(rows, d), dk(rows, d), dv(rows, d);
  const Matrix dout = random_matrix(rows, d, 9);
  for (auto _ : state) {
    if constexpr (Omp) {
      k::omp::attention_forward(q, kk, v, valid, shape, probs, out);
      k::omp::attention_backward(q, kk, v, probs, shape, dout, dq, dk, dv);
    } else {
      k::serial::attention_forward(q, kk, v, valid, shape, probs, out);
      k::serial::attention_backward(q, kk, v, probs, shape, dout, dq, dk, dv);
    }
    benchmark::DoNotOptimize(dq.data());
  }
}

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulAtAccum<false>)->Name("matmul_at_accum/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulAtAccum<true>)->Name("matmul_at_accum/omp")->Arg(128)->Arg(256);
BENCHMARK(BM_LayerNorm<false>)->Name("layer_norm/serial")->Arg(512)->Arg(4096);
BENCHMARK(BM_LayerNorm<true>)->Name("layer_norm/omp")->Arg(512)->Arg(4096);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(4)->Arg(16);
BENCHMARK(BM_Attention<true>)->Name("attention/omp")->Arg(4)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
