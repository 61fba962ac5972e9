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

#include <omp.h>

#include <cmath>
#include <vector>

#include "corefcl/kernels.hpp"
#include "corefcl/rng.hpp"
#include "doctest.h"

using namespace corefcl;
namespace ks = corefcl::kernels::serial;
namespace ko = corefcl::kernels::omp;

namespace {

Matrix rand_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& x : m.values()) x = rng.normal(0.0, 1.0);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double d = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

struct AttentionCase {
  kernels::AttentionShape shape;
  Matrix q, k, v, dout;
  std::vector<std::uint8_t> valid;
};

AttentionCase attention_case(Rng& rng) {
  AttentionCase c;
  c.shape = {3, 7, 2};
  const std::size_t rows = c.shape.batch * c.shape.seq_len, d = 8;
  c.q = rand_matrix(rows, d, rng);
  c.k = rand_matrix(rows, d, rng);
  c.v = rand_matrix(rows, d, rng);
  c.dout = rand_matrix(rows, d, rng);
  c.valid.assign(rows, 1);
  for (std::size_t p = 5; p < 7; ++p) c.valid[1 * 7 + p] = 0;  // padded tail of sequence 1
  return c;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("matmul variants agree with the serial reference") {
    Rng rng(11);
    const Matrix a = rand_matrix(13, 9, rng), b = rand_matrix(9, 17, rng), bt = rand_matrix(17, 9, rng);
    Matrix c1, c2;
    ks::matmul(a, b, c1);
    ko::matmul(a, b, c2);
    CHECK(max_abs_diff(c1, c2) < 1e-12);
    ks::matmul_bt(a, bt, c1);
    ko::matmul_bt(a, bt, c2);
    CHECK(max_abs_diff(c1, c2) < 1e-12);

    const Matrix x = rand_matrix(13, 5, rng);
    Matrix acc1(9, 5), acc2(9, 5);
    ks::matmul_at_accum(a, x, acc1);
    ko::matmul_at_accum(a, x, acc2);
    CHECK(max_abs_diff(acc1, acc2) < 1e-12);
    // accumulation, not overwrite
    ko::matmul_at_accum(a, x, acc2);
    for (std::size_t i = 0; i < acc1.values().size(); ++i)
      CHECK(acc2.values()[i] == doctest::Approx(2 * acc1.values()[i]).epsilon(1e-12));
  }

  TEST_CASE("matmul against a hand-computed product") {
    Matrix a(2, 2), b(2, 2), c;
    a(0, 0) = 1, a(0, 1) = 2, a(1, 0) = 3, a(1, 1) = 4;
    b(0, 0) = 5, b(0, 1) = 6, b(1, 0) = 7, b(1, 1) = 8;
    ko::matmul(a, b, c);
    CHECK(c(0, 0) == 19);
    CHECK(c(0, 1) == 22);
    CHECK(c(1, 0) == 43);
    CHECK(c(1, 1) == 50);
    Matrix bad(3, 2);
    CHECK_THROWS_AS(ko::matmul(a, bad, c), std::invalid_argument);
  }

  TEST_CASE("bias, column sums, layer norm, gelu agree") {
    Rng rng(12);
    const Matrix x = rand_matrix(10, 6, rng), bias = rand_matrix(1, 6, rng);
    Matrix y1 = x, y2 = x;
    ks::add_row_bias(y1, bias);
    ko::add_row_bias(y2, bias);
    CHECK(max_abs_diff(y1, y2) == 0.0);
    Matrix s1(1, 6), s2(1, 6);
    ks::col_sum_accum(x, s1);
    ko::col_sum_accum(x, s2);
    CHECK(max_abs_diff(s1, s2) < 1e-12);

    const Matrix gamma = rand_matrix(1, 6, rng), beta = rand_matrix(1, 6, rng);
    Matrix o1(10, 6), h1(10, 6), r1(10, 1), o2(10, 6), h2(10, 6), r2(10, 1);
    ks::layer_norm_forward(x, gamma, beta, 1e-5, o1, h1, r1);
    ko::layer_norm_forward(x, gamma, beta, 1e-5, o2, h2, r2);
    CHECK(max_abs_diff(o1, o2) < 1e-12);
    // normalized rows have zero mean and unit variance
    for (std::size_t i = 0; i < 10; ++i) {
      double m = 0, v = 0;
      for (std::size_t j = 0; j < 6; ++j) m += h1(i, j);
      m /= 6;
      for (std::size_t j = 0; j < 6; ++j) v += (h1(i, j) - m) * (h1(i, j) - m);
      CHECK(std::abs(m) < 1e-12);
      CHECK(v / 6 == doctest::Approx(1.0).epsilon(1e-4));
    }
    const Matrix dy = rand_matrix(10, 6, rng);
    Matrix dx1(10, 6), dg1(1, 6), db1(1, 6), dx2(10, 6), dg2(1, 6), db2(1, 6);
    ks::layer_norm_backward(dy, h1, r1, gamma, dx1, dg1, db1);
    ko::layer_norm_backward(dy, h2, r2, gamma, dx2, dg2, db2);
    CHECK(max_abs_diff(dx1, dx2) < 1e-12);
    CHECK(max_abs_diff(dg1, dg2) < 1e-12);
    CHECK(max_abs_diff(db1, db2) < 1e-12);

    Matrix g1(10, 6), g2(10, 6), du1(10, 6), du2(10, 6);
    ks::gelu_forward(x, g1);
    ko::gelu_forward(x, g2);
    CHECK(max_abs_diff(g1, g2) == 0.0);
    ks::gelu_backward(x, dy, du1);
    ko::gelu_backward(x, dy, du2);
    CHECK(max_abs_diff(du1, du2) == 0.0);
  }

  TEST_CASE("exact gelu values and derivative") {
    CHECK(kernels::gelu(0.0) == 0.0);
    CHECK(kernels::gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
    CHECK(kernels::gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-14));
    for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
      const double h = 1e-6;
      const double fd = (kernels::gelu(x + h) - kernels::gelu(x - h)) / (2 * h);
      CHECK(kernels::gelu_grad(x) == doctest::Approx(fd).epsilon(1e-8));
    }
  }

  TEST_CASE("attention forward/backward agree and respect padding") {
    Rng rng(13);
    auto c = attention_case(rng);
    const std::size_t rows = c.q.rows(), d = c.q.cols();
    const std::size_t prows = c.shape.batch * c.shape.heads * c.shape.seq_len;
    Matrix p1(prows, 7), o1(rows, d), p2(prows, 7), o2(rows, d);
    ks::attention_forward(c.q, c.k, c.v, c.valid, c.shape, p1, o1);
    ko::attention_forward(c.q, c.k, c.v, c.valid, c.shape, p2, o2);
    CHECK(max_abs_diff(p1, p2) < 1e-12);
    CHECK(max_abs_diff(o1, o2) < 1e-12);
    // padded keys get zero probability; rows sum to 1
    for (std::size_t h = 0; h < c.shape.heads; ++h) {
      for (std::size_t i = 0; i < 7; ++i) {
        const std::size_t r = (1 * c.shape.heads + h) * 7 + i;
        CHECK(p1(r, 5) == 0.0);
        CHECK(p1(r, 6) == 0.0);
        double s = 0;
        for (std::size_t j = 0; j < 7; ++j) s += p1(r, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
    Matrix dq1(rows, d), dk1(rows, d), dv1(rows, d), dq2(rows, d), dk2(rows, d), dv2(rows, d);
    ks::attention_backward(c.q, c.k, c.v, p1, c.shape, c.dout, dq1, dk1, dv1);
    ko::attention_backward(c.q, c.k, c.v, p2, c.shape, c.dout, dq2, dk2, dv2);
    CHECK(max_abs_diff(dq1, dq2) < 1e-12);
    CHECK(max_abs_diff(dk1, dk2) < 1e-12);
    CHECK(max_abs_diff(dv1, dv2) < 1e-12);
  }

  TEST_CASE("attention backward matches finite differences of sum(out * dout)") {
    Rng rng(14);
    auto c = attention_case(rng);
    const std::size_t rows = c.q.rows(), d = c.q.cols();
    const std::size_t prows = c.shape.batch * c.shape.heads * c.shape.seq_len;
    auto objective = [&](const Matrix& q, const Matrix& k, const Matrix& v) {
      Matrix p(prows, 7), o(rows, d);
      ks::attention_forward(q, k, v, c.valid, c.shape, p, o);
      double s = 0;
      for (std::size_t i = 0; i < o.values().size(); ++i) s += o.values()[i] * c.dout.values()[i];
      return s;
    };
    Matrix p(prows, 7), o(rows, d), dq(rows, d), dk(rows, d), dv(rows, d);
    ks::attention_forward(c.q, c.k, c.v, c.valid, c.shape, p, o);
    ks::attention_backward(c.q, c.k, c.v, p, c.shape, c.dout, dq, dk, dv);
    const double h = 1e-5;
    for (int which = 0; which < 3; ++which) {
      Matrix q = c.q, k = c.k, v = c.v;
      Matrix& m = which == 0 ? q : which == 1 ? k : v;
      const Matrix& g = which == 0 ? dq : which == 1 ? dk : dv;
      for (std::size_t idx = 0; idx < m.values().size(); idx += 7) {
        const double keep = m.values()[idx];
        m.values()[idx] = keep + h;
        const double up = objective(q, k, v);
        m.values()[idx] = keep - h;
        const double down = objective(q, k, v);
        m.values()[idx] = keep;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - g.values()[idx]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }

  TEST_CASE("omp kernels are bit-identical across thread counts") {
    Rng rng(15);
    const Matrix a = rand_matrix(33, 21, rng), b = rand_matrix(21, 19, rng);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    Matrix c1;
    ko::matmul(a, b, c1);
    Matrix acc1(21, 19);
    ko::matmul_at_accum(a, rand_matrix(33, 19, rng), acc1);
    omp_set_num_threads(4);
    Rng rng2(15);
    rand_matrix(33, 21, rng2);
    rand_matrix(21, 19, rng2);
    Matrix c2;
    ko::matmul(a, b, c2);
    Matrix acc2(21, 19);
    ko::matmul_at_accum(a, rand_matrix(33, 19, rng2), acc2);
    omp_set_num_threads(saved);
    CHECK(c1 == c2);
    CHECK(acc1 == acc2);
  }
}
