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

#ifndef COREFCL_KERNELS_HPP_
#define COREFCL_KERNELS_HPP_

#include <cstdint>
#include <vector>

#include "corefcl/tensor.hpp"

// Dense kernels used by the encoder. Two implementations with identical
// contracts: `serial` is the plain reference used by tests and the
// benchmark, `omp` is the OpenMP row-parallel version used for training.
// Every output element of an `omp` kernel is reduced by one thread in a fixed
// order, so results do not depend on the thread count.

namespace corefcl::kernels {

// Layout shared by the attention kernels: q, k, v and out are (B*L) x d with
// heads occupying contiguous column blocks of width d / H. probs holds one
// L x L block per (sequence, head), i.e. shape (B*H*L) x L.
struct AttentionShape {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t heads = 0;
};

#define COREFCL_DECLARE_KERNELS                                                   \
  /* c = a * b */                                                                 \
  void matmul(const Matrix& a, const Matrix& b, Matrix& c);                       \
  /* c = a * b^T */                                                               \
  void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c);                    \
  /* c += a^T * b */                                                              \
  void matmul_at_accum(const Matrix& a, const Matrix& b, Matrix& c);              \
  /* every row of c += bias (1 x cols) */                                         \
  void add_row_bias(Matrix& c, const Matrix& bias);                               \
  /* out (1 x cols) += column sums of a */                                        \
  void col_sum_accum(const Matrix& a, Matrix& out);                               \
  void layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, \
                          double eps, Matrix& y, Matrix& xhat, Matrix& rstd);     \
  /* dx += d(loss)/dx; dgamma, dbeta accumulate */                                \
  void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Matrix& rstd, \
                           const Matrix& gamma, Matrix& dx, Matrix& dgamma,       \
                           Matrix& dbeta);                                        \
  void gelu_forward(const Matrix& u, Matrix& g);                                  \
  /* du = dg * gelu'(u) */                                                        \
  void gelu_backward(const Matrix& u, const Matrix& dg, Matrix& du);              \
  void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v,       \
                         const std::vector<std::uint8_t>& key_valid,              \
                         const AttentionShape& shape, Matrix& probs, Matrix& out); \
  /* overwrites dq, dk, dv */                                                     \
  void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,      \
                          const Matrix& probs, const AttentionShape& shape,       \
                          const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv);

namespace serial {
COREFCL_DECLARE_KERNELS
}  // namespace serial

namespace omp {
COREFCL_DECLARE_KERNELS
}  // namespace omp

#undef COREFCL_DECLARE_KERNELS

// Exact GELU, x * Phi(x), and its derivative.
double gelu(double x);
double gelu_grad(double x);

}  // namespace corefcl::kernels

#endif  // COREFCL_KERNELS_HPP_
