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

#include <cmath>
#include <limits>

#include "corefcl/kernels.hpp"

namespace corefcl::kernels {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * (0.5 * M_2_SQRTPI * M_SQRT1_2);
  return cdf + x * pdf;
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, a.cols(), b.cols(), "matmul rhs");
  c = Matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, b.rows(), a.cols(), "matmul_bt rhs");
  c = Matrix(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
}

void matmul_at_accum(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, a.rows(), b.cols(), "matmul_at rhs");
  require_shape(c, a.cols(), b.cols(), "matmul_at out");
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t n = 0; n < a.rows(); ++n) c(i, j) += a(n, i) * b(n, j);
    }
  }
}

void add_row_bias(Matrix& c, const Matrix& bias) {
  require_shape(bias, 1, c.cols(), "bias");
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += bias[j];
}

void col_sum_accum(const Matrix& a, Matrix& out) {
  require_shape(out, 1, a.cols(), "col_sum out");
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) out[j] += a(i, j);
}

void layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                        double eps, Matrix& y, Matrix& xhat, Matrix& rstd) {
  const std::size_t n = x.rows(), d = x.cols();
  y = Matrix(n, d);
  xhat = Matrix(n, d);
  rstd = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[i] = r;
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (x(i, j) - mean) * r;
      y(i, j) = gamma[j] * xhat(i, j) + beta[j];
    }
  }
}

void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Matrix& rstd,
                         const Matrix& gamma, Matrix& dx, Matrix& dgamma, Matrix& dbeta) {
  const std::size_t n = dy.rows(), d = dy.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dy(i, j) * gamma[j];
      m1 += g;
      m2 += g * xhat(i, j);
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dy(i, j) * gamma[j];
      dx(i, j) += rstd[i] * (g - m1 - xhat(i, j) * m2);
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      dgamma[j] += dy(i, j) * xhat(i, j);
      dbeta[j] += dy(i, j);
    }
  }
}

void gelu_forward(const Matrix& u, Matrix& g) {
  g = Matrix(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = gelu(u[i]);
}

void gelu_backward(const Matrix& u, const Matrix& dg, Matrix& du) {
  du = Matrix(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) du[i] = dg[i] * gelu_grad(u[i]);
}

void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                       const std::vector<std::uint8_t>& key_valid,
                       const AttentionShape& shape, Matrix& probs, Matrix& out) {
  const std::size_t B = shape.batch, L = shape.seq_len, H = shape.heads;
  const std::size_t d = q.cols(), dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  probs = Matrix(B * H * L, L);
  out = Matrix(B * L, d);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < L; ++i) {
        const std::size_t prow = (b * H + h) * L + i;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
          if (!key_valid[b * L + j]) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q(b * L + i, h * dh + c) * k(b * L + j, h * dh + c);
          probs(prow, j) = s * scale;
          if (probs(prow, j) > mx) mx = probs(prow, j);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          if (!key_valid[b * L + j]) continue;
          probs(prow, j) = std::exp(probs(prow, j) - mx);
          z += probs(prow, j);
        }
        for (std::size_t j = 0; j < L; ++j) {
          if (key_valid[b * L + j]) probs(prow, j) /= z;
        }
        for (std::size_t c = 0; c < dh; ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < L; ++j) s += probs(prow, j) * v(b * L + j, h * dh + c);
          out(b * L + i, h * dh + c) = s;
        }
      }
    }
  }
}

void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                        const Matrix& probs, const AttentionShape& shape,
                        const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv) {
  const std::size_t B = shape.batch, L = shape.seq_len, H = shape.heads;
  const std::size_t d = q.cols(), dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix(B * L, d);
  dk = Matrix(B * L, d);
  dv = Matrix(B * L, d);
  std::vector<double> dp(L), ds(L);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < L; ++i) {
        const std::size_t prow = (b * H + h) * L + i;
        double rowdot = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += dout(b * L + i, h * dh + c) * v(b * L + j, h * dh + c);
          dp[j] = s;
          rowdot += probs(prow, j) * s;
        }
        for (std::size_t j = 0; j < L; ++j) ds[j] = probs(prow, j) * (dp[j] - rowdot);
        for (std::size_t j = 0; j < L; ++j) {
          for (std::size_t c = 0; c < dh; ++c) {
            dv(b * L + j, h * dh + c) += probs(prow, j) * dout(b * L + i, h * dh + c);
            dq(b * L + i, h * dh + c) += scale * ds[j] * k(b * L + j, h * dh + c);
            dk(b * L + j, h * dh + c) += scale * ds[j] * q(b * L + i, h * dh + c);
          }
        }
      }
    }
  }
}

}  // namespace serial
}  // namespace corefcl::kernels
