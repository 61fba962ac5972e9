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

namespace corefcl::kernels::omp {

namespace {
using Index = std::ptrdiff_t;
}

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, a.cols(), b.cols(), "matmul rhs");
  const std::size_t n = a.rows(), kk = a.cols(), m = b.cols();
  c = Matrix(n, m);
  const double* A = a.data();
  const double* Bp = b.data();
  double* C = c.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    double* crow = C + i * m;
    const double* arow = A + i * kk;
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = arow[k];
      const double* brow = Bp + k * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, b.rows(), a.cols(), "matmul_bt rhs");
  const std::size_t n = a.rows(), kk = a.cols(), m = b.rows();
  c = Matrix(n, m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* arow = a.data() + i * kk;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data() + j * kk;
      double s = 0.0;
      for (std::size_t k = 0; k < kk; ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
}

void matmul_at_accum(const Matrix& a, const Matrix& b, Matrix& c) {
  require_shape(b, a.rows(), b.cols(), "matmul_at rhs");
  require_shape(c, a.cols(), b.cols(), "matmul_at out");
  const std::size_t n = a.rows(), ka = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(ka); ++i) {
    double* crow = c.data() + i * m;
    for (std::size_t r = 0; r < n; ++r) {
      const double ari = a.data()[r * ka + i];
      if (ari == 0.0) continue;
      const double* brow = b.data() + r * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += ari * brow[j];
    }
  }
}

void add_row_bias(Matrix& c, const Matrix& bias) {
  require_shape(bias, 1, c.cols(), "bias");
  const std::size_t m = c.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(c.rows()); ++i) {
    double* crow = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) crow[j] += bias[j];
  }
}

void col_sum_accum(const Matrix& a, Matrix& out) {
  require_shape(out, 1, a.cols(), "col_sum out");
  const std::size_t m = a.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < static_cast<Index>(m); ++j) {
    double s = out[j];
    for (std::size_t i = 0; i < a.rows(); ++i) s += a.data()[i * m + j];
    out[j] = s;
  }
}

void layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                        double eps, Matrix& y, Matrix& xhat, Matrix& rstd) {
  const std::size_t n = x.rows(), d = x.cols();
  y = Matrix(n, d);
  xhat = Matrix(n, d);
  rstd = Matrix(n, 1);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* xr = x.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[i] = r;
    double* hr = xhat.data() + i * d;
    double* yr = y.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * r;
      yr[j] = gamma[j] * hr[j] + beta[j];
    }
  }
}

void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Matrix& rstd,
                         const Matrix& gamma, Matrix& dx, Matrix& dgamma, Matrix& dbeta) {
  const std::size_t n = dy.rows(), d = dy.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* dyr = dy.data() + i * d;
    const double* hr = xhat.data() + i * d;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dyr[j] * gamma[j];
      m1 += g;
      m2 += g * hr[j];
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    double* dxr = dx.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dyr[j] * gamma[j];
      dxr[j] += rstd[i] * (g - m1 - hr[j] * m2);
    }
  }
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < static_cast<Index>(d); ++j) {
    double sg = dgamma[j], sb = dbeta[j];
    for (std::size_t i = 0; i < n; ++i) {
      sg += dy.data()[i * d + j] * xhat.data()[i * d + j];
      sb += dy.data()[i * d + j];
    }
    dgamma[j] = sg;
    dbeta[j] = sb;
  }
}

void gelu_forward(const Matrix& u, Matrix& g) {
  g = Matrix(u.rows(), u.cols());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(u.size()); ++i) g[i] = gelu(u[i]);
}

void gelu_backward(const Matrix& u, const Matrix& dg, Matrix& du) {
  du = Matrix(u.rows(), u.cols());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(u.size()); ++i) du[i] = dg[i] * gelu_grad(u[i]);
}

void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                       const std::vector<std::uint8_t>& key_valid,
                       const AttentionShape& shape, Matrix& probs, Matrix& out) {
  const std::size_t B = shape.batch, L = shape.seq_len, H = shape.heads;
  const std::size_t d = q.cols(), dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  probs = Matrix(B * H * L, L);
  out = Matrix(B * L, d);
#pragma omp parallel for schedule(static)
  for (Index bh = 0; bh < static_cast<Index>(B * H); ++bh) {
    const std::size_t b = bh / H, h = bh % H;
    const std::uint8_t* valid = key_valid.data() + b * L;
    for (std::size_t i = 0; i < L; ++i) {
      double* p = probs.data() + (bh * L + i) * L;
      const double* qi = q.data() + (b * L + i) * d + h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < L; ++j) {
        if (!valid[j]) continue;
        const double* kj = k.data() + (b * L + j) * d + h * dh;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        if (p[j] > mx) mx = p[j];
      }
      double z = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        if (!valid[j]) continue;
        p[j] = std::exp(p[j] - mx);
        z += p[j];
      }
      for (std::size_t j = 0; j < L; ++j) {
        if (valid[j]) p[j] /= z;
      }
      double* oi = out.data() + (b * L + i) * d + h * dh;
      for (std::size_t j = 0; j < L; ++j) {
        if (!valid[j]) continue;
        const double pj = p[j];
        const double* vj = v.data() + (b * L + j) * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += pj * vj[c];
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
#pragma omp parallel for schedule(static)
  for (Index bh = 0; bh < static_cast<Index>(B * H); ++bh) {
    const std::size_t b = bh / H, h = bh % H;
    std::vector<double> ds(L);
    for (std::size_t i = 0; i < L; ++i) {
      const double* p = probs.data() + (bh * L + i) * L;
      const double* doi = dout.data() + (b * L + i) * d + h * dh;
      double rowdot = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        if (p[j] == 0.0) {
          ds[j] = 0.0;
          continue;
        }
        const double* vj = v.data() + (b * L + j) * d + h * dh;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += doi[c] * vj[c];
        ds[j] = s;
        rowdot += p[j] * s;
      }
      const double* qi = q.data() + (b * L + i) * d + h * dh;
      double* dqi = dq.data() + (b * L + i) * d + h * dh;
      for (std::size_t j = 0; j < L; ++j) {
        if (p[j] == 0.0) continue;
        const double g = p[j] * (ds[j] - rowdot) * scale;
        const double* kj = k.data() + (b * L + j) * d + h * dh;
        double* dkj = dk.data() + (b * L + j) * d + h * dh;
        double* dvj = dv.data() + (b * L + j) * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) {
          dvj[c] += p[j] * doi[c];
          dqi[c] += g * kj[c];
          dkj[c] += g * qi[c];
        }
      }
    }
  }
}

}  // namespace corefcl::kernels::omp
