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

#include "corefcl/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "corefcl/kernels.hpp"
#include "corefcl/rng.hpp"

namespace corefcl {

namespace k = kernels::omp;
using nlohmann::json;

namespace {
constexpr double kLnEps = 1e-5;
}

void EncoderConfig::validate() const {
  if (dim == 0 || layers == 0 || heads == 0 || ff_dim == 0 || max_len == 0 || vocab_size == 0)
    throw std::invalid_argument("encoder dimensions must all be >= 1");
  if (dim % heads != 0) throw std::invalid_argument("encoder dim must be divisible by heads");
}

EncoderConfig encoder_config_from_json(const json& j, EncoderConfig c) {
  c.dim = j.value("dim", c.dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const EncoderConfig& c) {
  return json{{"dim", c.dim},         {"layers", c.layers},         {"heads", c.heads},
              {"ff_dim", c.ff_dim},   {"max_len", c.max_len},       {"vocab_size", c.vocab_size},
              {"seed", c.seed}};
}

EncoderBatch EncoderBatch::pad(const std::vector<std::vector<int>>& sequences) {
  EncoderBatch b;
  b.batch = sequences.size();
  for (const auto& s : sequences) b.seq_len = std::max(b.seq_len, s.size());
  b.ids.assign(b.batch * b.seq_len, Vocab::kPad);
  for (std::size_t i = 0; i < sequences.size(); ++i)
    std::copy(sequences[i].begin(), sequences[i].end(), b.ids.begin() + i * b.seq_len);
  return b;
}

Encoder::Encoder(const EncoderConfig& config, Vocab vocab) : config_(config), vocab_(std::move(vocab)) {
  if (config_.vocab_size == 0) config_.vocab_size = vocab_.size();
  if (config_.vocab_size != vocab_.size())
    throw std::invalid_argument("encoder vocab_size does not match the vocabulary");
  config_.validate();
  const std::size_t d = config_.dim, ff = config_.ff_dim, V = config_.vocab_size;
  Rng rng(derive_seed(config_.seed, "encoder/init"));
  auto normal = [&](std::size_t r, std::size_t c, double sd) {
    Matrix m(r, c);
    for (auto& x : m.values()) x = rng.normal(0.0, sd);
    return m;
  };
  const double emb_sd = 0.1;
  const double in_sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double out_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(config_.layers));
  params_.push_back({"tok_emb", normal(V, d, emb_sd), true});
  params_.push_back({"pos_emb", normal(config_.max_len, d, emb_sd), true});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    params_.push_back({pre + "ln1_gamma", Matrix(1, d, 1.0), false});
    params_.push_back({pre + "ln1_beta", Matrix(1, d), false});
    params_.push_back({pre + "wq", normal(d, d, in_sd), true});
    params_.push_back({pre + "bq", Matrix(1, d), false});
    params_.push_back({pre + "wk", normal(d, d, in_sd), true});
    params_.push_back({pre + "wv", normal(d, d, in_sd), true});
    params_.push_back({pre + "bv", Matrix(1, d), false});
    params_.push_back({pre + "wo", normal(d, d, in_sd * out_scale), true});
    params_.push_back({pre + "bo", Matrix(1, d), false});
    params_.push_back({pre + "ln2_gamma", Matrix(1, d, 1.0), false});
    params_.push_back({pre + "ln2_beta", Matrix(1, d), false});
    params_.push_back({pre + "w1", normal(d, ff, in_sd), true});
    params_.push_back({pre + "b1", Matrix(1, ff), false});
    params_.push_back({pre + "w2", normal(ff, d, out_scale / std::sqrt(static_cast<double>(ff))), true});
    params_.push_back({pre + "b2", Matrix(1, d), false});
  }
  params_.push_back({"lnf_gamma", Matrix(1, d, 1.0), false});
  params_.push_back({"lnf_beta", Matrix(1, d), false});
  params_.push_back({"mlm_bias", Matrix(1, V), false});
}

std::size_t Encoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients Encoder::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.rows(), p.value.cols());
  return g;
}

ForwardCache Encoder::forward(const EncoderBatch& batch) const {
  const std::size_t B = batch.batch, L = batch.seq_len, d = config_.dim;
  if (L > config_.max_len)
    throw std::invalid_argument("sequence length " + std::to_string(L) + " exceeds max_len " +
                                std::to_string(config_.max_len));
  if (batch.ids.size() != B * L) throw std::invalid_argument("batch ids do not match its shape");
  ForwardCache c;
  c.batch = batch;
  c.key_valid.resize(B * L);
  Matrix x(B * L, d);
  const Matrix& tok = p(tok_emb());
  const Matrix& pos = p(pos_emb());
  for (std::size_t r = 0; r < B * L; ++r) {
    const int id = batch.ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
      throw std::invalid_argument("token id " + std::to_string(id) + " out of range");
    c.key_valid[r] = id != Vocab::kPad;
    const std::size_t t = r % L;
    for (std::size_t j = 0; j < d; ++j) x(r, j) = tok(id, j) + pos(t, j);
  }
  const kernels::AttentionShape shape{B, L, config_.heads};
  c.layers.resize(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    LayerCache& lc = c.layers[l];
    auto P = [&](std::size_t w) -> const Matrix& { return p(layer_param(l, w)); };
    lc.x_in = x;
    k::layer_norm_forward(x, P(kLn1G), P(kLn1B), kLnEps, lc.h1, lc.ln1_xhat, lc.ln1_rstd);
    k::matmul(lc.h1, P(kWq), lc.q);
    k::add_row_bias(lc.q, P(kBq));
    k::matmul(lc.h1, P(kWk), lc.k);
    k::matmul(lc.h1, P(kWv), lc.v);
    k::add_row_bias(lc.v, P(kBv));
    k::attention_forward(lc.q, lc.k, lc.v, c.key_valid, shape, lc.probs, lc.attn);
    Matrix o;
    k::matmul(lc.attn, P(kWo), o);
    k::add_row_bias(o, P(kBo));
    lc.x_mid = x;
    for (std::size_t i = 0; i < o.size(); ++i) lc.x_mid[i] += o[i];
    k::layer_norm_forward(lc.x_mid, P(kLn2G), P(kLn2B), kLnEps, lc.h2, lc.ln2_xhat, lc.ln2_rstd);
    k::matmul(lc.h2, P(kW1), lc.u);
    k::add_row_bias(lc.u, P(kB1));
    k::gelu_forward(lc.u, lc.g);
    Matrix f;
    k::matmul(lc.g, P(kW2), f);
    k::add_row_bias(f, P(kB2));
    x = lc.x_mid;
    for (std::size_t i = 0; i < f.size(); ++i) x[i] += f[i];
  }
  c.x_final = x;
  k::layer_norm_forward(x, p(lnf_g()), p(lnf_b()), kLnEps, c.output, c.lnf_xhat, c.lnf_rstd);
  return c;
}

Matrix Encoder::mlm_logits(const Matrix& embeddings) const {
  require_shape(embeddings, embeddings.rows(), config_.dim, "mlm_logits embeddings");
  Matrix logits;
  k::matmul_bt(embeddings, p(tok_emb()), logits);
  k::add_row_bias(logits, p(mlm_bias()));
  return logits;
}

Matrix Encoder::mlm_backward(const Matrix& embeddings, const Matrix& d_logits, Gradients& grads) const {
  require_shape(d_logits, embeddings.rows(), config_.vocab_size, "mlm_backward d_logits");
  Matrix d_emb;
  k::matmul(d_logits, p(tok_emb()), d_emb);
  k::matmul_at_accum(d_logits, embeddings, grads[tok_emb()]);
  k::col_sum_accum(d_logits, grads[mlm_bias()]);
  return d_emb;
}

void Encoder::backward(const ForwardCache& c, const Matrix& d_output, Gradients& grads) const {
  const std::size_t B = c.batch.batch, L = c.batch.seq_len, d = config_.dim;
  require_shape(d_output, B * L, d, "backward d_output");
  if (grads.size() != params_.size()) throw std::invalid_argument("gradient set does not match parameters");
  const kernels::AttentionShape shape{B, L, config_.heads};

  Matrix dx(B * L, d);
  k::layer_norm_backward(d_output, c.lnf_xhat, c.lnf_rstd, p(lnf_g()), dx, grads[lnf_g()], grads[lnf_b()]);

  for (std::size_t li = config_.layers; li-- > 0;) {
    const LayerCache& lc = c.layers[li];
    auto P = [&](std::size_t w) -> const Matrix& { return p(layer_param(li, w)); };
    auto G = [&](std::size_t w) -> Matrix& { return grads[layer_param(li, w)]; };

    // x_out = x_mid + FFN(LN2(x_mid))
    k::matmul_at_accum(lc.g, dx, G(kW2));
    k::col_sum_accum(dx, G(kB2));
    Matrix dg, du, dh2;
    k::matmul_bt(dx, P(kW2), dg);
    k::gelu_backward(lc.u, dg, du);
    k::matmul_at_accum(lc.h2, du, G(kW1));
    k::col_sum_accum(du, G(kB1));
    k::matmul_bt(du, P(kW1), dh2);
    Matrix dx_mid = dx;
    k::layer_norm_backward(dh2, lc.ln2_xhat, lc.ln2_rstd, P(kLn2G), dx_mid, G(kLn2G), G(kLn2B));

    // x_mid = x_in + Attn(LN1(x_in))
    k::matmul_at_accum(lc.attn, dx_mid, G(kWo));
    k::col_sum_accum(dx_mid, G(kBo));
    Matrix dattn, dq, dk, dv;
    k::matmul_bt(dx_mid, P(kWo), dattn);
    k::attention_backward(lc.q, lc.k, lc.v, lc.probs, shape, dattn, dq, dk, dv);
    k::matmul_at_accum(lc.h1, dq, G(kWq));
    k::col_sum_accum(dq, G(kBq));
    k::matmul_at_accum(lc.h1, dk, G(kWk));
    k::matmul_at_accum(lc.h1, dv, G(kWv));
    k::col_sum_accum(dv, G(kBv));
    Matrix dh1, tmp;
    k::matmul_bt(dq, P(kWq), dh1);
    k::matmul_bt(dk, P(kWk), tmp);
    for (std::size_t i = 0; i < tmp.size(); ++i) dh1[i] += tmp[i];
    k::matmul_bt(dv, P(kWv), tmp);
    for (std::size_t i = 0; i < tmp.size(); ++i) dh1[i] += tmp[i];
    dx = std::move(dx_mid);
    k::layer_norm_backward(dh1, lc.ln1_xhat, lc.ln1_rstd, P(kLn1G), dx, G(kLn1G), G(kLn1B));
  }

  Matrix& dtok = grads[tok_emb()];
  Matrix& dpos = grads[pos_emb()];
  for (std::size_t r = 0; r < B * L; ++r) {
    const int id = c.batch.ids[r];
    if (id == Vocab::kPad) continue;
    const std::size_t t = r % L;
    for (std::size_t j = 0; j < d; ++j) {
      dtok(id, j) += dx(r, j);
      dpos(t, j) += dx(r, j);
    }
  }
}

std::string Encoder::parameter_bytes() const {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
  std::string out;
  for (const auto& prm : params_)
    out.append(reinterpret_cast<const char*>(prm.value.data()), prm.value.size() * sizeof(double));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'C', 'O', 'R', 'E', 'C', 'L', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  out.append(reinterpret_cast<const char*>(&kVersion), 4);
  json header{{"config", to_json(ckpt.encoder.config())}, {"vocab", ckpt.encoder.vocab().tokens()}};
  put_str(out, header.dump());
  put_u64(out, ckpt.step);
  put_str(out, ckpt.rng_state);
  const auto& params = ckpt.encoder.params();
  put_u64(out, params.size());
  for (const auto& prm : params) {
    put_str(out, prm.name);
    put_u64(out, prm.value.rows());
    put_u64(out, prm.value.cols());
    out.append(reinterpret_cast<const char*>(prm.value.data()), prm.value.size() * sizeof(double));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a checkpoint file (bad magic)");
  std::uint32_t version;
  r.read(&version, 4);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const json header = json::parse(r.str());
  Encoder enc(encoder_config_from_json(header.at("config")),
              Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>()));
  Checkpoint ckpt{std::move(enc), 0, {}};
  ckpt.step = r.u64();
  ckpt.rng_state = r.str();
  auto& params = ckpt.encoder.params();
  if (r.u64() != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (auto& prm : params) {
    const auto name = r.str();
    const auto rows = r.u64(), cols = r.u64();
    if (name != prm.name || rows != prm.value.rows() || cols != prm.value.cols())
      throw std::runtime_error("checkpoint parameter '" + name + "' does not match the configuration");
    r.read(prm.value.data(), rows * cols * sizeof(double));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const auto bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

// ---------------------------------------------------------------------------
// Gradient check

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradientCheckReport gradient_check(const EncoderConfig& config, double tolerance) {
  auto tokens = Vocab::reserved();
  for (std::size_t i = tokens.size(); i < config.vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  const Vocab vocab = Vocab::from_tokens(tokens);
  EncoderConfig cfg = config;
  cfg.vocab_size = vocab.size();
  Encoder enc(cfg, vocab);
  Rng rng(derive_seed(cfg.seed, "gradcheck"));
  // Move gains and biases off their trivial init so every path is exercised.
  for (auto& prm : enc.params())
    for (auto& x : prm.value.values()) x += rng.normal(0.0, 0.1);

  const std::size_t L = std::min<std::size_t>(cfg.max_len, 6);
  std::vector<std::vector<int>> seqs(2);
  for (std::size_t i = 0; i < L; ++i) seqs[0].push_back(static_cast<int>(1 + rng.below(vocab.size() - 1)));
  for (std::size_t i = 0; i + 2 < L; ++i) seqs[1].push_back(static_cast<int>(1 + rng.below(vocab.size() - 1)));
  const EncoderBatch batch = EncoderBatch::pad(seqs);

  Matrix w_out(batch.batch * batch.seq_len, cfg.dim);
  for (auto& x : w_out.values()) x = rng.normal(0.0, 1.0);
  for (std::size_t t = seqs[1].size(); t < L; ++t)
    for (std::size_t j = 0; j < cfg.dim; ++j) w_out(batch.row(1, t), j) = 0.0;
  const std::vector<std::size_t> mlm_rows = {batch.row(0, 1), batch.row(1, 0)};
  Matrix w_logits(mlm_rows.size(), cfg.vocab_size);
  for (auto& x : w_logits.values()) x = rng.normal(0.0, 1.0);

  auto loss_of = [&](const Encoder& e) {
    const auto cache = e.forward(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < w_out.size(); ++i) s += w_out[i] * cache.output[i];
    Matrix rows(mlm_rows.size(), cfg.dim);
    for (std::size_t i = 0; i < mlm_rows.size(); ++i)
      std::copy_n(cache.output.row(mlm_rows[i]).begin(), cfg.dim, rows.row(i).begin());
    const Matrix logits = e.mlm_logits(rows);
    for (std::size_t i = 0; i < logits.size(); ++i) s += w_logits[i] * logits[i];
    return s;
  };

  Gradients grads = enc.zero_gradients();
  {
    const auto cache = enc.forward(batch);
    Matrix rows(mlm_rows.size(), cfg.dim);
    for (std::size_t i = 0; i < mlm_rows.size(); ++i)
      std::copy_n(cache.output.row(mlm_rows[i]).begin(), cfg.dim, rows.row(i).begin());
    Matrix d_out = w_out;
    const Matrix d_rows = enc.mlm_backward(rows, w_logits, grads);
    for (std::size_t i = 0; i < mlm_rows.size(); ++i)
      for (std::size_t j = 0; j < cfg.dim; ++j) d_out(mlm_rows[i], j) += d_rows(i, j);
    enc.backward(cache, d_out, grads);
  }

  constexpr double h = 1e-5;
  GradientCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < enc.params().size(); ++pi) {
    GradientCheckEntry entry{enc.params()[pi].name, enc.params()[pi].value.size(), 0.0};
    for (std::size_t e = 0; e < entry.elements; ++e) {
      double& x = enc.params()[pi].value[e];
      const double saved = x;
      x = saved + h;
      const double up = loss_of(enc);
      x = saved - h;
      const double down = loss_of(enc);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(grads[pi][e], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace corefcl
