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

#include "corefcl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace corefcl {

using nlohmann::json;

AdamWConfig adamw_config_from_json(const json& j, AdamWConfig c) {
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  return c;
}

json to_json(const AdamWConfig& c) {
  return json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps},
              {"weight_decay", c.weight_decay}};
}

void AdamW::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->rows(), p.value->cols());
      v_.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("AdamW: parameter list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = *params[i].value;
    const Matrix& g = *params[i].grad;
    if (!w.same_shape(g) || !w.same_shape(m_[i])) throw std::invalid_argument("AdamW: shape mismatch");
    const double wd = params[i].decay ? config_.weight_decay : 0.0;
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t e = 0; e < w.size(); ++e) {
      m[e] = config_.beta1 * m[e] + (1.0 - config_.beta1) * g[e];
      v[e] = config_.beta2 * v[e] + (1.0 - config_.beta2) * g[e] * g[e];
      const double mh = m[e] / bc1, vh = v[e] / bc2;
      w[e] -= config_.lr * (mh / (std::sqrt(vh) + config_.eps) + wd * w[e]);
    }
  }
}

}  // namespace corefcl
