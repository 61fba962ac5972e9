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

#ifndef COREFCL_OPTIM_HPP_
#define COREFCL_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "corefcl/tensor.hpp"
#include "json.hpp"

namespace corefcl {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

AdamWConfig adamw_config_from_json(const nlohmann::json& j, AdamWConfig defaults = {});
nlohmann::json to_json(const AdamWConfig& c);

struct ParamRef {
  Matrix* value;
  const Matrix* grad;
  bool decay;
};

// Decoupled weight decay (Loshchilov & Hutter):
//   p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)   (wd only where decay)
// Moment buffers are created on the first step and keyed by position, so the
// same parameter list must be passed on every call.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(const std::vector<ParamRef>& params);
  std::uint64_t steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace corefcl

#endif  // COREFCL_OPTIM_HPP_
