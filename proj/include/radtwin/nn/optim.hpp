// radtwin - geometry-conditioned radio propagation prediction for dynamic indoor scenes
// Copyright (C) 2026 radtwin contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radtwin/nn/tensor.hpp"
#include "radtwin/rng.hpp"

namespace radtwin::nn {

/// Ordered, named parameter collection. Order is the registration order and
/// is stable, which keeps optimizer state aligned and checkpoints canonical.
class ParamStore {
public:
    TensorPtr add(const std::string &name, std::vector<int> shape);
    TensorPtr find(const std::string &name) const; // nullptr when absent

    const std::vector<std::pair<std::string, TensorPtr>> &items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::int64_t total_parameters() const;

    void zero_grad();

private:
    std::vector<std::pair<std::string, TensorPtr>> items_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
void init_uniform_fan_in(const TensorPtr &t, int fan_in, Rng &rng);
void init_constant(const TensorPtr &t, double value);

/// Adam with bias correction; one moment pair per parameter tensor,
/// aligned with the store order.
struct AdamState {
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState create(const ParamStore &params, double lr);
};

void adam_step(ParamStore &params, AdamState &state);

/// Multiplies the learning rate by gamma whenever the (1-based) epoch count
/// is divisible by `every`.
void step_lr(AdamState &state, int epoch, double gamma, int every);

} // namespace radtwin::nn
