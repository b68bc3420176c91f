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

#include "radtwin/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "radtwin/nn/threadpool.hpp"

namespace radtwin::nn {

TensorPtr ParamStore::add(const std::string &name, std::vector<int> shape) {
    if (find(name))
        throw std::invalid_argument("duplicate parameter name: " + name);
    TensorPtr t = make_tensor(std::move(shape), true);
    items_.emplace_back(name, t);
    return t;
}

TensorPtr ParamStore::find(const std::string &name) const {
    for (const auto &[n, t] : items_)
        if (n == name)
            return t;
    return nullptr;
}

std::int64_t ParamStore::total_parameters() const {
    std::int64_t total = 0;
    for (const auto &[n, t] : items_)
        total += t->numel();
    return total;
}

void ParamStore::zero_grad() {
    for (auto &[n, t] : items_)
        t->zero_grad();
}

void init_uniform_fan_in(const TensorPtr &t, int fan_in, Rng &rng) {
    if (fan_in < 1)
        throw std::invalid_argument("fan_in must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double &v : t->data)
        v = rng.uniform(-bound, bound);
}

void init_constant(const TensorPtr &t, double value) {
    std::fill(t->data.begin(), t->data.end(), value);
}

AdamState AdamState::create(const ParamStore &params, double lr) {
    AdamState state;
    state.lr = lr;
    for (const auto &[name, t] : params.items()) {
        state.m.emplace_back(t->data.size(), 0.0);
        state.v.emplace_back(t->data.size(), 0.0);
    }
    return state;
}

void adam_step(ParamStore &params, AdamState &state) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam state does not match parameter store");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor &t = *params.items()[p].second;
        if (t.grad.empty())
            continue;
        std::vector<double> &m = state.m[p];
        std::vector<double> &v = state.v[p];
        const std::int64_t n = static_cast<std::int64_t>(t.data.size());
        auto body = [&](int, std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const double g = t.grad[static_cast<std::size_t>(i)];
                double &mi = m[static_cast<std::size_t>(i)];
                double &vi = v[static_cast<std::size_t>(i)];
                mi = state.beta1 * mi + (1.0 - state.beta1) * g;
                vi = state.beta2 * vi + (1.0 - state.beta2) * g * g;
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                t.data[static_cast<std::size_t>(i)] -=
                    state.lr * mhat / (std::sqrt(vhat) + state.eps);
            }
        };
        if (n >= (1 << 16))
            ThreadPool::instance().parallel_for(n, body);
        else
            body(0, 0, n);
    }
}

void step_lr(AdamState &state, int epoch, double gamma, int every) {
    if (every < 1)
        throw std::invalid_argument("step_lr interval must be positive");
    if (epoch >= 1 && epoch % every == 0)
        state.lr *= gamma;
}

} // namespace radtwin::nn
