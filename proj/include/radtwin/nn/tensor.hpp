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

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace radtwin::nn {

/// Dense row-major tensor of 64-bit floats with an optional gradient buffer
/// of the same shape.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    std::int64_t numel() const {
        return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                               [](std::int64_t a, int d) { return a * d; });
    }

    int dim(std::size_t i) const { return shape[i]; }
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }

    void ensure_grad() {
        if (grad.empty())
            grad.assign(data.size(), 0.0);
    }

    void zero_grad() {
        if (!grad.empty())
            std::fill(grad.begin(), grad.end(), 0.0);
    }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    for (const int d : t->shape)
        if (d < 0)
            throw std::invalid_argument("negative tensor dimension");
    t->data.assign(static_cast<std::size_t>(t->numel()), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad)
        t->ensure_grad();
    return t;
}

inline TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data,
                             bool requires_grad = false) {
    auto t = make_tensor(std::move(shape), requires_grad);
    if (data.size() != t->data.size())
        throw std::invalid_argument("tensor data size does not match shape");
    t->data = std::move(data);
    return t;
}

} // namespace radtwin::nn
