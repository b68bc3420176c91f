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

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "radtwin/nn/tape.hpp"
#include "radtwin/rng.hpp"

namespace radtwin::testsupport {

inline void fill_uniform(const nn::TensorPtr &t, Rng &rng, double lo = -1.0, double hi = 1.0) {
    for (double &v : t->data)
        v = rng.uniform(lo, hi);
}

/// Pushes values away from |v| < margin so kinked ops (relu, clamp) stay
/// differentiable at the probe points.
inline void avoid_kink(const nn::TensorPtr &t, double margin = 0.05) {
    for (double &v : t->data)
        if (std::fabs(v) < margin)
            v = v < 0.0 ? v - margin : v + margin;
}

/// Central finite-difference check of reverse-mode gradients. The builder
/// recomputes a scalar loss from the current leaf values on every call.
inline void check_gradients(const std::function<nn::TensorPtr(nn::Tape &)> &build,
                            const std::vector<nn::TensorPtr> &leaves, double tol = 1e-4,
                            double h = 1e-5) {
    nn::Tape tape;
    nn::TensorPtr loss = build(tape);
    REQUIRE(loss->numel() == 1);
    for (const nn::TensorPtr &leaf : leaves)
        leaf->zero_grad();
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const nn::TensorPtr &leaf : leaves) {
        leaf->ensure_grad();
        analytic.push_back(leaf->grad);
    }
    tape.clear();

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const nn::TensorPtr &leaf = leaves[li];
        for (std::size_t i = 0; i < leaf->data.size(); ++i) {
            const double saved = leaf->data[i];

            leaf->data[i] = saved + h;
            nn::Tape tp;
            tp.recording = false;
            const double lp = build(tp)->data[0];

            leaf->data[i] = saved - h;
            nn::Tape tm;
            tm.recording = false;
            const double lm = build(tm)->data[0];

            leaf->data[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[li][i];
            const double scale = std::max({1.0, std::fabs(an), std::fabs(fd)});
            CHECK(std::fabs(an - fd) <= tol * scale);
        }
    }
}

} // namespace radtwin::testsupport
