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

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "radtwin/nn/tensor.hpp"

namespace radtwin::nn {

/// Sinusoidal positional encoding: per input coordinate, L frequency bands
/// of (sin, cos) pairs at 2^l * pi. Inputs are expected in [-1, 1].
std::vector<double> positional_encoding(const std::vector<double> &p, int L);

/// Row index lists for sparse cross-attention: sample b attends to key rows
/// flat[offsets[b] .. offsets[b+1]).
struct AttentionIndices {
    std::vector<std::int32_t> flat;
    std::vector<std::int32_t> offsets; // size = batch + 1

    int batch() const { return static_cast<int>(offsets.size()) - 1; }
};

/// Reverse-mode tape over a fixed op set. Ops compute eagerly and, while
/// `recording` is set, push a backward step. The architecture is static, so
/// no general expression graph is needed. A Tape instance is confined to one
/// thread; kernels may parallelize internally.
class Tape {
public:
    bool recording = true;

    /// Leaf constant (no gradient).
    TensorPtr constant(std::vector<int> shape, std::vector<double> data);

    // --- core ops ------------------------------------------------------
    TensorPtr matmul(const TensorPtr &a, const TensorPtr &b);    // [m,k]x[k,n]
    TensorPtr matmul_nt(const TensorPtr &a, const TensorPtr &b); // [m,k]x[n,k]^T
    TensorPtr linear(const TensorPtr &x, const TensorPtr &w, const TensorPtr &b);
    TensorPtr add(const TensorPtr &a, const TensorPtr &b);
    TensorPtr relu(const TensorPtr &x);
    TensorPtr scale(const TensorPtr &x, double s);
    TensorPtr clamp_max(const TensorPtr &x, double cap);
    TensorPtr layer_norm(const TensorPtr &x, const TensorPtr &gamma, const TensorPtr &beta,
                         double eps = 1e-5);
    TensorPtr softmax_lastdim(const TensorPtr &x);
    TensorPtr dropout(const TensorPtr &x, double rate, bool training, std::uint64_t seed);
    TensorPtr conv3d(const TensorPtr &x, const TensorPtr &kernels, int stride, int padding);
    TensorPtr global_avg_pool(const TensorPtr &x); // [C,D,H,W] -> [1,C]

    // --- structural ops --------------------------------------------------
    TensorPtr concat_rows(const TensorPtr &a, const TensorPtr &b);
    TensorPtr concat_cols(const TensorPtr &a, const TensorPtr &b);
    TensorPtr repeat_row(const TensorPtr &x, int n_rows); // [1,d] -> [n,d]
    TensorPtr gather_rows(const TensorPtr &x, const std::vector<int> &rows);
    /// Places row k of x (shape [K,C]) at volume cell cells[k]; zeros
    /// elsewhere. Output is [C, dims[0], dims[1], dims[2]].
    TensorPtr scatter_rows(const TensorPtr &x, const std::vector<int> &cells,
                           const std::array<int, 3> &dims);

    // --- attention -------------------------------------------------------
    /// Masked cross-attention per softmax((q K^T)/sqrt(d_k) + bias) V.
    /// mask_bias entries are 0 (attend) or a -inf surrogate; bias shape is
    /// [K] (shared) or [B,K]. Masked positions get exactly zero weight.
    /// Throws std::runtime_error("empty attention support") when a query row
    /// has every position masked.
    TensorPtr masked_cross_attention(const TensorPtr &q, const TensorPtr &k, const TensorPtr &v,
                                     const TensorPtr &mask_bias);

    /// Equivalent attention that only touches the listed key rows per query;
    /// used on batches with precomputed sparse masks.
    TensorPtr sparse_cross_attention(const TensorPtr &q, const TensorPtr &k, const TensorPtr &v,
                                     const AttentionIndices &idx);

    // --- loss ------------------------------------------------------------
    TensorPtr mse_loss(const TensorPtr &pred, const TensorPtr &target);

    /// Seeds d(loss)/d(loss) = 1 and runs recorded steps in reverse,
    /// accumulating into the grad buffers of every reachable tensor.
    /// Throws std::runtime_error when nothing was recorded or loss is not
    /// scalar.
    void backward(const TensorPtr &loss);

    /// Drops the recorded graph (and the activation buffers it holds).
    void clear();

    std::size_t num_steps() const { return steps_.size(); }

    /// The -inf surrogate used in mask biases.
    static constexpr double kMaskedBias = -1e30;

private:
    TensorPtr result(std::vector<int> shape, bool needs_grad);
    void record(std::function<void()> fn);

    std::vector<std::function<void()>> steps_;
};

} // namespace radtwin::nn
