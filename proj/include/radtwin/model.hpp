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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radtwin/emrt.hpp"
#include "radtwin/geometry.hpp"
#include "radtwin/nn/optim.hpp"
#include "radtwin/nn/tape.hpp"
#include "radtwin/oracle.hpp"
#include "radtwin/voxelgrid.hpp"

#include <json.hpp>

namespace radtwin {

/// Network hyperparameters. Targets live in a normalized domain: ground-truth
/// path loss in dB is mapped affinely from [0, loss_range_db] to [0, 1], so
/// s_max = 1 bounds every prediction. loss_range_db deliberately exceeds the
/// oracle's 250 dB no-signal floor: the bulk of the spectrum sits at the
/// floor, and mapping it onto the clamp boundary saturates the head and
/// freezes the gradient for the entire batch.
struct ModelConfig {
    std::string kind = "radtwin"; // "radtwin" or "mlp"
    int d_local = 32;
    int d_global = 16;
    std::array<int, 3> conv_channels{64, 256, 768};
    int n_decoder_layers = 3;
    int n_heads = 1; // single-head attention
    int d_hidden = 128;
    double dropout = 0.1;
    int pe_bands_pos = 10;
    int pe_bands_dir = 4;
    double s_max = 1.0;
    double loss_range_db = 320.0; // 250 dB floor maps to 0.78125, interior of [0, 1]
    /// The output head starts flat: projection weights at zero and the bias
    /// mid-range. A spread initialization saturates part of every batch
    /// against the clamp or the ReLU, whose flat regions give no gradient
    /// to pull samples back.
    double head_bias_init = 0.5;
    int n_max_los = 16;
    double window_theta_deg = 10.0;
    double window_phi_deg = 10.0;
    bool use_los_mask = true;

    int voxel_feature_width() const { return d_local + d_global; }
    int query_feature_width() const { return 6 * pe_bands_pos + 6 * pe_bands_dir; }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json &j);
};

/// Per-scene voxel features: row k holds [f_k ; f_global] for occupied
/// voxel k in grid order.
struct SceneEncoding {
    nn::TensorPtr voxel_features; // [K, d_local + d_global]
    const VoxelGrid *grid = nullptr;
};

struct Query {
    Vec3 rx;
    double theta_deg = 0.0;
    double phi_deg = 0.0;
};

/// Maps ground-truth dB path loss into the normalized target domain.
double normalize_loss_db(double loss_db, double range_db);

/// The propagation network (scenario encoder + masked-attention decoder) or
/// the geometry-blind MLP baseline, selected by config.kind. One instance is
/// confined to a single thread while training; inference against frozen
/// parameters may run from several threads using separate tapes.
class Model {
public:
    Model(const ModelConfig &config, std::uint64_t init_seed);

    const ModelConfig &config() const { return config_; }
    nn::ParamStore &params() { return params_; }
    const nn::ParamStore &params() const { return params_; }

    /// Voxel-feature extraction: positional-encoded centers through the
    /// local FC, scattered into a dense grid for the conv stack, pooled and
    /// projected to the global feature, concatenated per voxel.
    /// Throws std::runtime_error("empty scene encoding") when K = 0.
    SceneEncoding encode_scene(nn::Tape &tape, const VoxelGrid &grid) const;

    /// Positional-encoded (rx, direction) features, one row per query.
    std::vector<double> query_features(const std::vector<Query> &queries,
                                       const Vec3 &room_dims) const;

    /// Query embedding through the projection FC. [B, d_hidden]
    nn::TensorPtr embed_queries(nn::Tape &tape, const std::vector<Query> &queries,
                                const Vec3 &room_dims) const;

    /// Decoder stack over an encoding that already includes the fallback
    /// row. idx lists the attended rows per query; pass nullptr for dense
    /// (all-rows) attention. Returns [B, 1] predictions in [0, s_max].
    nn::TensorPtr decode_features(nn::Tape &tape, const nn::TensorPtr &query_emb,
                                  const nn::TensorPtr &features_with_fallback,
                                  const nn::AttentionIndices *idx, bool training,
                                  Rng *dropout_rng) const;

    /// Appends the learned fallback token row to the encoding. [K+1, width]
    nn::TensorPtr with_fallback(nn::Tape &tape, const SceneEncoding &enc) const;

    /// Attention row lists from per-sample masks; the fallback row (index K)
    /// is always attended.
    nn::AttentionIndices attention_indices(const std::vector<const LosMask *> &masks,
                                           std::size_t K) const;

    /// Single-query decode through the sparse masked path.
    double decode(nn::Tape &tape, const nn::TensorPtr &query_emb, const SceneEncoding &enc,
                  const LosMask &mask, bool training = false, Rng *dropout_rng = nullptr) const;

    /// MLP baseline forward: four FC layers over the query features, same
    /// output clamp, no geometry input.
    nn::TensorPtr mlp_forward(nn::Tape &tape, const nn::TensorPtr &query_features) const;

    /// Batched forward for either kind. enc and idx are ignored by the MLP.
    nn::TensorPtr forward_batch(nn::Tape &tape, const std::vector<Query> &queries,
                                const SceneEncoding *enc, const nn::AttentionIndices *idx,
                                bool training, Rng *dropout_rng) const;

    /// Full spectrum at one receiver: one decode per grid direction against
    /// the cached LOS map, assembled phi-row-major. Eval mode.
    SpatialSpectrum predict_spectrum(const SceneEncoding &enc, const Vec3 &rx,
                                     const DirectionGrid &dirs, const LosMap &los) const;

    /// Convenience spectrum for the MLP baseline (no encoding needed).
    SpatialSpectrum predict_spectrum_mlp(const Vec3 &rx, const Vec3 &room_dims,
                                         const DirectionGrid &dirs) const;

private:
    ModelConfig config_;
    nn::ParamStore params_;
};

/// Builds a model and restores parameters from a checkpoint file.
Model load_model(const std::string &checkpoint_path);
void save_model(const Model &model, const std::string &checkpoint_path);

} // namespace radtwin
