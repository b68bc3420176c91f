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
#include <vector>

#include "radtwin/dataset.hpp"
#include "radtwin/model.hpp"

namespace radtwin {

/// Scene-level train/test partition. No receiver or sample ever crosses it.
struct SplitManifest {
    std::vector<std::string> train_scenes;
    std::vector<std::string> test_scenes;

    nlohmann::json to_json() const;
    static SplitManifest from_json(const nlohmann::json &j);
};

/// Shuffle-and-cut at scene granularity; train gets round(ratio * n) scenes,
/// at least one on each side. Throws for fewer than two scenes.
SplitManifest split_scenes(const std::vector<std::string> &scene_ids, double ratio,
                           std::uint64_t seed);

struct TrainConfig {
    ModelConfig model;
    int epochs = 30;
    int batch_size = 4096;
    double lr = 1e-3;
    double lr_gamma = 0.8;
    int lr_step_epochs = 3;
    double split_ratio = 0.8;
    int rx_per_scene = 0; // 0 = all receivers; otherwise the first N per train scene
    std::uint64_t seed = 1;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json &j);
};

/// One mini-batch; every sample comes from the same scene so the encoding is
/// computed once. sample = rx_index * n_directions + direction_linear.
struct EpochBatch {
    int scene = 0; // index into the trainer's scene list
    std::vector<std::int32_t> samples;
};

/// Scene-aware batching: scene order and intra-scene sample order reshuffled
/// per epoch; each scene's samples are cut into batch_size runs (last one
/// short). The union over an epoch is exactly the sample set.
std::vector<EpochBatch> scene_aware_batches(const std::vector<std::int64_t> &samples_per_scene,
                                            int batch_size, std::uint64_t seed, int epoch);

struct TrainResult {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_lr;
    SplitManifest split;
    std::string checkpoint_path;
};

/// Trains on the split's train scenes: Adam, step LR schedule, scene-aware
/// batches, checkpoint written every epoch (same path, last epoch persists),
/// loss curve CSV (epoch, lr, train_loss). Aborts with NumericError when the
/// loss stops being finite.
TrainResult train_model(const TrainConfig &config, const Dataset &dataset,
                        const std::string &out_dir);

struct EvalRecord {
    std::string scene_id;
    int rx_index = 0;
    double nmse_db = 0.0;
    double ssim = 0.0;
};

struct EvalSummary {
    std::vector<EvalRecord> records;
    double median_nmse_db = 0.0;
    double median_ssim = 0.0;
    double p90_ssim = 0.0;
    double p10_ssim = 0.0;
    double p90_nmse_db = 0.0;
    double mean_nmse_db = 0.0;
    double mean_ssim = 0.0;

    nlohmann::json to_json() const;
};

/// Synthesizes a spectrum per (scene, RX) over the given scenes and scores
/// it against the oracle ground truth in the normalized target domain.
EvalSummary evaluate_model(const Model &model, const Dataset &dataset,
                           const std::vector<std::string> &scene_ids);

} // namespace radtwin
