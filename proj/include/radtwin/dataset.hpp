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

#include "radtwin/emrt.hpp"
#include "radtwin/oracle.hpp"
#include "radtwin/scene.hpp"
#include "radtwin/voxelgrid.hpp"

#include <json.hpp>

namespace radtwin {

struct DatasetConfig {
    SceneConfig scene_config;
    int n_scenes = 8;
    int n_rx = 100;
    std::uint64_t n_points = 25000;
    Vec3 voxel_size{0.5, 0.5, 0.5};
    int min_points_per_voxel = 2;
    int n_theta = 36;
    int n_phi = 19;
    OracleConfig oracle;
    double min_rx_tx_distance = 0.1;
    std::uint64_t seed = 1;

    DirectionGrid direction_grid() const { return DirectionGrid(n_theta, n_phi); }

    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json &j);
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<std::string> scene_ids;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json &j);
};

/// Everything the trainer needs for one scene, loaded from the dataset dir.
struct SceneData {
    Scene scene;
    VoxelGrid grid;
    SceneSpectra spectra;         // ground-truth path loss, dB
    std::vector<LosMap> los_maps; // one per RX, aligned with spectra rows
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SceneData> scenes; // aligned with manifest.scene_ids
};

/// Generates scenes, samples clouds, voxelizes, runs the channel oracle for
/// every RX and precomputes LOS maps; writes one file set per scene plus
/// manifest.json. RX positions are uniform in the room volume, rejected when
/// strictly inside an obstacle or too close to the TX. Deterministic per
/// config seed, including output bytes.
DatasetManifest build_dataset(const DatasetConfig &config, const std::string &out_dir);

void save_manifest(const DatasetManifest &manifest, const std::string &path);
DatasetManifest load_manifest(const std::string &path);

Dataset load_dataset(const std::string &dir);

/// Per-scene LOS map cache, little-endian binary.
void save_los_maps(const std::vector<LosMap> &maps, const std::string &path);
std::vector<LosMap> load_los_maps(const std::string &path);

} // namespace radtwin
