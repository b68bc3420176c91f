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
#include <string>
#include <vector>

#include "radtwin/geometry.hpp"

#include <json.hpp>

namespace radtwin {

enum class ObstacleKind { table, chair, shelf, cabinet };

const char *obstacle_kind_name(ObstacleKind kind);
ObstacleKind obstacle_kind_from_name(const std::string &name);

struct BoxObstacle {
    Vec3 min_corner;
    Vec3 max_corner;
    ObstacleKind kind = ObstacleKind::table;

    Box3 box() const { return {min_corner, max_corner}; }
};

/// An indoor scene: shoebox room spanning [0, room_dims] with axis-aligned
/// box obstacles standing on the floor and a fixed transmitter.
struct Scene {
    std::string id;
    Vec3 room_dims;   // width (x), depth (y), height (z), meters
    std::vector<BoxObstacle> obstacles;
    Vec3 tx_position;
    std::uint64_t layout_seed = 0;
};

struct ObstacleSizeRange {
    Vec3 min_size;
    Vec3 max_size;
};

struct SceneConfig {
    Vec3 room_dims{6.0, 4.0, 2.5};
    int min_obstacles = 3;
    int max_obstacles = 8;
    /// Size ranges indexed by ObstacleKind: table, chair, shelf, cabinet.
    std::array<ObstacleSizeRange, 4> kind_sizes{{
        {{1.2, 0.6, 0.70}, {2.0, 1.0, 0.80}}, // table
        {{0.4, 0.4, 0.80}, {0.5, 0.5, 1.00}}, // chair
        {{0.8, 0.3, 1.60}, {1.2, 0.4, 2.20}}, // shelf
        {{0.8, 0.4, 1.00}, {1.0, 0.6, 1.50}}, // cabinet
    }};
    /// TX sits near a room corner; the value is a convention, not a measurement.
    Vec3 tx_position{0.5, 0.5, 2.0};
    /// Obstacles keep this clearance from the vertical walls so side faces
    /// never coincide with a room face.
    double wall_margin = 0.05;
    int max_placement_retries = 100;
};

struct PointCloud {
    std::vector<Vec3> points;
    std::string source_scene;
};

/// Generates a furnished scene. Deterministic for a given (config, seed).
/// Obstacles are placed by rejection sampling; a box that would contain the
/// TX is re-drawn. Throws std::runtime_error("scene generation failed") when
/// placement cannot succeed within the retry budget.
Scene generate_scene(const SceneConfig &config, std::uint64_t seed);

/// Returns a copy of the scene with obstacle `index` translated by `delta`.
/// The id gains a move tag. Throws std::out_of_range for a bad index and
/// std::invalid_argument("invalid displacement") when the box would leave
/// the room interior.
Scene move_obstacle(const Scene &scene, std::size_t index, const Vec3 &delta);

/// Samples n_points on the scene surfaces (room faces and obstacle faces,
/// excluding obstacle bottoms resting on the floor), allocated across faces
/// proportionally to area, uniform within each face. Deterministic per seed.
PointCloud sample_point_cloud(const Scene &scene, std::size_t n_points, std::uint64_t seed);

/// Surface set used by the sampler; exposed for tests.
struct SurfaceFace {
    Vec3 origin;
    Vec3 edge_u;
    Vec3 edge_v;
    double area = 0.0;
    bool on_obstacle = false;
};
std::vector<SurfaceFace> scene_surfaces(const Scene &scene);

nlohmann::json scene_to_json(const Scene &scene);
Scene scene_from_json(const nlohmann::json &j);
void save_scene(const Scene &scene, const std::string &path);
Scene load_scene(const std::string &path);

/// Point cloud binary format: u64 count, then count x 3 float32, little-endian.
void save_point_cloud(const PointCloud &cloud, const std::string &path);
PointCloud load_point_cloud(const std::string &path);

} // namespace radtwin
