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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radtwin/geometry.hpp"
#include "radtwin/voxelgrid.hpp"

namespace radtwin {

/// Spherical direction grid. theta is azimuth in [0, 360) covering the full
/// circle in n_theta steps; phi is inclination from +Z in [0, 180] covering
/// both poles in n_phi samples ((n_phi - 1) steps).
struct DirectionGrid {
    int n_theta = 0;
    int n_phi = 0;
    double theta_step_deg = 0.0;
    double phi_step_deg = 0.0;

    DirectionGrid(int n_theta_, int n_phi_);

    static DirectionGrid ten_degree() { return DirectionGrid(36, 19); }

    double theta_deg(int i) const { return i * theta_step_deg; }
    double phi_deg(int j) const { return j * phi_step_deg; }
    int size() const { return n_theta * n_phi; }
    int linear(int i_theta, int j_phi) const { return i_theta * n_phi + j_phi; }
};

/// Unit direction for azimuth theta (from +X, counterclockwise about +Z) and
/// inclination phi (from +Z). phi = 0 points at the zenith, phi = 90 is
/// horizontal, phi = 180 points straight down.
Vec3 direction_vector(double theta_deg, double phi_deg);

/// AABB slab intersection. Returns (t_enter, t_exit) when the ray meets the
/// box ahead of (or around) the origin: t_enter < t_exit and t_exit > 0.
/// A zero direction component degenerates to an infinite slab when the
/// origin lies inside that axis interval and to a miss otherwise.
std::optional<std::pair<double, double>> ray_box_intersect(const Vec3 &origin, const Vec3 &dir,
                                                           const Vec3 &box_min,
                                                           const Vec3 &box_max);

/// Per-receiver line-of-sight map: nearest occupied voxel per grid direction,
/// -1 where the ray leaves the grid unobstructed. The voxel containing the
/// receiver itself is never reported.
struct LosMap {
    Vec3 rx_position;
    int n_theta = 0;
    int n_phi = 0;
    std::vector<std::int32_t> hits; // n_theta * n_phi, theta-major

    std::int32_t hit(int i_theta, int j_phi) const {
        return hits[static_cast<std::size_t>(i_theta * n_phi + j_phi)];
    }
};

LosMap build_los_map(const Vec3 &rx, const VoxelGrid &grid, const DirectionGrid &dirs);

/// Union of LOS hits over grid directions within the angular window
/// [theta +- d_theta] x [phi +- d_phi]; theta wraps modulo 360, phi clamps
/// to [0, 180]. Result is sorted and duplicate-free.
std::vector<int> aggregate_window(const LosMap &map, double theta_deg, double phi_deg,
                                  double d_theta_deg, double d_phi_deg);

/// Sparse attention mask over the occupied voxels of a grid. binary_mask[k]
/// is 0 exactly when voxel k may be attended (k in los_voxels), 1 otherwise.
struct LosMask {
    Vec3 rx_position;
    double theta_deg = 0.0;
    double phi_deg = 0.0;
    std::vector<std::int32_t> los_voxels; // sorted by voxel index, size <= n_max
    std::vector<std::uint8_t> binary_mask; // length K
};

/// Keeps at most n_max voxels, nearest to the receiver first (ties broken by
/// voxel index), and encodes the binary mask. An empty input produces an
/// all-ones mask.
LosMask build_mask(const std::vector<int> &voxels, const Vec3 &rx, const VoxelGrid &grid,
                   int n_max, double theta_deg = 0.0, double phi_deg = 0.0);

/// CSV dump, one row per grid direction: theta,phi,voxel_index (-1 for none).
std::string los_map_to_csv(const LosMap &map, const DirectionGrid &dirs);

} // namespace radtwin
