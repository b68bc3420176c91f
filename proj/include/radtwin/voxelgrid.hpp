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
#include <utility>
#include <vector>

#include "radtwin/geometry.hpp"
#include "radtwin/scene.hpp"

namespace radtwin {

struct OccupiedVoxel {
    std::array<int, 3> index; // (ix, iy, iz)
    Vec3 center;
    int point_count = 0;
};

/// Occupancy grid over the room volume. Grid indices run x-fastest in the
/// dense cell array; the occupied list is sorted lexicographically by
/// (ix, iy, iz). Immutable after construction.
struct VoxelGrid {
    Vec3 voxel_size;
    std::array<int, 3> grid_dims{}; // (W', H', D') cells along x, y, z
    Vec3 origin;                    // room minimum corner
    Vec3 room_dims;
    std::vector<OccupiedVoxel> occupied;

    std::size_t num_occupied() const { return occupied.size(); }
    std::size_t num_cells() const {
        return static_cast<std::size_t>(grid_dims[0]) * grid_dims[1] * grid_dims[2];
    }

    int cell_linear(int ix, int iy, int iz) const {
        return (iz * grid_dims[1] + iy) * grid_dims[0] + ix;
    }

    /// Occupied-list index at a cell, or -1 when the cell is empty.
    int occupied_at(int ix, int iy, int iz) const { return cell_to_occupied_[static_cast<std::size_t>(cell_linear(ix, iy, iz))]; }

    /// Cell index of a point inside the room. Binning is half-open per axis;
    /// points exactly on the room's max boundary land in the last cell.
    /// Throws std::invalid_argument("point out of bounds") otherwise.
    std::array<int, 3> cell_of_point(const Vec3 &p) const;

    void rebuild_lookup();

private:
    std::vector<std::int32_t> cell_to_occupied_;
};

/// Bins the cloud into voxels and keeps cells holding at least min_points
/// points. Grid dims are ceil(room_dims / voxel_size) per axis.
VoxelGrid voxelize(const PointCloud &cloud, const Vec3 &room_dims, const Vec3 &voxel_size,
                   int min_points);

/// Axis-aligned bounds of occupied voxel k; max - min equals voxel_size.
std::pair<Vec3, Vec3> voxel_aabb(const VoxelGrid &grid, std::size_t k);

nlohmann::json voxelgrid_to_json(const VoxelGrid &grid);
VoxelGrid voxelgrid_from_json(const nlohmann::json &j);
void save_voxelgrid(const VoxelGrid &grid, const std::string &path);
VoxelGrid load_voxelgrid(const std::string &path);

} // namespace radtwin
