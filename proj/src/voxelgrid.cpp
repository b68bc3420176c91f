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

#include "radtwin/voxelgrid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "radtwin/errors.hpp"

namespace radtwin {

namespace {

int bin_axis(double p, double origin, double step, int dim, double room_extent) {
    const double local = p - origin;
    if (local < 0.0 || local > room_extent)
        throw std::invalid_argument("point out of bounds");
    // Half-open intervals; the room's max boundary folds into the last cell.
    int idx = static_cast<int>(std::floor(local / step));
    if (idx >= dim)
        idx = dim - 1;
    return idx;
}

} // namespace

std::array<int, 3> VoxelGrid::cell_of_point(const Vec3 &p) const {
    return {bin_axis(p.x, origin.x, voxel_size.x, grid_dims[0], room_dims.x),
            bin_axis(p.y, origin.y, voxel_size.y, grid_dims[1], room_dims.y),
            bin_axis(p.z, origin.z, voxel_size.z, grid_dims[2], room_dims.z)};
}

void VoxelGrid::rebuild_lookup() {
    cell_to_occupied_.assign(num_cells(), -1);
    for (std::size_t k = 0; k < occupied.size(); ++k) {
        const auto &idx = occupied[k].index;
        cell_to_occupied_[static_cast<std::size_t>(cell_linear(idx[0], idx[1], idx[2]))] =
            static_cast<std::int32_t>(k);
    }
}

VoxelGrid voxelize(const PointCloud &cloud, const Vec3 &room_dims, const Vec3 &voxel_size,
                   int min_points) {
    if (voxel_size.x <= 0.0 || voxel_size.y <= 0.0 || voxel_size.z <= 0.0)
        throw std::invalid_argument("voxel_size must be strictly positive");
    if (min_points < 1)
        throw std::invalid_argument("min_points must be at least 1");

    VoxelGrid grid;
    grid.voxel_size = voxel_size;
    grid.origin = {0.0, 0.0, 0.0};
    grid.room_dims = room_dims;
    grid.grid_dims = {static_cast<int>(std::ceil(room_dims.x / voxel_size.x)),
                      static_cast<int>(std::ceil(room_dims.y / voxel_size.y)),
                      static_cast<int>(std::ceil(room_dims.z / voxel_size.z))};

    std::vector<int> counts(grid.num_cells(), 0);
    for (const Vec3 &p : cloud.points) {
        const std::array<int, 3> c = grid.cell_of_point(p);
        ++counts[static_cast<std::size_t>(grid.cell_linear(c[0], c[1], c[2]))];
    }

    // Lexicographic (ix, iy, iz) order for the occupied list.
    for (int ix = 0; ix < grid.grid_dims[0]; ++ix)
        for (int iy = 0; iy < grid.grid_dims[1]; ++iy)
            for (int iz = 0; iz < grid.grid_dims[2]; ++iz) {
                const int n = counts[static_cast<std::size_t>(grid.cell_linear(ix, iy, iz))];
                if (n < min_points)
                    continue;
                OccupiedVoxel v;
                v.index = {ix, iy, iz};
                v.center = {grid.origin.x + (ix + 0.5) * voxel_size.x,
                            grid.origin.y + (iy + 0.5) * voxel_size.y,
                            grid.origin.z + (iz + 0.5) * voxel_size.z};
                v.point_count = n;
                grid.occupied.push_back(v);
            }

    grid.rebuild_lookup();
    return grid;
}

std::pair<Vec3, Vec3> voxel_aabb(const VoxelGrid &grid, std::size_t k) {
    if (k >= grid.occupied.size())
        throw std::out_of_range("voxel index out of range");
    const auto &idx = grid.occupied[k].index;
    const Vec3 lo{grid.origin.x + idx[0] * grid.voxel_size.x,
                  grid.origin.y + idx[1] * grid.voxel_size.y,
                  grid.origin.z + idx[2] * grid.voxel_size.z};
    return {lo, lo + grid.voxel_size};
}

nlohmann::json voxelgrid_to_json(const VoxelGrid &grid) {
    nlohmann::json occupied = nlohmann::json::array();
    for (const OccupiedVoxel &v : grid.occupied)
        occupied.push_back({{"index", v.index},
                            {"center", v.center.to_array()},
                            {"point_count", v.point_count}});
    return {{"voxel_size", grid.voxel_size.to_array()},
            {"grid_dims", grid.grid_dims},
            {"origin", grid.origin.to_array()},
            {"room_dims", grid.room_dims.to_array()},
            {"occupied", occupied}};
}

VoxelGrid voxelgrid_from_json(const nlohmann::json &j) {
    VoxelGrid grid;
    grid.voxel_size = Vec3::from_array(j.at("voxel_size").get<std::array<double, 3>>());
    grid.grid_dims = j.at("grid_dims").get<std::array<int, 3>>();
    grid.origin = Vec3::from_array(j.at("origin").get<std::array<double, 3>>());
    grid.room_dims = Vec3::from_array(j.at("room_dims").get<std::array<double, 3>>());
    for (const auto &o : j.at("occupied")) {
        OccupiedVoxel v;
        v.index = o.at("index").get<std::array<int, 3>>();
        v.center = Vec3::from_array(o.at("center").get<std::array<double, 3>>());
        v.point_count = o.at("point_count").get<int>();
        grid.occupied.push_back(v);
    }
    grid.rebuild_lookup();
    return grid;
}

void save_voxelgrid(const VoxelGrid &grid, const std::string &path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os << voxelgrid_to_json(grid).dump(2) << "\n";
}

VoxelGrid load_voxelgrid(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw MissingArtifactError("cannot open voxel grid file: " + path);
    nlohmann::json j;
    is >> j;
    return voxelgrid_from_json(j);
}

} // namespace radtwin
