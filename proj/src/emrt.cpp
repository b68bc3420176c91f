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

#include "radtwin/emrt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace radtwin {

DirectionGrid::DirectionGrid(int n_theta_, int n_phi_) : n_theta(n_theta_), n_phi(n_phi_) {
    if (n_theta < 1 || n_phi < 2)
        throw std::invalid_argument("direction grid needs n_theta >= 1 and n_phi >= 2");
    theta_step_deg = 360.0 / n_theta;
    phi_step_deg = 180.0 / (n_phi - 1);
}

Vec3 direction_vector(double theta_deg, double phi_deg) {
    const double theta = deg_to_rad(theta_deg);
    const double phi = deg_to_rad(phi_deg);
    const double sin_phi = std::sin(phi);
    return {sin_phi * std::cos(theta), sin_phi * std::sin(theta), std::cos(phi)};
}

std::optional<std::pair<double, double>> ray_box_intersect(const Vec3 &origin, const Vec3 &dir,
                                                           const Vec3 &box_min,
                                                           const Vec3 &box_max) {
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();

    for (int axis = 0; axis < 3; ++axis) {
        const double p = origin[axis];
        const double d = dir[axis];
        const double lo = box_min[axis];
        const double hi = box_max[axis];
        if (d == 0.0) {
            // Ray parallel to the slab: either always inside it or never.
            if (p < lo || p > hi)
                return std::nullopt;
            continue;
        }
        const double t1 = (lo - p) / d;
        const double t2 = (hi - p) / d;
        t_enter = std::max(t_enter, std::min(t1, t2));
        t_exit = std::min(t_exit, std::max(t1, t2));
    }

    if (t_enter < t_exit && t_exit > 0.0)
        return std::make_pair(t_enter, t_exit);
    return std::nullopt;
}

LosMap build_los_map(const Vec3 &rx, const VoxelGrid &grid, const DirectionGrid &dirs) {
    const Box3 room{grid.origin, grid.origin + grid.room_dims};
    if (!room.contains(rx))
        throw std::invalid_argument("receiver out of bounds");

    // Skip the voxel the receiver sits in, if occupied; every ray would
    // otherwise terminate at distance zero.
    const std::array<int, 3> rx_cell = grid.cell_of_point(rx);
    const int self = grid.occupied_at(rx_cell[0], rx_cell[1], rx_cell[2]);

    LosMap map;
    map.rx_position = rx;
    map.n_theta = dirs.n_theta;
    map.n_phi = dirs.n_phi;
    map.hits.assign(static_cast<std::size_t>(dirs.size()), -1);

    const std::size_t K = grid.num_occupied();
    for (int i = 0; i < dirs.n_theta; ++i) {
        for (int j = 0; j < dirs.n_phi; ++j) {
            const Vec3 d = direction_vector(dirs.theta_deg(i), dirs.phi_deg(j));
            double best_t = std::numeric_limits<double>::infinity();
            std::int32_t best_k = -1;
            for (std::size_t k = 0; k < K; ++k) {
                if (static_cast<int>(k) == self)
                    continue;
                const auto [lo, hi] = voxel_aabb(grid, k);
                const auto hit = ray_box_intersect(rx, d, lo, hi);
                if (hit && hit->first < best_t) {
                    best_t = hit->first;
                    best_k = static_cast<std::int32_t>(k);
                }
            }
            map.hits[static_cast<std::size_t>(dirs.linear(i, j))] = best_k;
        }
    }
    return map;
}

namespace {

// Smallest absolute angular distance on the 360-degree circle.
double circular_delta_deg(double a, double b) {
    double d = std::fmod(std::fabs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

} // namespace

std::vector<int> aggregate_window(const LosMap &map, double theta_deg, double phi_deg,
                                  double d_theta_deg, double d_phi_deg) {
    if (d_theta_deg < 0.0 || d_phi_deg < 0.0)
        throw std::invalid_argument("window half-widths must be non-negative");

    const double theta_step = 360.0 / map.n_theta;
    const double phi_step = 180.0 / (map.n_phi - 1);
    const double eps = 1e-9;

    std::set<int> voxels;
    for (int i = 0; i < map.n_theta; ++i) {
        if (circular_delta_deg(i * theta_step, theta_deg) > d_theta_deg + eps)
            continue;
        for (int j = 0; j < map.n_phi; ++j) {
            if (std::fabs(j * phi_step - phi_deg) > d_phi_deg + eps)
                continue;
            const std::int32_t hit = map.hit(i, j);
            if (hit >= 0)
                voxels.insert(hit);
        }
    }
    return {voxels.begin(), voxels.end()};
}

LosMask build_mask(const std::vector<int> &voxels, const Vec3 &rx, const VoxelGrid &grid,
                   int n_max, double theta_deg, double phi_deg) {
    if (n_max < 1)
        throw std::invalid_argument("n_max must be at least 1");

    LosMask mask;
    mask.rx_position = rx;
    mask.theta_deg = theta_deg;
    mask.phi_deg = phi_deg;
    mask.binary_mask.assign(grid.num_occupied(), 1);

    std::vector<int> kept = voxels;
    if (static_cast<int>(kept.size()) > n_max) {
        // Nearest centers win; ties resolve to the smaller voxel index.
        std::sort(kept.begin(), kept.end(), [&](int a, int b) {
            const double da = distance(grid.occupied[static_cast<std::size_t>(a)].center, rx);
            const double db = distance(grid.occupied[static_cast<std::size_t>(b)].center, rx);
            if (da != db)
                return da < db;
            return a < b;
        });
        kept.resize(static_cast<std::size_t>(n_max));
    }
    std::sort(kept.begin(), kept.end());

    for (const int k : kept) {
        mask.los_voxels.push_back(static_cast<std::int32_t>(k));
        mask.binary_mask[static_cast<std::size_t>(k)] = 0;
    }
    return mask;
}

std::string los_map_to_csv(const LosMap &map, const DirectionGrid &dirs) {
    std::ostringstream os;
    os << "theta,phi,voxel_index\n";
    for (int i = 0; i < dirs.n_theta; ++i)
        for (int j = 0; j < dirs.n_phi; ++j)
            os << dirs.theta_deg(i) << "," << dirs.phi_deg(j) << "," << map.hit(i, j) << "\n";
    return os.str();
}

} // namespace radtwin
