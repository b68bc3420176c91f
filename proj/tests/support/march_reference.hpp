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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "radtwin/geometry.hpp"
#include "radtwin/voxelgrid.hpp"

namespace radtwin::testsupport {

/// Brute-force LOS reference, independent of the slab-method tracer: marches
/// the ray in fixed 1 cm steps and, inside each step, enumerates the cell
/// boundary crossings exactly in crossing order so that traversals shorter
/// than one step are still visited. Returns the occupied-voxel index of the
/// first occupied cell along the ray (the receiver's own cell excluded), or
/// -1 when the ray leaves the grid first.
inline std::int32_t march_los_reference(const Vec3 &rx, const Vec3 &dir, const VoxelGrid &grid,
                                        double step = 0.01) {
    const std::array<int, 3> self = grid.cell_of_point(rx);
    std::array<int, 3> cell = self;

    struct Crossing {
        double t;
        int axis;
        int sign;
    };

    const double t_max = grid.room_dims.norm() + 2.0 * step;
    double t_prev = 0.0;
    std::vector<Crossing> crossings;
    for (double t = step;; t += step) {
        crossings.clear();
        for (int a = 0; a < 3; ++a) {
            const double d = dir[a];
            if (d == 0.0)
                continue;
            const double vox = grid.voxel_size[a];
            const double c_prev = rx[a] - grid.origin[a] + d * t_prev;
            const double c_now = rx[a] - grid.origin[a] + d * t;
            if (d > 0.0) {
                const long k_lo = static_cast<long>(std::floor(c_prev / vox)) + 1;
                const long k_hi = static_cast<long>(std::floor(c_now / vox));
                for (long k = k_lo; k <= k_hi; ++k) {
                    const double tc = (static_cast<double>(k) * vox - (rx[a] - grid.origin[a])) / d;
                    if (tc > t_prev && tc <= t)
                        crossings.push_back({tc, a, +1});
                }
            } else {
                const long k_hi = static_cast<long>(std::ceil(c_prev / vox)) - 1;
                const long k_lo = static_cast<long>(std::ceil(c_now / vox));
                for (long k = k_hi; k >= k_lo; --k) {
                    const double tc = (static_cast<double>(k) * vox - (rx[a] - grid.origin[a])) / d;
                    if (tc > t_prev && tc <= t)
                        crossings.push_back({tc, a, -1});
                }
            }
        }
        std::sort(crossings.begin(), crossings.end(),
                  [](const Crossing &a, const Crossing &b) { return a.t < b.t; });

        for (const Crossing &c : crossings) {
            cell[static_cast<std::size_t>(c.axis)] += c.sign;
            if (cell[0] < 0 || cell[0] >= grid.grid_dims[0] || cell[1] < 0 ||
                cell[1] >= grid.grid_dims[1] || cell[2] < 0 || cell[2] >= grid.grid_dims[2])
                return -1; // left the grid without a hit
            if (cell != self) {
                const int occ = grid.occupied_at(cell[0], cell[1], cell[2]);
                if (occ >= 0)
                    return static_cast<std::int32_t>(occ);
            }
        }
        if (t > t_max)
            return -1;
        t_prev = t;
    }
}

} // namespace radtwin::testsupport
