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

#include <doctest.h>

#include <cmath>
#include <set>

#include "radtwin/emrt.hpp"
#include "radtwin/rng.hpp"
#include "radtwin/scene.hpp"
#include "support/march_reference.hpp"

using namespace radtwin;

namespace {

struct Fixture {
    Scene scene;
    VoxelGrid grid;
};

Fixture make_fixture(std::uint64_t seed, int min_obstacles = 2, int max_obstacles = 6) {
    SceneConfig config;
    config.min_obstacles = min_obstacles;
    config.max_obstacles = max_obstacles;
    Fixture f;
    f.scene = generate_scene(config, seed);
    const PointCloud cloud = sample_point_cloud(f.scene, 25000, derive_seed(seed, "cloud"));
    f.grid = voxelize(cloud, f.scene.room_dims, {0.5, 0.5, 0.5}, 2);
    return f;
}

Vec3 random_rx_inside(const Scene &scene, Rng &rng) {
    for (;;) {
        Vec3 rx{rng.uniform(0.05, scene.room_dims.x - 0.05),
                rng.uniform(0.05, scene.room_dims.y - 0.05),
                rng.uniform(0.05, scene.room_dims.z - 0.05)};
        bool inside = false;
        for (const BoxObstacle &obs : scene.obstacles)
            if (obs.box().contains_strict(rx))
                inside = true;
        if (!inside)
            return rx;
    }
}

} // namespace

TEST_CASE("direction_vector convention") {
    const Vec3 zenith = direction_vector(0.0, 0.0);
    CHECK(zenith.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zenith.z == doctest::Approx(1.0).epsilon(1e-12));

    const Vec3 px = direction_vector(0.0, 90.0);
    CHECK(px.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(px.y) < 1e-12);
    CHECK(std::fabs(px.z) < 1e-12);

    const Vec3 py = direction_vector(90.0, 90.0);
    CHECK(py.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(py.x) < 1e-12);

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Vec3 d = direction_vector(rng.uniform(0.0, 360.0), rng.uniform(0.0, 180.0));
        CHECK(std::fabs(d.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("direction grid invariants") {
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    CHECK(dirs.n_theta * dirs.theta_step_deg == doctest::Approx(360.0));
    CHECK((dirs.n_phi - 1) * dirs.phi_step_deg == doctest::Approx(180.0));
    CHECK(dirs.size() == 684);
    CHECK_THROWS_AS(DirectionGrid(0, 19), std::invalid_argument);
    CHECK_THROWS_AS(DirectionGrid(36, 1), std::invalid_argument);
}

TEST_CASE("slab intersection") {
    SUBCASE("axis-aligned hit") {
        const auto hit =
            ray_box_intersect({0, 0, 0}, {1, 0, 0}, {1, -0.5, -0.5}, {2, 0.5, 0.5});
        REQUIRE(hit.has_value());
        CHECK(hit->first == doctest::Approx(1.0));
        CHECK(hit->second == doctest::Approx(2.0));
    }
    SUBCASE("offset box misses") {
        CHECK(!ray_box_intersect({0, 0, 0}, {1, 0, 0}, {1, 1, 1}, {2, 2, 2}).has_value());
    }
    SUBCASE("origin inside the box brackets zero") {
        const auto hit =
            ray_box_intersect({1.5, 0, 0}, {0.6, 0.8, 0}, {1, -0.5, -0.5}, {2, 0.5, 0.5});
        REQUIRE(hit.has_value());
        CHECK(hit->first < 0.0);
        CHECK(hit->second > 0.0);
    }
    SUBCASE("box behind the origin misses") {
        CHECK(!ray_box_intersect({3, 0, 0}, {1, 0, 0}, {1, -0.5, -0.5}, {2, 0.5, 0.5})
                   .has_value());
    }
    SUBCASE("zero direction component uses the slab interval convention") {
        // Parallel to the slab and inside it: governed by the other axes.
        const auto inside =
            ray_box_intersect({0, 0, 0}, {1, 0, 0}, {1, -0.5, -0.5}, {2, 0.5, 0.5});
        CHECK(inside.has_value());
        // Parallel and outside: always a miss.
        CHECK(!ray_box_intersect({0, 2, 0}, {1, 0, 0}, {1, -0.5, -0.5}, {2, 0.5, 0.5})
                   .has_value());
    }
}

TEST_CASE("los map in a closed room hits a wall voxel in every direction") {
    Fixture f = make_fixture(42, 0, 0);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const Vec3 center = f.scene.room_dims * 0.5;
    const LosMap map = build_los_map(center, f.grid, dirs);
    for (const std::int32_t hit : map.hits)
        CHECK(hit >= 0);
}

TEST_CASE("receiver outside the room is rejected") {
    Fixture f = make_fixture(42, 0, 0);
    CHECK_THROWS_WITH_AS(build_los_map({-1, 0, 0}, f.grid, DirectionGrid::ten_degree()),
                         "receiver out of bounds", std::invalid_argument);
}

TEST_CASE("slab tracer agrees with the marching reference on random rays") {
    Rng rng(2024);
    int checked = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        Fixture f = make_fixture(100 + s);
        for (int r = 0; r < 20; ++r) {
            const Vec3 rx = random_rx_inside(f.scene, rng);
            // Random directions, off the grid, exercised directly against
            // single-voxel slab queries.
            for (int d = 0; d < 25; ++d) {
                const Vec3 dir = rng.unit_vector();
                const double theta = rad_to_deg(std::atan2(dir.y, dir.x));
                const double phi = rad_to_deg(std::acos(std::clamp(dir.z, -1.0, 1.0)));
                const DirectionGrid single(1, 2);
                (void)single;
                // Build a 1-direction map through the public API by querying
                // the full tracer on a tiny custom grid is awkward; instead
                // compare nearest-hit search against the reference directly.
                const std::array<int, 3> self = f.grid.cell_of_point(rx);
                const int self_occ = f.grid.occupied_at(self[0], self[1], self[2]);
                double best_t = std::numeric_limits<double>::infinity();
                std::int32_t best_k = -1;
                for (std::size_t k = 0; k < f.grid.num_occupied(); ++k) {
                    if (static_cast<int>(k) == self_occ)
                        continue;
                    const auto [lo, hi] = voxel_aabb(f.grid, k);
                    const auto hit = ray_box_intersect(rx, dir, lo, hi);
                    if (hit && hit->first < best_t) {
                        best_t = hit->first;
                        best_k = static_cast<std::int32_t>(k);
                    }
                }
                const std::int32_t expected = testsupport::march_los_reference(rx, dir, f.grid);
                CHECK(best_k == expected);
                ++checked;
                (void)theta;
                (void)phi;
            }
        }
    }
    CHECK(checked == 2000);
}

TEST_CASE("build_los_map matches the marching reference on grid directions") {
    Rng rng(55);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    for (std::uint64_t s = 0; s < 2; ++s) {
        Fixture f = make_fixture(300 + s);
        const Vec3 rx = random_rx_inside(f.scene, rng);
        const LosMap map = build_los_map(rx, f.grid, dirs);
        for (int i = 0; i < dirs.n_theta; i += 3)
            for (int j = 0; j < dirs.n_phi; j += 2) {
                const Vec3 dir = direction_vector(dirs.theta_deg(i), dirs.phi_deg(j));
                CHECK(map.hit(i, j) == testsupport::march_los_reference(rx, dir, f.grid));
            }
    }
}

TEST_CASE("a receiver next to an obstacle sees its near face, not the wall behind") {
    SceneConfig config;
    config.min_obstacles = 0;
    config.max_obstacles = 0;
    Scene scene = generate_scene(config, 9);
    // A cabinet-sized box in the middle of the room.
    scene.obstacles.push_back({{2.5, 1.5, 0.0}, {3.5, 2.5, 2.0}, ObstacleKind::cabinet});
    const PointCloud cloud = sample_point_cloud(scene, 30000, 1);
    const VoxelGrid grid = voxelize(cloud, scene.room_dims, {0.5, 0.5, 0.5}, 2);

    const Vec3 rx{1.8, 2.0, 1.0}; // west of the box, looking +x
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const LosMap map = build_los_map(rx, grid, dirs);
    const std::int32_t hit = map.hit(0, 9); // theta 0, phi 90: straight +x
    REQUIRE(hit >= 0);
    const Vec3 center = grid.occupied[static_cast<std::size_t>(hit)].center;
    // The near face of the box is at x = 2.5; the wall behind is at x = 6.
    CHECK(center.x == doctest::Approx(2.75));
    CHECK(center.x < 3.6);
}

TEST_CASE("aggregate_window") {
    Fixture f = make_fixture(7);
    Rng rng(11);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const Vec3 rx = random_rx_inside(f.scene, rng);
    const LosMap map = build_los_map(rx, f.grid, dirs);

    SUBCASE("zero window hits exactly one direction") {
        const std::vector<int> got = aggregate_window(map, 90.0, 60.0, 0.0, 0.0);
        const std::int32_t hit = map.hit(9, 6);
        if (hit >= 0) {
            REQUIRE(got.size() == 1);
            CHECK(got[0] == hit);
        } else {
            CHECK(got.empty());
        }
    }
    SUBCASE("full sphere collects every hit") {
        const std::vector<int> got = aggregate_window(map, 0.0, 90.0, 180.0, 90.0);
        std::set<int> expected;
        for (const std::int32_t h : map.hits)
            if (h >= 0)
                expected.insert(h);
        CHECK(got == std::vector<int>(expected.begin(), expected.end()));
    }
    SUBCASE("ten-degree window unions the 3x3 neighborhood with wraparound") {
        const std::vector<int> got = aggregate_window(map, 0.0, 90.0, 10.0, 10.0);
        std::set<int> expected;
        for (const int i : {35, 0, 1})
            for (const int j : {8, 9, 10}) {
                const std::int32_t h = map.hit(i, j);
                if (h >= 0)
                    expected.insert(h);
            }
        CHECK(got == std::vector<int>(expected.begin(), expected.end()));
    }
    SUBCASE("negative half-width is rejected") {
        CHECK_THROWS_AS(aggregate_window(map, 0, 0, -1.0, 0), std::invalid_argument);
    }
}

TEST_CASE("nearest-hit monotonicity") {
    Fixture f = make_fixture(64);
    Rng rng(19);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const Vec3 rx = random_rx_inside(f.scene, rng);
    const LosMap map = build_los_map(rx, f.grid, dirs);
    const std::array<int, 3> self = f.grid.cell_of_point(rx);
    const int self_occ = f.grid.occupied_at(self[0], self[1], self[2]);

    for (int i = 0; i < dirs.n_theta; i += 5)
        for (int j = 0; j < dirs.n_phi; j += 3) {
            const std::int32_t hit = map.hit(i, j);
            if (hit < 0)
                continue;
            const Vec3 dir = direction_vector(dirs.theta_deg(i), dirs.phi_deg(j));
            const auto [hlo, hhi] = voxel_aabb(f.grid, static_cast<std::size_t>(hit));
            const auto hit_t = ray_box_intersect(rx, dir, hlo, hhi);
            REQUIRE(hit_t.has_value());
            for (std::size_t k = 0; k < f.grid.num_occupied(); ++k) {
                if (static_cast<int>(k) == self_occ || static_cast<std::int32_t>(k) == hit)
                    continue;
                const auto [lo, hi] = voxel_aabb(f.grid, k);
                const auto other = ray_box_intersect(rx, dir, lo, hi);
                if (other)
                    CHECK(hit_t->first <= other->first);
            }
        }
}

TEST_CASE("build_mask") {
    Fixture f = make_fixture(13);
    Rng rng(29);
    const Vec3 rx = random_rx_inside(f.scene, rng);
    const std::size_t K = f.grid.num_occupied();
    REQUIRE(K > 25);

    SUBCASE("under the cap everything is retained") {
        const LosMask mask = build_mask({3, 1, 2}, rx, f.grid, 16);
        CHECK(mask.los_voxels == std::vector<std::int32_t>{1, 2, 3});
        for (std::size_t k = 0; k < K; ++k) {
            const bool in = k == 1 || k == 2 || k == 3;
            CHECK(mask.binary_mask[k] == (in ? 0 : 1));
        }
    }
    SUBCASE("over the cap the nearest sixteen centers win") {
        std::vector<int> candidates;
        for (int k = 0; k < 20; ++k)
            candidates.push_back(k);
        const LosMask mask = build_mask(candidates, rx, f.grid, 16);
        CHECK(mask.los_voxels.size() == 16);
        // Every kept voxel must be at least as close as every dropped one.
        double kept_max = 0.0;
        for (const std::int32_t k : mask.los_voxels)
            kept_max = std::max(kept_max,
                                distance(f.grid.occupied[static_cast<std::size_t>(k)].center, rx));
        for (const int k : candidates) {
            if (std::find(mask.los_voxels.begin(), mask.los_voxels.end(), k) !=
                mask.los_voxels.end())
                continue;
            CHECK(distance(f.grid.occupied[static_cast<std::size_t>(k)].center, rx) >=
                  kept_max - 1e-12);
        }
        int zeros = 0;
        for (const auto b : mask.binary_mask)
            if (b == 0)
                ++zeros;
        CHECK(zeros == 16);
    }
    SUBCASE("empty input produces the all-ones mask") {
        const LosMask mask = build_mask({}, rx, f.grid, 16);
        CHECK(mask.los_voxels.empty());
        for (const auto b : mask.binary_mask)
            CHECK(b == 1);
    }
}

TEST_CASE("los csv has one row per direction") {
    Fixture f = make_fixture(4, 0, 0);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const LosMap map = build_los_map(f.scene.room_dims * 0.5, f.grid, dirs);
    const std::string csv = los_map_to_csv(map, dirs);
    const std::size_t rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    CHECK(rows == 685); // header + 684 directions
}
