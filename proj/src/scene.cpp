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

#include "radtwin/scene.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "radtwin/binary_io.hpp"
#include "radtwin/rng.hpp"

namespace radtwin {

namespace {

constexpr const char *kKindNames[4] = {"table", "chair", "shelf", "cabinet"};

bool inside_room(const Box3 &box, const Vec3 &room, double margin) {
    return box.lo.x >= margin && box.lo.y >= margin && box.lo.z >= 0.0 &&
           box.hi.x <= room.x - margin && box.hi.y <= room.y - margin && box.hi.z <= room.z - margin;
}

} // namespace

const char *obstacle_kind_name(ObstacleKind kind) { return kKindNames[static_cast<int>(kind)]; }

ObstacleKind obstacle_kind_from_name(const std::string &name) {
    for (int i = 0; i < 4; ++i)
        if (name == kKindNames[i])
            return static_cast<ObstacleKind>(i);
    throw std::invalid_argument("unknown obstacle kind: " + name);
}

Scene generate_scene(const SceneConfig &config, std::uint64_t seed) {
    if (config.room_dims.x <= 0.0 || config.room_dims.y <= 0.0 || config.room_dims.z <= 0.0)
        throw std::invalid_argument("room dimensions must be strictly positive");
    if (config.min_obstacles < 0 || config.max_obstacles < config.min_obstacles)
        throw std::invalid_argument("bad obstacle count range");

    Rng rng(derive_seed(seed, "scene-layout"));
    Scene scene;
    scene.id = "scene_" + std::to_string(seed);
    scene.room_dims = config.room_dims;
    scene.tx_position = config.tx_position;
    scene.layout_seed = seed;

    const Vec3 room = config.room_dims;
    const double margin = config.wall_margin;
    const int count = static_cast<int>(rng.uniform_int(config.min_obstacles, config.max_obstacles));

    for (int n = 0; n < count; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < config.max_placement_retries; ++attempt) {
            const auto kind = static_cast<ObstacleKind>(rng.uniform_int(0, 3));
            const ObstacleSizeRange &range = config.kind_sizes[static_cast<std::size_t>(kind)];
            Vec3 size{rng.uniform(range.min_size.x, range.max_size.x),
                      rng.uniform(range.min_size.y, range.max_size.y),
                      rng.uniform(range.min_size.z, range.max_size.z)};
            size.x = std::min(size.x, room.x - 2.0 * margin);
            size.y = std::min(size.y, room.y - 2.0 * margin);
            size.z = std::min(size.z, room.z - margin);

            // Furniture stands on the floor.
            const double px = rng.uniform(margin, room.x - margin - size.x);
            const double py = rng.uniform(margin, room.y - margin - size.y);
            BoxObstacle obs{{px, py, 0.0}, {px + size.x, py + size.y, size.z}, kind};

            if (obs.box().contains(scene.tx_position))
                continue; // would swallow the TX, re-draw
            scene.obstacles.push_back(obs);
            placed = true;
            break;
        }
        if (!placed)
            throw std::runtime_error("scene generation failed");
    }
    return scene;
}

Scene move_obstacle(const Scene &scene, std::size_t index, const Vec3 &delta) {
    if (index >= scene.obstacles.size())
        throw std::out_of_range("obstacle index out of range");

    Scene moved = scene;
    BoxObstacle &obs = moved.obstacles[index];
    obs.min_corner = obs.min_corner + delta;
    obs.max_corner = obs.max_corner + delta;

    if (!inside_room(obs.box(), scene.room_dims, 0.0) || obs.box().contains(scene.tx_position))
        throw std::invalid_argument("invalid displacement");

    std::ostringstream tag;
    tag << scene.id << "_mv" << index;
    moved.id = tag.str();
    return moved;
}

std::vector<SurfaceFace> scene_surfaces(const Scene &scene) {
    std::vector<SurfaceFace> faces;
    const Vec3 r = scene.room_dims;

    auto add_face = [&faces](const Vec3 &origin, const Vec3 &u, const Vec3 &v, bool on_obstacle) {
        faces.push_back({origin, u, v, u.norm() * v.norm(), on_obstacle});
    };

    // Room boundary: floor, ceiling, four walls.
    add_face({0, 0, 0}, {r.x, 0, 0}, {0, r.y, 0}, false);     // floor z=0
    add_face({0, 0, r.z}, {r.x, 0, 0}, {0, r.y, 0}, false);   // ceiling z=r.z
    add_face({0, 0, 0}, {0, r.y, 0}, {0, 0, r.z}, false);     // wall x=0
    add_face({r.x, 0, 0}, {0, r.y, 0}, {0, 0, r.z}, false);   // wall x=r.x
    add_face({0, 0, 0}, {r.x, 0, 0}, {0, 0, r.z}, false);     // wall y=0
    add_face({0, r.y, 0}, {r.x, 0, 0}, {0, 0, r.z}, false);   // wall y=r.y

    for (const BoxObstacle &obs : scene.obstacles) {
        const Vec3 lo = obs.min_corner;
        const Vec3 hi = obs.max_corner;
        const Vec3 e = hi - lo;
        // Bottom face is skipped when resting on the floor so every sampled
        // point lies on exactly one surface.
        if (lo.z > 1e-12)
            add_face(lo, {e.x, 0, 0}, {0, e.y, 0}, true);
        add_face({lo.x, lo.y, hi.z}, {e.x, 0, 0}, {0, e.y, 0}, true); // top
        add_face(lo, {0, e.y, 0}, {0, 0, e.z}, true);                 // x = lo.x
        add_face({hi.x, lo.y, lo.z}, {0, e.y, 0}, {0, 0, e.z}, true); // x = hi.x
        add_face(lo, {e.x, 0, 0}, {0, 0, e.z}, true);                 // y = lo.y
        add_face({lo.x, hi.y, lo.z}, {e.x, 0, 0}, {0, 0, e.z}, true); // y = hi.y
    }
    return faces;
}

PointCloud sample_point_cloud(const Scene &scene, std::size_t n_points, std::uint64_t seed) {
    if (n_points == 0)
        throw std::invalid_argument("n_points must be positive");

    const std::vector<SurfaceFace> faces = scene_surfaces(scene);
    const double total_area =
        std::accumulate(faces.begin(), faces.end(), 0.0,
                        [](double acc, const SurfaceFace &f) { return acc + f.area; });

    // Area-proportional allocation, exact total via largest remainder.
    std::vector<std::size_t> counts(faces.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const double ideal = static_cast<double>(n_points) * faces[i].area / total_area;
        counts[i] = static_cast<std::size_t>(ideal);
        assigned += counts[i];
        remainders.emplace_back(ideal - static_cast<double>(counts[i]), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto &a, const auto &b) {
        if (a.first != b.first)
            return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t r = 0; assigned < n_points; ++r, ++assigned)
        ++counts[remainders[r % remainders.size()].second];

    Rng rng(derive_seed(seed, "point-cloud"));
    PointCloud cloud;
    cloud.source_scene = scene.id;
    cloud.points.reserve(n_points);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const SurfaceFace &f = faces[i];
        for (std::size_t k = 0; k < counts[i]; ++k) {
            const double a = rng.uniform();
            const double b = rng.uniform();
            cloud.points.push_back(f.origin + f.edge_u * a + f.edge_v * b);
        }
    }
    return cloud;
}

nlohmann::json scene_to_json(const Scene &scene) {
    nlohmann::json obstacles = nlohmann::json::array();
    for (const BoxObstacle &obs : scene.obstacles) {
        obstacles.push_back({{"min_corner", obs.min_corner.to_array()},
                             {"max_corner", obs.max_corner.to_array()},
                             {"kind", obstacle_kind_name(obs.kind)}});
    }
    return {{"id", scene.id},
            {"room_dims", scene.room_dims.to_array()},
            {"obstacles", obstacles},
            {"tx_position", scene.tx_position.to_array()},
            {"layout_seed", scene.layout_seed}};
}

Scene scene_from_json(const nlohmann::json &j) {
    Scene scene;
    scene.id = j.at("id").get<std::string>();
    scene.room_dims = Vec3::from_array(j.at("room_dims").get<std::array<double, 3>>());
    scene.tx_position = Vec3::from_array(j.at("tx_position").get<std::array<double, 3>>());
    scene.layout_seed = j.at("layout_seed").get<std::uint64_t>();
    for (const auto &o : j.at("obstacles")) {
        BoxObstacle obs;
        obs.min_corner = Vec3::from_array(o.at("min_corner").get<std::array<double, 3>>());
        obs.max_corner = Vec3::from_array(o.at("max_corner").get<std::array<double, 3>>());
        obs.kind = obstacle_kind_from_name(o.at("kind").get<std::string>());
        scene.obstacles.push_back(obs);
    }
    return scene;
}

void save_scene(const Scene &scene, const std::string &path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os << scene_to_json(scene).dump(2) << "\n";
}

Scene load_scene(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw MissingArtifactError("cannot open scene file: " + path);
    nlohmann::json j;
    is >> j;
    return scene_from_json(j);
}

void save_point_cloud(const PointCloud &cloud, const std::string &path) {
    std::ofstream os = open_output_binary(path);
    BinaryWriter w(os);
    w.u64(cloud.points.size());
    for (const Vec3 &p : cloud.points) {
        w.f32(static_cast<float>(p.x));
        w.f32(static_cast<float>(p.y));
        w.f32(static_cast<float>(p.z));
    }
}

PointCloud load_point_cloud(const std::string &path) {
    std::ifstream is = open_input_binary(path);
    BinaryReader r(is);
    PointCloud cloud;
    const std::uint64_t count = r.u64();
    cloud.points.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const double x = r.f32();
        const double y = r.f32();
        const double z = r.f32();
        cloud.points.push_back({x, y, z});
    }
    return cloud;
}

} // namespace radtwin
