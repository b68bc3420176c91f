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

#include "radtwin/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "radtwin/binary_io.hpp"
#include "radtwin/nn/threadpool.hpp"
#include "radtwin/rng.hpp"

namespace radtwin {

namespace fs = std::filesystem;

nlohmann::json DatasetConfig::to_json() const {
    return {{"room_dims", scene_config.room_dims.to_array()},
            {"min_obstacles", scene_config.min_obstacles},
            {"max_obstacles", scene_config.max_obstacles},
            {"tx_position", scene_config.tx_position.to_array()},
            {"n_scenes", n_scenes},
            {"n_rx", n_rx},
            {"n_points", n_points},
            {"voxel_size", voxel_size.to_array()},
            {"min_points_per_voxel", min_points_per_voxel},
            {"n_theta", n_theta},
            {"n_phi", n_phi},
            {"max_order", oracle.max_order},
            {"frequency_hz", oracle.frequency_hz},
            {"reflection_coeff", oracle.reflection_coeff},
            {"tx_amplitude", oracle.tx_amplitude},
            {"beamwidth_deg", oracle.beamwidth_deg},
            {"loss_floor_db", oracle.loss_floor_db},
            {"min_rx_tx_distance", min_rx_tx_distance},
            {"seed", seed}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json &j) {
    DatasetConfig c;
    c.scene_config.room_dims = Vec3::from_array(j.at("room_dims").get<std::array<double, 3>>());
    c.scene_config.min_obstacles = j.at("min_obstacles").get<int>();
    c.scene_config.max_obstacles = j.at("max_obstacles").get<int>();
    c.scene_config.tx_position = Vec3::from_array(j.at("tx_position").get<std::array<double, 3>>());
    c.n_scenes = j.at("n_scenes").get<int>();
    c.n_rx = j.at("n_rx").get<int>();
    c.n_points = j.at("n_points").get<std::uint64_t>();
    c.voxel_size = Vec3::from_array(j.at("voxel_size").get<std::array<double, 3>>());
    c.min_points_per_voxel = j.at("min_points_per_voxel").get<int>();
    c.n_theta = j.at("n_theta").get<int>();
    c.n_phi = j.at("n_phi").get<int>();
    c.oracle.max_order = j.at("max_order").get<int>();
    c.oracle.frequency_hz = j.at("frequency_hz").get<double>();
    c.oracle.reflection_coeff = j.at("reflection_coeff").get<double>();
    c.oracle.tx_amplitude = j.at("tx_amplitude").get<double>();
    c.oracle.beamwidth_deg = j.at("beamwidth_deg").get<double>();
    c.oracle.loss_floor_db = j.at("loss_floor_db").get<double>();
    c.min_rx_tx_distance = j.at("min_rx_tx_distance").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

nlohmann::json DatasetManifest::to_json() const {
    return {{"config", config.to_json()}, {"scene_ids", scene_ids}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json &j) {
    DatasetManifest m;
    m.config = DatasetConfig::from_json(j.at("config"));
    m.scene_ids = j.at("scene_ids").get<std::vector<std::string>>();
    return m;
}

void save_manifest(const DatasetManifest &manifest, const std::string &path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os << manifest.to_json().dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw MissingArtifactError("cannot open manifest: " + path);
    nlohmann::json j;
    is >> j;
    return DatasetManifest::from_json(j);
}

void save_los_maps(const std::vector<LosMap> &maps, const std::string &path) {
    std::ofstream os = open_output_binary(path);
    BinaryWriter w(os);
    w.u32(static_cast<std::uint32_t>(maps.size()));
    if (maps.empty()) {
        w.u32(0);
        w.u32(0);
        return;
    }
    w.u32(static_cast<std::uint32_t>(maps[0].n_theta));
    w.u32(static_cast<std::uint32_t>(maps[0].n_phi));
    for (const LosMap &m : maps) {
        w.f64(m.rx_position.x);
        w.f64(m.rx_position.y);
        w.f64(m.rx_position.z);
        for (const std::int32_t h : m.hits)
            w.i32(h);
    }
}

std::vector<LosMap> load_los_maps(const std::string &path) {
    std::ifstream is = open_input_binary(path);
    BinaryReader r(is);
    const std::uint32_t count = r.u32();
    const int n_theta = static_cast<int>(r.u32());
    const int n_phi = static_cast<int>(r.u32());
    std::vector<LosMap> maps;
    maps.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LosMap m;
        m.n_theta = n_theta;
        m.n_phi = n_phi;
        m.rx_position.x = r.f64();
        m.rx_position.y = r.f64();
        m.rx_position.z = r.f64();
        m.hits.resize(static_cast<std::size_t>(n_theta) * n_phi);
        for (std::int32_t &h : m.hits)
            h = r.i32();
        maps.push_back(std::move(m));
    }
    return maps;
}

DatasetManifest build_dataset(const DatasetConfig &config, const std::string &out_dir) {
    if (config.n_scenes < 1)
        throw std::invalid_argument("n_scenes must be positive");
    if (config.n_rx < 1)
        throw std::invalid_argument("n_rx must be positive");
    fs::create_directories(out_dir);

    const DirectionGrid dirs = config.direction_grid();
    DatasetManifest manifest;
    manifest.config = config;

    for (int s = 0; s < config.n_scenes; ++s) {
        const std::uint64_t scene_seed = derive_seed(config.seed, "scene", static_cast<std::uint64_t>(s));
        const Scene scene = generate_scene(config.scene_config, scene_seed);
        const PointCloud cloud = sample_point_cloud(
            scene, config.n_points, derive_seed(config.seed, "cloud", static_cast<std::uint64_t>(s)));
        const VoxelGrid grid =
            voxelize(cloud, scene.room_dims, config.voxel_size, config.min_points_per_voxel);

        // RX positions are drawn sequentially for determinism; the physics
        // runs in parallel per receiver afterwards.
        Rng rx_rng(derive_seed(config.seed, "rx", static_cast<std::uint64_t>(s)));
        std::vector<Vec3> rx_positions;
        rx_positions.reserve(static_cast<std::size_t>(config.n_rx));
        for (int r = 0; r < config.n_rx; ++r) {
            bool placed = false;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                Vec3 rx{rx_rng.uniform(0.0, scene.room_dims.x),
                        rx_rng.uniform(0.0, scene.room_dims.y),
                        rx_rng.uniform(0.0, scene.room_dims.z)};
                bool inside_obstacle = false;
                for (const BoxObstacle &obs : scene.obstacles)
                    if (obs.box().contains_strict(rx)) {
                        inside_obstacle = true;
                        break;
                    }
                if (inside_obstacle || distance(rx, scene.tx_position) < config.min_rx_tx_distance)
                    continue;
                rx_positions.push_back(rx);
                placed = true;
                break;
            }
            if (!placed)
                throw std::runtime_error("receiver sampling failed");
        }

        SceneSpectra spectra;
        spectra.scene_id = scene.id;
        spectra.n_theta = dirs.n_theta;
        spectra.n_phi = dirs.n_phi;
        spectra.frequency_hz = config.oracle.frequency_hz;
        spectra.rx_positions = rx_positions;
        spectra.loss_db.resize(rx_positions.size());
        std::vector<LosMap> los_maps(rx_positions.size());

        nn::ThreadPool::instance().parallel_for(
            static_cast<std::int64_t>(rx_positions.size()),
            [&](int, std::int64_t lo, std::int64_t hi) {
                for (std::int64_t r = lo; r < hi; ++r) {
                    const Vec3 &rx = rx_positions[static_cast<std::size_t>(r)];
                    const std::vector<PathComponent> paths =
                        trace_paths(scene, rx, config.oracle.max_order, config.oracle.frequency_hz,
                                    config.oracle.reflection_coeff);
                    SpatialSpectrum spec = render_spectrum(paths, dirs, config.oracle.tx_amplitude,
                                                           config.oracle.beamwidth_deg);
                    spectra.loss_db[static_cast<std::size_t>(r)] =
                        path_loss_db(spec, config.oracle.loss_floor_db);
                    los_maps[static_cast<std::size_t>(r)] = build_los_map(rx, grid, dirs);
                }
            });

        const fs::path base = fs::path(out_dir) / scene.id;
        save_scene(scene, base.string() + ".scene.json");
        save_point_cloud(cloud, base.string() + ".cloud.bin");
        save_voxelgrid(grid, base.string() + ".grid.json");
        save_los_maps(los_maps, base.string() + ".los.bin");
        save_scene_spectra(spectra, base.string() + ".spectra.bin");
        manifest.scene_ids.push_back(scene.id);
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

Dataset load_dataset(const std::string &dir) {
    Dataset ds;
    ds.manifest = load_manifest((fs::path(dir) / "manifest.json").string());
    for (const std::string &id : ds.manifest.scene_ids) {
        const std::string base = (fs::path(dir) / id).string();
        SceneData sd;
        sd.scene = load_scene(base + ".scene.json");
        sd.grid = load_voxelgrid(base + ".grid.json");
        sd.spectra = load_scene_spectra(base + ".spectra.bin");
        sd.los_maps = load_los_maps(base + ".los.bin");
        if (sd.spectra.rx_positions.size() != sd.los_maps.size())
            throw std::runtime_error("dataset inconsistent for scene " + id);
        ds.scenes.push_back(std::move(sd));
    }
    return ds;
}

} // namespace radtwin
