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

#include "radtwin/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "radtwin/dataset.hpp"
#include "radtwin/errors.hpp"
#include "radtwin/model.hpp"
#include "radtwin/trainer.hpp"

namespace radtwin::cli {

namespace fs = std::filesystem;

namespace {

Vec3 parse_vec3(const std::string &text) {
    Vec3 v;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> v.x >> c1 >> v.y >> c2 >> v.z) || c1 != ',' || c2 != ',')
        throw std::invalid_argument("expected x,y,z but got: " + text);
    return v;
}

void write_json_file(const nlohmann::json &j, const std::string &path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
}

void write_resolved_config(const std::string &out_dir, const std::string &command,
                           const nlohmann::json &resolved) {
    fs::create_directories(out_dir);
    nlohmann::json j = resolved;
    j["command"] = command;
    write_json_file(j, (fs::path(out_dir) / (command + "_config.json")).string());
}

/// 8-bit PGM heatmap, min-max scaled; the scale range lands in a sidecar.
void write_pgm(const std::vector<double> &values, int n_theta, int n_phi,
               const std::string &path) {
    double lo = values[0], hi = values[0];
    for (const double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os << "P5\n" << n_theta << " " << n_phi << "\n255\n";
    for (int j = 0; j < n_phi; ++j)
        for (int i = 0; i < n_theta; ++i) {
            const double v = values[static_cast<std::size_t>(j * n_theta + i)];
            const int level = static_cast<int>(std::lround((v - lo) / span * 255.0));
            os.put(static_cast<char>(std::clamp(level, 0, 255)));
        }
    write_json_file({{"min", lo}, {"max", hi}, {"width", n_theta}, {"height", n_phi}},
                    path + ".range.json");
}

void write_spectrum_csv(const std::vector<double> &values, int n_theta, int n_phi,
                        const std::string &path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    os.precision(17);
    for (int j = 0; j < n_phi; ++j) {
        for (int i = 0; i < n_theta; ++i)
            os << values[static_cast<std::size_t>(j * n_theta + i)] << (i + 1 < n_theta ? "," : "");
        os << "\n";
    }
}

ModelConfig model_config_for(const std::string &variant) {
    ModelConfig mc;
    if (variant == "radtwin") {
        mc.kind = "radtwin";
    } else if (variant == "nomask") {
        mc.kind = "radtwin";
        mc.use_los_mask = false;
    } else if (variant == "mlp") {
        mc.kind = "mlp";
    } else {
        throw std::invalid_argument("unknown model variant: " + variant);
    }
    return mc;
}

int cmd_gen(const DatasetConfig &config, const std::string &out_dir) {
    const DatasetManifest manifest = build_dataset(config, out_dir);
    write_resolved_config(out_dir, "gen", config.to_json());
    std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_train(const TrainConfig &config, const std::string &data_dir,
              const std::string &out_dir) {
    const Dataset dataset = load_dataset(data_dir);
    fs::create_directories(out_dir);
    write_resolved_config(out_dir, "train", config.to_json());
    const TrainResult result = train_model(config, dataset, out_dir);
    write_json_file(result.split.to_json(), (fs::path(out_dir) / "split.json").string());
    std::cout << result.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(const std::string &data_dir, const std::string &ckpt_path,
             const std::string &split_path, const std::string &out_dir) {
    const Dataset dataset = load_dataset(data_dir);
    const Model model = load_model(ckpt_path);

    std::ifstream split_is(split_path);
    if (!split_is)
        throw MissingArtifactError("cannot open split manifest: " + split_path);
    nlohmann::json split_json;
    split_is >> split_json;
    const SplitManifest split = SplitManifest::from_json(split_json);

    const EvalSummary summary = evaluate_model(model, dataset, split.test_scenes);
    write_resolved_config(out_dir, "eval",
                          {{"data", data_dir}, {"checkpoint", ckpt_path}, {"split", split_path}});
    const std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    write_json_file(summary.to_json(), metrics_path);
    std::cout << metrics_path << "\n";
    return 0;
}

int cmd_render(const std::string &data_dir, const std::string &ckpt_path,
               const std::string &scene_id, const Vec3 &rx, const std::string &out_dir) {
    const Dataset dataset = load_dataset(data_dir);
    const Model model = load_model(ckpt_path);
    const DirectionGrid dirs = dataset.manifest.config.direction_grid();
    const OracleConfig &oc = dataset.manifest.config.oracle;

    const SceneData *sd = nullptr;
    for (std::size_t s = 0; s < dataset.manifest.scene_ids.size(); ++s)
        if (dataset.manifest.scene_ids[s] == scene_id)
            sd = &dataset.scenes[s];
    if (sd == nullptr)
        throw MissingArtifactError("scene not in dataset: " + scene_id);

    // Ground truth at the requested receiver.
    const std::vector<PathComponent> paths =
        trace_paths(sd->scene, rx, oc.max_order, oc.frequency_hz, oc.reflection_coeff);
    const SpatialSpectrum truth_spec =
        render_spectrum(paths, dirs, oc.tx_amplitude, oc.beamwidth_deg);
    const std::vector<double> truth_db = path_loss_db(truth_spec, oc.loss_floor_db);

    // Prediction, mapped back to dB for a comparable heatmap.
    SpatialSpectrum pred;
    if (model.config().kind == "mlp") {
        pred = model.predict_spectrum_mlp(rx, sd->scene.room_dims, dirs);
    } else {
        nn::Tape tape;
        tape.recording = false;
        const SceneEncoding enc = model.encode_scene(tape, sd->grid);
        const LosMap los = build_los_map(rx, sd->grid, dirs);
        pred = model.predict_spectrum(enc, rx, dirs, los);
    }
    std::vector<double> pred_db(pred.values.size());
    for (std::size_t i = 0; i < pred.values.size(); ++i)
        pred_db[i] = pred.values[i] * model.config().loss_range_db;

    fs::create_directories(out_dir);
    write_resolved_config(out_dir, "render",
                          {{"data", data_dir},
                           {"checkpoint", ckpt_path},
                           {"scene", scene_id},
                           {"rx", rx.to_array()}});
    const std::string base = (fs::path(out_dir) / (scene_id + "_rx")).string();
    write_spectrum_csv(truth_db, dirs.n_theta, dirs.n_phi, base + "_truth.csv");
    write_spectrum_csv(pred_db, dirs.n_theta, dirs.n_phi, base + "_pred.csv");
    write_pgm(truth_db, dirs.n_theta, dirs.n_phi, base + "_truth.pgm");
    write_pgm(pred_db, dirs.n_theta, dirs.n_phi, base + "_pred.pgm");
    std::cout << base << "_{truth,pred}.{csv,pgm}\n";
    return 0;
}

int cmd_trace(const std::string &scene_path, const Vec3 &rx, const std::string &out_dir,
              std::uint64_t n_points, const Vec3 &voxel_size, int min_points, int n_theta,
              int n_phi, std::uint64_t seed) {
    const Scene scene = load_scene(scene_path);
    const PointCloud cloud = sample_point_cloud(scene, n_points, seed);
    const VoxelGrid grid = voxelize(cloud, scene.room_dims, voxel_size, min_points);
    const DirectionGrid dirs(n_theta, n_phi);
    const LosMap map = build_los_map(rx, grid, dirs);

    fs::create_directories(out_dir);
    write_resolved_config(out_dir, "trace",
                          {{"scene", scene_path},
                           {"rx", rx.to_array()},
                           {"n_points", n_points},
                           {"voxel_size", voxel_size.to_array()},
                           {"min_points", min_points},
                           {"n_theta", n_theta},
                           {"n_phi", n_phi},
                           {"seed", seed}});
    const std::string csv_path = (fs::path(out_dir) / "los.csv").string();
    std::ofstream os(csv_path, std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + csv_path);
    os << los_map_to_csv(map, dirs);
    save_voxelgrid(grid, (fs::path(out_dir) / "grid.json").string());
    std::cout << csv_path << "\n";
    return 0;
}

} // namespace

int run(int argc, const char *const *argv) {
    CLI::App app{"radtwin: indoor radio propagation dataset generation, training and evaluation"};
    app.require_subcommand(1);

    // gen
    DatasetConfig gen_config;
    std::string gen_out;
    std::string gen_room = "6,4,2.5";
    std::string gen_tx = "0.5,0.5,2.0";
    double gen_voxel = 0.5;
    CLI::App *gen = app.add_subcommand("gen", "generate scenes and the channel dataset");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--scenes", gen_config.n_scenes, "number of scenes")->check(CLI::PositiveNumber);
    gen->add_option("--rx", gen_config.n_rx, "receivers per scene")->check(CLI::PositiveNumber);
    gen->add_option("--points", gen_config.n_points, "surface points per scene");
    gen->add_option("--room", gen_room, "room dimensions W,D,H in meters");
    gen->add_option("--tx", gen_tx, "transmitter position x,y,z");
    gen->add_option("--min-obstacles", gen_config.scene_config.min_obstacles, "minimum obstacles");
    gen->add_option("--max-obstacles", gen_config.scene_config.max_obstacles, "maximum obstacles");
    gen->add_option("--voxel", gen_voxel, "voxel edge length in meters")->check(CLI::PositiveNumber);
    gen->add_option("--min-points", gen_config.min_points_per_voxel, "occupancy threshold T");
    gen->add_option("--ntheta", gen_config.n_theta, "azimuth samples");
    gen->add_option("--nphi", gen_config.n_phi, "inclination samples");
    gen->add_option("--max-order", gen_config.oracle.max_order, "max wall bounces");
    gen->add_option("--seed", gen_config.seed, "dataset seed");

    // train
    TrainConfig train_config;
    std::string train_data, train_out, train_variant = "radtwin";
    CLI::App *train = app.add_subcommand("train", "train a model on a generated dataset");
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--model", train_variant, "radtwin | nomask | mlp");
    train->add_option("--epochs", train_config.epochs, "training epochs")->check(CLI::PositiveNumber);
    train->add_option("--batch", train_config.batch_size, "batch size")->check(CLI::PositiveNumber);
    train->add_option("--lr", train_config.lr, "Adam learning rate");
    train->add_option("--ratio", train_config.split_ratio, "train split fraction");
    train->add_option("--rx-per-scene", train_config.rx_per_scene,
                      "cap on receivers per train scene (0 = all)");
    train->add_option("--seed", train_config.seed, "training seed");

    // eval
    std::string eval_data, eval_ckpt, eval_split, eval_out;
    CLI::App *eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out scenes");
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--split", eval_split, "split manifest (default: next to checkpoint)");
    eval->add_option("--out", eval_out, "output directory")->required();

    // render
    std::string render_data, render_ckpt, render_scene, render_rx, render_out;
    CLI::App *render = app.add_subcommand("render", "write truth and predicted spectra");
    render->add_option("--data", render_data, "dataset directory")->required();
    render->add_option("--ckpt", render_ckpt, "checkpoint path")->required();
    render->add_option("--scene", render_scene, "scene id")->required();
    render->add_option("--rx", render_rx, "receiver position x,y,z")->required();
    render->add_option("--out", render_out, "output directory")->required();

    // trace
    std::string trace_scene, trace_rx, trace_out;
    std::uint64_t trace_points = 25000, trace_seed = 1;
    double trace_voxel = 0.5;
    int trace_min_points = 2, trace_ntheta = 36, trace_nphi = 19;
    CLI::App *trace = app.add_subcommand("trace", "dump the LOS map for one receiver");
    trace->add_option("--scene", trace_scene, "scene JSON path")->required();
    trace->add_option("--rx", trace_rx, "receiver position x,y,z")->required();
    trace->add_option("--out", trace_out, "output directory")->required();
    trace->add_option("--points", trace_points, "surface points to sample");
    trace->add_option("--voxel", trace_voxel, "voxel edge length")->check(CLI::PositiveNumber);
    trace->add_option("--min-points", trace_min_points, "occupancy threshold T");
    trace->add_option("--ntheta", trace_ntheta, "azimuth samples");
    trace->add_option("--nphi", trace_nphi, "inclination samples");
    trace->add_option("--seed", trace_seed, "cloud sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            gen_config.scene_config.room_dims = parse_vec3(gen_room);
            gen_config.scene_config.tx_position = parse_vec3(gen_tx);
            gen_config.voxel_size = {gen_voxel, gen_voxel, gen_voxel};
            return cmd_gen(gen_config, gen_out);
        }
        if (train->parsed()) {
            train_config.model = model_config_for(train_variant);
            return cmd_train(train_config, train_data, train_out);
        }
        if (eval->parsed()) {
            if (eval_split.empty())
                eval_split = (fs::path(eval_ckpt).parent_path() / "split.json").string();
            return cmd_eval(eval_data, eval_ckpt, eval_split, eval_out);
        }
        if (render->parsed())
            return cmd_render(render_data, render_ckpt, render_scene, parse_vec3(render_rx),
                              render_out);
        if (trace->parsed())
            return cmd_trace(trace_scene, parse_vec3(trace_rx), trace_out, trace_points,
                             {trace_voxel, trace_voxel, trace_voxel}, trace_min_points,
                             trace_ntheta, trace_nphi, trace_seed);
    } catch (const MissingArtifactError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace radtwin::cli
