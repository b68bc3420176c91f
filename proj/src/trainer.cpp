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

#include "radtwin/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "radtwin/binary_io.hpp"
#include "radtwin/errors.hpp"
#include "radtwin/metrics.hpp"
#include "radtwin/nn/checkpoint.hpp"

namespace radtwin {

namespace fs = std::filesystem;

nlohmann::json SplitManifest::to_json() const {
    return {{"train_scenes", train_scenes}, {"test_scenes", test_scenes}};
}

SplitManifest SplitManifest::from_json(const nlohmann::json &j) {
    SplitManifest s;
    s.train_scenes = j.at("train_scenes").get<std::vector<std::string>>();
    s.test_scenes = j.at("test_scenes").get<std::vector<std::string>>();
    return s;
}

SplitManifest split_scenes(const std::vector<std::string> &scene_ids, double ratio,
                           std::uint64_t seed) {
    if (scene_ids.size() < 2)
        throw std::invalid_argument("scene split needs at least two scenes");
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("split ratio must lie in (0, 1)");

    std::vector<std::string> shuffled = scene_ids;
    Rng rng(derive_seed(seed, "scene-split"));
    rng.shuffle(shuffled);

    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(shuffled.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, shuffled.size() - 1);

    SplitManifest split;
    split.train_scenes.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_scenes.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    return split;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"model", model.to_json()},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"lr", lr},
            {"lr_gamma", lr_gamma},
            {"lr_step_epochs", lr_step_epochs},
            {"split_ratio", split_ratio},
            {"rx_per_scene", rx_per_scene},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j) {
    TrainConfig c;
    c.model = ModelConfig::from_json(j.at("model"));
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.lr_gamma = j.at("lr_gamma").get<double>();
    c.lr_step_epochs = j.at("lr_step_epochs").get<int>();
    c.split_ratio = j.at("split_ratio").get<double>();
    c.rx_per_scene = j.at("rx_per_scene").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

std::vector<EpochBatch> scene_aware_batches(const std::vector<std::int64_t> &samples_per_scene,
                                            int batch_size, std::uint64_t seed, int epoch) {
    if (batch_size < 1)
        throw std::invalid_argument("batch_size must be positive");
    Rng rng(derive_seed(seed, "epoch-batches", static_cast<std::uint64_t>(epoch)));

    std::vector<int> scene_order(samples_per_scene.size());
    std::iota(scene_order.begin(), scene_order.end(), 0);
    rng.shuffle(scene_order);

    std::vector<EpochBatch> batches;
    for (const int s : scene_order) {
        std::vector<std::int32_t> ids(static_cast<std::size_t>(samples_per_scene[static_cast<std::size_t>(s)]));
        std::iota(ids.begin(), ids.end(), 0);
        rng.shuffle(ids);
        for (std::size_t at = 0; at < ids.size(); at += static_cast<std::size_t>(batch_size)) {
            EpochBatch batch;
            batch.scene = s;
            const std::size_t end = std::min(ids.size(), at + static_cast<std::size_t>(batch_size));
            batch.samples.assign(ids.begin() + static_cast<std::ptrdiff_t>(at),
                                 ids.begin() + static_cast<std::ptrdiff_t>(end));
            batches.push_back(std::move(batch));
        }
    }
    return batches;
}

namespace {

struct TrainScene {
    const SceneData *data = nullptr;
    int n_rx = 0;
};

// Builds the per-batch inputs: queries, normalized targets, and (for the
// masked model) attention row lists.
struct BatchInputs {
    std::vector<Query> queries;
    std::vector<double> targets;
    nn::AttentionIndices indices;
};

BatchInputs assemble_batch(const TrainScene &ts, const std::vector<std::int32_t> &samples,
                           const DirectionGrid &dirs, const ModelConfig &mc, bool want_masks) {
    const SceneData &sd = *ts.data;
    const std::size_t K = sd.grid.num_occupied();
    BatchInputs in;
    in.queries.reserve(samples.size());
    in.targets.reserve(samples.size());
    if (want_masks) {
        in.indices.offsets.reserve(samples.size() + 1);
        in.indices.offsets.push_back(0);
    }

    const int per_rx = dirs.size();
    for (const std::int32_t id : samples) {
        const int rx_idx = id / per_rx;
        const int lin = id % per_rx;
        const int i_theta = lin / dirs.n_phi;
        const int j_phi = lin % dirs.n_phi;
        const double theta = dirs.theta_deg(i_theta);
        const double phi = dirs.phi_deg(j_phi);
        const Vec3 rx = sd.spectra.rx_positions[static_cast<std::size_t>(rx_idx)];

        in.queries.push_back({rx, theta, phi});
        const double loss_db =
            sd.spectra.loss_db[static_cast<std::size_t>(rx_idx)]
                              [static_cast<std::size_t>(j_phi * dirs.n_theta + i_theta)];
        in.targets.push_back(normalize_loss_db(loss_db, mc.loss_range_db));

        if (want_masks) {
            const std::vector<int> window =
                aggregate_window(sd.los_maps[static_cast<std::size_t>(rx_idx)], theta, phi,
                                 mc.window_theta_deg, mc.window_phi_deg);
            LosMask mask = build_mask(window, rx, sd.grid, mc.n_max_los, theta, phi);
            for (const std::int32_t v : mask.los_voxels)
                in.indices.flat.push_back(v);
            in.indices.flat.push_back(static_cast<std::int32_t>(K));
            in.indices.offsets.push_back(static_cast<std::int32_t>(in.indices.flat.size()));
        }
    }
    return in;
}

} // namespace

TrainResult train_model(const TrainConfig &config, const Dataset &dataset,
                        const std::string &out_dir) {
    if (config.epochs < 1)
        throw std::invalid_argument("epochs must be positive");
    fs::create_directories(out_dir);

    const DirectionGrid dirs = dataset.manifest.config.direction_grid();
    TrainResult result;
    result.split = split_scenes(dataset.manifest.scene_ids, config.split_ratio,
                                derive_seed(config.seed, "split"));

    // Resolve the train scenes against the dataset order.
    std::vector<TrainScene> train_scenes;
    for (const std::string &id : result.split.train_scenes) {
        for (std::size_t s = 0; s < dataset.manifest.scene_ids.size(); ++s) {
            if (dataset.manifest.scene_ids[s] == id) {
                TrainScene ts;
                ts.data = &dataset.scenes[s];
                const int avail = static_cast<int>(ts.data->spectra.rx_positions.size());
                ts.n_rx = config.rx_per_scene > 0 ? std::min(config.rx_per_scene, avail) : avail;
                train_scenes.push_back(ts);
                break;
            }
        }
    }

    Model model(config.model, derive_seed(config.seed, "init"));
    nn::AdamState adam = nn::AdamState::create(model.params(), config.lr);
    Rng dropout_rng(derive_seed(config.seed, "dropout"));

    std::vector<std::int64_t> samples_per_scene;
    for (const TrainScene &ts : train_scenes)
        samples_per_scene.push_back(static_cast<std::int64_t>(ts.n_rx) * dirs.size());

    const bool masked =
        config.model.kind == "radtwin" && config.model.use_los_mask;
    const bool needs_encoding = config.model.kind == "radtwin";

    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.bin").string();
    std::ofstream curve((fs::path(out_dir) / "loss_curve.csv").string(), std::ios::trunc);
    curve << "epoch,lr,train_loss\n";

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<EpochBatch> batches = scene_aware_batches(
            samples_per_scene, config.batch_size, derive_seed(config.seed, "batches"), epoch);

        double loss_sum = 0.0;
        std::int64_t loss_count = 0;
        for (const EpochBatch &batch : batches) {
            const TrainScene &ts = train_scenes[static_cast<std::size_t>(batch.scene)];
            BatchInputs in = assemble_batch(ts, batch.samples, dirs, config.model, masked);

            nn::Tape tape;
            SceneEncoding enc;
            const SceneEncoding *enc_ptr = nullptr;
            if (needs_encoding) {
                enc = model.encode_scene(tape, ts.data->grid);
                enc_ptr = &enc;
            }
            nn::TensorPtr pred = model.forward_batch(tape, in.queries, enc_ptr,
                                                     masked ? &in.indices : nullptr, true,
                                                     &dropout_rng);
            const int n_targets = static_cast<int>(in.targets.size());
            nn::TensorPtr target = tape.constant({n_targets, 1}, std::move(in.targets));
            nn::TensorPtr loss = tape.mse_loss(pred, target);

            if (!std::isfinite(loss->data[0]))
                throw NumericError("training loss is not finite");
            loss_sum += loss->data[0] * static_cast<double>(in.queries.size());
            loss_count += static_cast<std::int64_t>(in.queries.size());

            model.params().zero_grad();
            tape.backward(loss);
            nn::adam_step(model.params(), adam);
            tape.clear();
        }

        const double epoch_loss = loss_sum / static_cast<double>(loss_count);
        result.epoch_loss.push_back(epoch_loss);
        result.epoch_lr.push_back(adam.lr);
        curve << epoch << "," << adam.lr << "," << epoch_loss << "\n";
        curve.flush();

        nn::step_lr(adam, epoch, config.lr_gamma, config.lr_step_epochs);
        save_model(model, ckpt_path);
    }

    result.checkpoint_path = ckpt_path;
    return result;
}

nlohmann::json EvalSummary::to_json() const {
    nlohmann::json per_rx = nlohmann::json::array();
    for (const EvalRecord &r : records)
        per_rx.push_back({{"scene_id", r.scene_id},
                          {"rx_index", r.rx_index},
                          {"nmse_db", r.nmse_db},
                          {"ssim", r.ssim}});
    return {{"median_nmse_db", median_nmse_db},
            {"median_ssim", median_ssim},
            {"p90_ssim", p90_ssim},
            {"p10_ssim", p10_ssim},
            {"p90_nmse_db", p90_nmse_db},
            {"mean_nmse_db", mean_nmse_db},
            {"mean_ssim", mean_ssim},
            {"n_rx", records.size()},
            {"per_rx", per_rx}};
}

EvalSummary evaluate_model(const Model &model, const Dataset &dataset,
                           const std::vector<std::string> &scene_ids) {
    const DirectionGrid dirs = dataset.manifest.config.direction_grid();
    const double range_db = model.config().loss_range_db;
    EvalSummary summary;

    for (const std::string &id : scene_ids) {
        const SceneData *sd = nullptr;
        for (std::size_t s = 0; s < dataset.manifest.scene_ids.size(); ++s)
            if (dataset.manifest.scene_ids[s] == id)
                sd = &dataset.scenes[s];
        if (sd == nullptr)
            throw MissingArtifactError("scene not in dataset: " + id);

        nn::Tape enc_tape;
        enc_tape.recording = false;
        SceneEncoding enc;
        if (model.config().kind == "radtwin")
            enc = model.encode_scene(enc_tape, sd->grid);

        for (std::size_t r = 0; r < sd->spectra.rx_positions.size(); ++r) {
            const Vec3 rx = sd->spectra.rx_positions[r];
            SpatialSpectrum pred =
                model.config().kind == "mlp"
                    ? model.predict_spectrum_mlp(rx, sd->scene.room_dims, dirs)
                    : model.predict_spectrum(enc, rx, dirs, sd->los_maps[r]);

            std::vector<double> truth(sd->spectra.loss_db[r].size());
            for (std::size_t i = 0; i < truth.size(); ++i)
                truth[i] = normalize_loss_db(sd->spectra.loss_db[r][i], range_db);

            EvalRecord record;
            record.scene_id = id;
            record.rx_index = static_cast<int>(r);
            record.nmse_db = nmse_db(pred.values, truth);
            record.ssim = ssim(pred.values, truth, dirs.n_phi, dirs.n_theta);
            summary.records.push_back(std::move(record));
        }
    }

    std::vector<double> nmses;
    std::vector<double> ssims;
    for (const EvalRecord &r : summary.records) {
        nmses.push_back(r.nmse_db);
        ssims.push_back(r.ssim);
    }
    summary.median_nmse_db = percentile(nmses, 50.0);
    summary.median_ssim = percentile(ssims, 50.0);
    summary.p90_ssim = percentile(ssims, 90.0);
    summary.p10_ssim = percentile(ssims, 10.0);
    summary.p90_nmse_db = percentile(nmses, 90.0);
    summary.mean_nmse_db = std::accumulate(nmses.begin(), nmses.end(), 0.0) /
                           static_cast<double>(nmses.size());
    summary.mean_ssim = std::accumulate(ssims.begin(), ssims.end(), 0.0) /
                        static_cast<double>(ssims.size());
    return summary;
}

} // namespace radtwin
