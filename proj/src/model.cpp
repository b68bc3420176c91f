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

#include "radtwin/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "radtwin/nn/checkpoint.hpp"

namespace radtwin {

namespace {

double wrap_theta(double theta_deg) {
    double t = std::fmod(theta_deg, 360.0);
    if (t < 0.0)
        t += 360.0;
    return t;
}

std::vector<double> normalized_coords(const Vec3 &p, const Vec3 &room) {
    return {2.0 * p.x / room.x - 1.0, 2.0 * p.y / room.y - 1.0, 2.0 * p.z / room.z - 1.0};
}

} // namespace

double normalize_loss_db(double loss_db, double range_db) {
    return std::clamp(loss_db / range_db, 0.0, 1.0);
}

nlohmann::json ModelConfig::to_json() const {
    return {{"kind", kind},
            {"d_local", d_local},
            {"d_global", d_global},
            {"conv_channels", conv_channels},
            {"n_decoder_layers", n_decoder_layers},
            {"n_heads", n_heads},
            {"d_hidden", d_hidden},
            {"dropout", dropout},
            {"pe_bands_pos", pe_bands_pos},
            {"pe_bands_dir", pe_bands_dir},
            {"s_max", s_max},
            {"loss_range_db", loss_range_db},
            {"head_bias_init", head_bias_init},
            {"n_max_los", n_max_los},
            {"window_theta_deg", window_theta_deg},
            {"window_phi_deg", window_phi_deg},
            {"use_los_mask", use_los_mask}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json &j) {
    ModelConfig c;
    c.kind = j.at("kind").get<std::string>();
    c.d_local = j.at("d_local").get<int>();
    c.d_global = j.at("d_global").get<int>();
    c.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
    c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_hidden = j.at("d_hidden").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.pe_bands_pos = j.at("pe_bands_pos").get<int>();
    c.pe_bands_dir = j.at("pe_bands_dir").get<int>();
    c.s_max = j.at("s_max").get<double>();
    c.loss_range_db = j.at("loss_range_db").get<double>();
    c.head_bias_init = j.at("head_bias_init").get<double>();
    c.n_max_los = j.at("n_max_los").get<int>();
    c.window_theta_deg = j.at("window_theta_deg").get<double>();
    c.window_phi_deg = j.at("window_phi_deg").get<double>();
    c.use_los_mask = j.at("use_los_mask").get<bool>();
    return c;
}

Model::Model(const ModelConfig &config, std::uint64_t init_seed) : config_(config) {
    if (config_.kind != "radtwin" && config_.kind != "mlp")
        throw std::invalid_argument("unknown model kind: " + config_.kind);
    if (config_.n_heads != 1)
        throw std::invalid_argument("only single-head attention is supported");

    Rng rng(derive_seed(init_seed, "model-init"));
    const int qf = config_.query_feature_width();
    const int dh = config_.d_hidden;
    const int fw = config_.voxel_feature_width();

    auto add_linear = [&](const std::string &name, int fan_in, int fan_out) {
        init_uniform_fan_in(params_.add(name + ".w", {fan_in, fan_out}), fan_in, rng);
        init_uniform_fan_in(params_.add(name + ".b", {fan_out}), fan_in, rng);
    };

    if (config_.kind == "mlp") {
        add_linear("mlp.l1", qf, dh);
        add_linear("mlp.l2", dh, dh);
        add_linear("mlp.l3", dh, dh);
        add_linear("mlp.l4", dh, 1);
        // Zero-init the output projection and start its bias at the
        // no-signal level: the raw head then launches inside (0, s_max) for
        // every sample. A spread initialization saturates a large fraction
        // of the batch against the clamp, whose flat region has no gradient
        // to pull them back.
        init_constant(params_.find("mlp.l4.w"), 0.0);
        init_constant(params_.find("mlp.l4.b"), config_.head_bias_init);
        return;
    }

    const int pe_pos = 6 * config_.pe_bands_pos;
    add_linear("srn.local_fc", pe_pos, config_.d_local);
    const std::array<int, 3> ch = config_.conv_channels;
    init_uniform_fan_in(params_.add("srn.conv1.k", {ch[0], config_.d_local, 3, 3, 3}),
                        config_.d_local * 27, rng);
    init_uniform_fan_in(params_.add("srn.conv2.k", {ch[1], ch[0], 3, 3, 3}), ch[0] * 27, rng);
    init_uniform_fan_in(params_.add("srn.conv3.k", {ch[2], ch[1], 3, 3, 3}), ch[1] * 27, rng);
    add_linear("srn.global_fc", ch[2], config_.d_global);

    add_linear("query.fc", qf, dh);
    init_uniform_fan_in(params_.add("fallback.token", {1, fw}), fw, rng);

    for (int l = 0; l < config_.n_decoder_layers; ++l) {
        const std::string p = "dec" + std::to_string(l);
        init_uniform_fan_in(params_.add(p + ".attn.wq", {dh, dh}), dh, rng);
        init_uniform_fan_in(params_.add(p + ".attn.wk", {fw, dh}), fw, rng);
        init_uniform_fan_in(params_.add(p + ".attn.wv", {fw, dh}), fw, rng);
        init_constant(params_.add(p + ".ln1.gamma", {dh}), 1.0);
        init_constant(params_.add(p + ".ln1.beta", {dh}), 0.0);
        add_linear(p + ".ffn.l1", dh, dh);
        add_linear(p + ".ffn.l2", dh, dh);
        init_constant(params_.add(p + ".ln2.gamma", {dh}), 1.0);
        init_constant(params_.add(p + ".ln2.beta", {dh}), 0.0);
    }
    add_linear("head", dh, 1);
    init_constant(params_.find("head.w"), 0.0);
    init_constant(params_.find("head.b"), config_.head_bias_init);
}

SceneEncoding Model::encode_scene(nn::Tape &tape, const VoxelGrid &grid) const {
    if (config_.kind != "radtwin")
        throw std::logic_error("encode_scene on a geometry-blind model");
    const std::size_t K = grid.num_occupied();
    if (K == 0)
        throw std::runtime_error("empty scene encoding");

    // Positional-encode normalized voxel centers.
    std::vector<double> pe;
    pe.reserve(K * static_cast<std::size_t>(6 * config_.pe_bands_pos));
    std::vector<int> cells(K);
    for (std::size_t k = 0; k < K; ++k) {
        const OccupiedVoxel &v = grid.occupied[k];
        const std::vector<double> row =
            nn::positional_encoding(normalized_coords(v.center, grid.room_dims),
                                    config_.pe_bands_pos);
        pe.insert(pe.end(), row.begin(), row.end());
        cells[k] = grid.cell_linear(v.index[0], v.index[1], v.index[2]);
    }
    nn::TensorPtr pe_t = tape.constant(
        {static_cast<int>(K), 6 * config_.pe_bands_pos}, std::move(pe));

    nn::TensorPtr local = tape.relu(
        tape.linear(pe_t, params_.find("srn.local_fc.w"), params_.find("srn.local_fc.b")));

    // Dense feature volume is [C, D', H', W'] with x fastest, matching the
    // grid's cell_linear layout.
    const std::array<int, 3> dims = {grid.grid_dims[2], grid.grid_dims[1], grid.grid_dims[0]};
    nn::TensorPtr volume = tape.scatter_rows(local, cells, dims);
    nn::TensorPtr h = volume;
    h = tape.relu(tape.conv3d(h, params_.find("srn.conv1.k"), 2, 1));
    h = tape.relu(tape.conv3d(h, params_.find("srn.conv2.k"), 2, 1));
    h = tape.relu(tape.conv3d(h, params_.find("srn.conv3.k"), 2, 1));
    nn::TensorPtr pooled = tape.global_avg_pool(h);
    nn::TensorPtr global = tape.linear(pooled, params_.find("srn.global_fc.w"),
                                       params_.find("srn.global_fc.b"));

    SceneEncoding enc;
    enc.voxel_features =
        tape.concat_cols(local, tape.repeat_row(global, static_cast<int>(K)));
    enc.grid = &grid;
    return enc;
}

std::vector<double> Model::query_features(const std::vector<Query> &queries,
                                          const Vec3 &room_dims) const {
    std::vector<double> features;
    features.reserve(queries.size() * static_cast<std::size_t>(config_.query_feature_width()));
    for (const Query &q : queries) {
        const std::vector<double> pos_pe =
            nn::positional_encoding(normalized_coords(q.rx, room_dims), config_.pe_bands_pos);
        const Vec3 d = direction_vector(wrap_theta(q.theta_deg), q.phi_deg);
        const std::vector<double> dir_pe =
            nn::positional_encoding({d.x, d.y, d.z}, config_.pe_bands_dir);
        features.insert(features.end(), pos_pe.begin(), pos_pe.end());
        features.insert(features.end(), dir_pe.begin(), dir_pe.end());
    }
    return features;
}

nn::TensorPtr Model::embed_queries(nn::Tape &tape, const std::vector<Query> &queries,
                                   const Vec3 &room_dims) const {
    nn::TensorPtr feat = tape.constant(
        {static_cast<int>(queries.size()), config_.query_feature_width()},
        query_features(queries, room_dims));
    return tape.linear(feat, params_.find("query.fc.w"), params_.find("query.fc.b"));
}

nn::TensorPtr Model::with_fallback(nn::Tape &tape, const SceneEncoding &enc) const {
    return tape.concat_rows(enc.voxel_features, params_.find("fallback.token"));
}

nn::AttentionIndices Model::attention_indices(const std::vector<const LosMask *> &masks,
                                              std::size_t K) const {
    nn::AttentionIndices idx;
    idx.offsets.reserve(masks.size() + 1);
    idx.offsets.push_back(0);
    for (const LosMask *mask : masks) {
        for (const std::int32_t v : mask->los_voxels)
            idx.flat.push_back(v);
        idx.flat.push_back(static_cast<std::int32_t>(K)); // fallback row
        idx.offsets.push_back(static_cast<std::int32_t>(idx.flat.size()));
    }
    return idx;
}

nn::TensorPtr Model::decode_features(nn::Tape &tape, const nn::TensorPtr &query_emb,
                                     const nn::TensorPtr &features_with_fallback,
                                     const nn::AttentionIndices *idx, bool training,
                                     Rng *dropout_rng) const {
    if (config_.kind != "radtwin")
        throw std::logic_error("decode on a geometry-blind model");
    const bool drop = training && config_.dropout > 0.0;
    if (drop && dropout_rng == nullptr)
        throw std::invalid_argument("training decode needs a dropout rng");

    nn::TensorPtr h = query_emb;
    for (int l = 0; l < config_.n_decoder_layers; ++l) {
        const std::string p = "dec" + std::to_string(l);
        nn::TensorPtr kproj = tape.matmul(features_with_fallback, params_.find(p + ".attn.wk"));
        nn::TensorPtr vproj = tape.matmul(features_with_fallback, params_.find(p + ".attn.wv"));
        nn::TensorPtr q = tape.matmul(h, params_.find(p + ".attn.wq"));

        nn::TensorPtr attn;
        if (idx != nullptr) {
            attn = tape.sparse_cross_attention(q, kproj, vproj, *idx);
        } else {
            // Dense attention over every row; bias-free softmax.
            nn::TensorPtr scores = tape.scale(
                tape.matmul_nt(q, kproj), 1.0 / std::sqrt(static_cast<double>(config_.d_hidden)));
            attn = tape.matmul(tape.softmax_lastdim(scores), vproj);
        }
        if (drop)
            attn = tape.dropout(attn, config_.dropout, true, dropout_rng->next_u64());
        h = tape.layer_norm(tape.add(h, attn), params_.find(p + ".ln1.gamma"),
                            params_.find(p + ".ln1.beta"));

        nn::TensorPtr ffn = tape.linear(
            tape.relu(tape.linear(h, params_.find(p + ".ffn.l1.w"), params_.find(p + ".ffn.l1.b"))),
            params_.find(p + ".ffn.l2.w"), params_.find(p + ".ffn.l2.b"));
        if (drop)
            ffn = tape.dropout(ffn, config_.dropout, true, dropout_rng->next_u64());
        h = tape.layer_norm(tape.add(h, ffn), params_.find(p + ".ln2.gamma"),
                            params_.find(p + ".ln2.beta"));
    }

    nn::TensorPtr raw = tape.linear(h, params_.find("head.w"), params_.find("head.b"));
    return tape.clamp_max(tape.relu(raw), config_.s_max);
}

double Model::decode(nn::Tape &tape, const nn::TensorPtr &query_emb, const SceneEncoding &enc,
                     const LosMask &mask, bool training, Rng *dropout_rng) const {
    const std::size_t K = enc.grid->num_occupied();
    if (mask.binary_mask.size() != K)
        throw std::invalid_argument("mask length does not match encoding");
    const nn::AttentionIndices idx = attention_indices({&mask}, K);
    nn::TensorPtr features = with_fallback(tape, enc);
    nn::TensorPtr out =
        decode_features(tape, query_emb, features, &idx, training, dropout_rng);
    return out->data[0];
}

nn::TensorPtr Model::mlp_forward(nn::Tape &tape, const nn::TensorPtr &query_features) const {
    if (config_.kind != "mlp")
        throw std::logic_error("mlp_forward on a non-MLP model");
    nn::TensorPtr h = query_features;
    h = tape.relu(tape.linear(h, params_.find("mlp.l1.w"), params_.find("mlp.l1.b")));
    h = tape.relu(tape.linear(h, params_.find("mlp.l2.w"), params_.find("mlp.l2.b")));
    h = tape.relu(tape.linear(h, params_.find("mlp.l3.w"), params_.find("mlp.l3.b")));
    nn::TensorPtr raw = tape.linear(h, params_.find("mlp.l4.w"), params_.find("mlp.l4.b"));
    return tape.clamp_max(tape.relu(raw), config_.s_max);
}

nn::TensorPtr Model::forward_batch(nn::Tape &tape, const std::vector<Query> &queries,
                                   const SceneEncoding *enc, const nn::AttentionIndices *idx,
                                   bool training, Rng *dropout_rng) const {
    if (config_.kind == "mlp") {
        const Vec3 room = enc != nullptr ? enc->grid->room_dims : Vec3{1.0, 1.0, 1.0};
        nn::TensorPtr feat = tape.constant(
            {static_cast<int>(queries.size()), config_.query_feature_width()},
            query_features(queries, room));
        return mlp_forward(tape, feat);
    }
    if (enc == nullptr)
        throw std::invalid_argument("propagation decode needs a scene encoding");
    nn::TensorPtr emb = embed_queries(tape, queries, enc->grid->room_dims);
    nn::TensorPtr features = with_fallback(tape, *enc);
    return decode_features(tape, emb, features, idx, training, dropout_rng);
}

SpatialSpectrum Model::predict_spectrum(const SceneEncoding &enc, const Vec3 &rx,
                                        const DirectionGrid &dirs, const LosMap &los) const {
    const std::size_t K = enc.grid->num_occupied();

    std::vector<Query> queries;
    queries.reserve(static_cast<std::size_t>(dirs.size()));
    std::vector<LosMask> masks;
    masks.reserve(static_cast<std::size_t>(dirs.size()));
    for (int i = 0; i < dirs.n_theta; ++i)
        for (int j = 0; j < dirs.n_phi; ++j) {
            const double theta = dirs.theta_deg(i);
            const double phi = dirs.phi_deg(j);
            queries.push_back({rx, theta, phi});
            const std::vector<int> window = aggregate_window(
                los, theta, phi, config_.window_theta_deg, config_.window_phi_deg);
            masks.push_back(build_mask(window, rx, *enc.grid, config_.n_max_los, theta, phi));
        }

    std::vector<const LosMask *> mask_ptrs;
    mask_ptrs.reserve(masks.size());
    for (const LosMask &m : masks)
        mask_ptrs.push_back(&m);

    nn::Tape tape;
    tape.recording = false;
    const nn::AttentionIndices idx = attention_indices(mask_ptrs, K);
    nn::TensorPtr pred = config_.use_los_mask
                             ? forward_batch(tape, queries, &enc, &idx, false, nullptr)
                             : forward_batch(tape, queries, &enc, nullptr, false, nullptr);

    SpatialSpectrum spectrum;
    spectrum.n_theta = dirs.n_theta;
    spectrum.n_phi = dirs.n_phi;
    spectrum.values.assign(static_cast<std::size_t>(dirs.size()), 0.0);
    spectrum.rx_position = rx;
    std::size_t q = 0;
    for (int i = 0; i < dirs.n_theta; ++i)
        for (int j = 0; j < dirs.n_phi; ++j, ++q)
            spectrum.at(i, j) = pred->data[q];
    return spectrum;
}

SpatialSpectrum Model::predict_spectrum_mlp(const Vec3 &rx, const Vec3 &room_dims,
                                            const DirectionGrid &dirs) const {
    std::vector<Query> queries;
    queries.reserve(static_cast<std::size_t>(dirs.size()));
    for (int i = 0; i < dirs.n_theta; ++i)
        for (int j = 0; j < dirs.n_phi; ++j)
            queries.push_back({rx, dirs.theta_deg(i), dirs.phi_deg(j)});

    nn::Tape tape;
    tape.recording = false;
    nn::TensorPtr feat = tape.constant(
        {static_cast<int>(queries.size()), config_.query_feature_width()},
        query_features(queries, room_dims));
    nn::TensorPtr pred = mlp_forward(tape, feat);

    SpatialSpectrum spectrum;
    spectrum.n_theta = dirs.n_theta;
    spectrum.n_phi = dirs.n_phi;
    spectrum.values.assign(static_cast<std::size_t>(dirs.size()), 0.0);
    spectrum.rx_position = rx;
    std::size_t q = 0;
    for (int i = 0; i < dirs.n_theta; ++i)
        for (int j = 0; j < dirs.n_phi; ++j, ++q)
            spectrum.at(i, j) = pred->data[q];
    return spectrum;
}

Model load_model(const std::string &checkpoint_path) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
    Model model(ModelConfig::from_json(nlohmann::json::parse(ckpt.config_json)), 0);
    nn::load_into_store(ckpt, model.params());
    return model;
}

void save_model(const Model &model, const std::string &checkpoint_path) {
    nn::save_checkpoint(checkpoint_path, model.config().to_json().dump(), model.params());
}

} // namespace radtwin
