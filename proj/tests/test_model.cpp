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
#include <filesystem>
#include <numeric>

#include "radtwin/model.hpp"
#include "support/gradcheck.hpp"

using namespace radtwin;
using namespace radtwin::testsupport;
using nn::Tape;
using nn::TensorPtr;

namespace {

struct Fixture {
    Scene scene;
    VoxelGrid grid;
};

Fixture make_fixture(std::uint64_t seed) {
    SceneConfig config;
    Fixture f;
    f.scene = generate_scene(config, seed);
    const PointCloud cloud = sample_point_cloud(f.scene, 25000, derive_seed(seed, "cloud"));
    f.grid = voxelize(cloud, f.scene.room_dims, {0.5, 0.5, 0.5}, 2);
    return f;
}

} // namespace

TEST_CASE("scene encoding structure") {
    const Fixture f = make_fixture(5);
    const Model model(ModelConfig{}, 99);
    const std::size_t K = f.grid.num_occupied();

    Tape tape;
    tape.recording = false;
    const SceneEncoding enc = model.encode_scene(tape, f.grid);
    REQUIRE(enc.voxel_features->shape == std::vector<int>{static_cast<int>(K), 48});

    SUBCASE("every row carries the identical 16-entry global suffix") {
        for (std::size_t k = 1; k < K; ++k)
            for (int j = 32; j < 48; ++j)
                CHECK(enc.voxel_features->data[k * 48 + static_cast<std::size_t>(j)] ==
                      enc.voxel_features->data[static_cast<std::size_t>(j)]);
    }
    SUBCASE("encoding is deterministic") {
        Tape tape2;
        tape2.recording = false;
        const SceneEncoding enc2 = model.encode_scene(tape2, f.grid);
        CHECK(enc.voxel_features->data == enc2.voxel_features->data);
    }
    SUBCASE("local rows depend only on the voxel center") {
        // Drop one distant occupied voxel and re-encode: shared rows keep
        // their local half bit-identical while the global suffix moves.
        VoxelGrid smaller = f.grid;
        smaller.occupied.pop_back();
        smaller.rebuild_lookup();
        Tape tape2;
        tape2.recording = false;
        const SceneEncoding enc2 = model.encode_scene(tape2, smaller);
        for (std::size_t k = 0; k + 1 < K; ++k)
            for (int j = 0; j < 32; ++j)
                CHECK(enc2.voxel_features->data[k * 48 + static_cast<std::size_t>(j)] ==
                      enc.voxel_features->data[k * 48 + static_cast<std::size_t>(j)]);
        bool suffix_differs = false;
        for (int j = 32; j < 48; ++j)
            if (enc2.voxel_features->data[static_cast<std::size_t>(j)] !=
                enc.voxel_features->data[static_cast<std::size_t>(j)])
                suffix_differs = true;
        CHECK(suffix_differs);
    }
}

TEST_CASE("empty grids cannot be encoded") {
    const Model model(ModelConfig{}, 1);
    VoxelGrid empty;
    empty.voxel_size = {0.5, 0.5, 0.5};
    empty.grid_dims = {2, 2, 2};
    empty.room_dims = {1, 1, 1};
    empty.rebuild_lookup();
    Tape tape;
    CHECK_THROWS_WITH_AS(model.encode_scene(tape, empty), "empty scene encoding",
                         std::runtime_error);
}

TEST_CASE("query embedding") {
    const Model model(ModelConfig{}, 7);
    const Vec3 room{6, 4, 2.5};
    Tape tape;
    tape.recording = false;

    const TensorPtr a = model.embed_queries(tape, {{{2, 1, 1}, 40.0, 60.0}}, room);
    CHECK(a->shape == std::vector<int>{1, 128});

    const TensorPtr b = model.embed_queries(tape, {{{2, 1, 1}, 40.0, 60.0}}, room);
    CHECK(a->data == b->data);

    const TensorPtr c = model.embed_queries(tape, {{{2, 1, 1}, 400.0, 60.0}}, room);
    CHECK(a->data == c->data); // theta and theta + 360 coincide
}

TEST_CASE("decode respects the clamp for arbitrary parameters") {
    const Fixture f = make_fixture(11);
    Rng rng(400);
    const DirectionGrid dirs = DirectionGrid::ten_degree();
    for (int trial = 0; trial < 3; ++trial) {
        const Model model(ModelConfig{}, derive_seed(1000, "p", static_cast<std::uint64_t>(trial)));
        Tape tape;
        tape.recording = false;
        const SceneEncoding enc = model.encode_scene(tape, f.grid);
        const Vec3 rx{rng.uniform(0.2, 5.8), rng.uniform(0.2, 3.8), rng.uniform(0.2, 2.3)};
        const LosMap los = build_los_map(rx, f.grid, dirs);
        const SpatialSpectrum pred = model.predict_spectrum(enc, rx, dirs, los);
        for (const double v : pred.values) {
            CHECK(v >= 0.0);
            CHECK(v <= model.config().s_max);
        }
        CHECK(pred.n_theta == 36);
        CHECK(pred.n_phi == 19);
    }
}

TEST_CASE("mask faithfulness: perturbing masked rows cannot move the output") {
    const Fixture f = make_fixture(13);
    const Model model(ModelConfig{}, 3);
    const std::size_t K = f.grid.num_occupied();
    REQUIRE(K > 10);

    LosMask mask;
    mask.los_voxels = {1, 4, 7};
    mask.binary_mask.assign(K, 1);
    for (const auto v : mask.los_voxels)
        mask.binary_mask[static_cast<std::size_t>(v)] = 0;

    Rng rng(8);
    const TensorPtr features = nn::make_tensor({static_cast<int>(K) + 1, 48});
    fill_uniform(features, rng);

    const nn::AttentionIndices idx = model.attention_indices({&mask}, K);
    Tape tape;
    tape.recording = false;
    const TensorPtr emb = model.embed_queries(tape, {{{3, 2, 1}, 20.0, 90.0}}, f.scene.room_dims);
    const TensorPtr out_a = model.decode_features(tape, emb, features, &idx, false, nullptr);

    // Arbitrary perturbation of every masked row.
    for (std::size_t k = 0; k < K; ++k)
        if (mask.binary_mask[k] == 1)
            for (int j = 0; j < 48; ++j)
                features->data[k * 48 + static_cast<std::size_t>(j)] =
                    rng.uniform(-1e9, 1e9);

    const TensorPtr out_b = model.decode_features(tape, emb, features, &idx, false, nullptr);
    CHECK(out_a->data == out_b->data); // bit-identical
}

TEST_CASE("deletion equivalence: sparse masked decode equals dense decode on the kept rows") {
    const Fixture f = make_fixture(17);
    const Model model(ModelConfig{}, 21);
    const std::size_t K = f.grid.num_occupied();
    Rng rng(91);

    for (int trial = 0; trial < 5; ++trial) {
        LosMask mask;
        mask.binary_mask.assign(K, 1);
        const int n_keep = static_cast<int>(rng.uniform_int(0, 10));
        std::vector<int> pool(K);
        std::iota(pool.begin(), pool.end(), 0);
        rng.shuffle(pool);
        std::vector<int> keep(pool.begin(), pool.begin() + n_keep);
        std::sort(keep.begin(), keep.end());
        for (const int k : keep) {
            mask.los_voxels.push_back(k);
            mask.binary_mask[static_cast<std::size_t>(k)] = 0;
        }

        Tape tape;
        tape.recording = false;
        const SceneEncoding enc = model.encode_scene(tape, f.grid);
        const TensorPtr emb =
            model.embed_queries(tape, {{{2.5, 2.0, 1.0}, 70.0, 80.0}}, f.scene.room_dims);

        const double sparse_out = model.decode(tape, emb, enc, mask);

        // Reference: keep only unmasked rows plus the fallback token and run
        // the dense (unmasked) decoder over that sub-encoding.
        const TensorPtr full = model.with_fallback(tape, enc);
        std::vector<int> rows = keep;
        rows.push_back(static_cast<int>(K));
        const TensorPtr sub = tape.gather_rows(full, rows);
        const TensorPtr dense_out = model.decode_features(tape, emb, sub, nullptr, false, nullptr);

        CHECK(std::fabs(sparse_out - dense_out->data[0]) < 1e-9);
    }
}

TEST_CASE("decode is equivariant to voxel row permutation") {
    const Model model(ModelConfig{}, 55);
    Rng rng(17);
    const int K = 12;
    const TensorPtr features = nn::make_tensor({K + 1, 48});
    fill_uniform(features, rng);

    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    TensorPtr permuted = nn::make_tensor({K + 1, 48});
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < 48; ++j)
            permuted->data[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)] * 48 + j)] =
                features->data[static_cast<std::size_t>(k * 48 + j)];
    for (int j = 0; j < 48; ++j) // fallback row stays last
        permuted->data[static_cast<std::size_t>(K * 48 + j)] =
            features->data[static_cast<std::size_t>(K * 48 + j)];

    nn::AttentionIndices idx;
    idx.offsets = {0, 4};
    idx.flat = {1, 5, 9, K};
    nn::AttentionIndices idx_perm;
    idx_perm.offsets = {0, 4};
    for (const std::int32_t v : idx.flat)
        idx_perm.flat.push_back(v == K ? K : perm[static_cast<std::size_t>(v)]);

    Tape tape;
    tape.recording = false;
    const TensorPtr emb = model.embed_queries(tape, {{{1, 1, 1}, 10.0, 100.0}}, {6, 4, 2.5});
    const TensorPtr out_a = model.decode_features(tape, emb, features, &idx, false, nullptr);
    const TensorPtr out_b = model.decode_features(tape, emb, permuted, &idx_perm, false, nullptr);
    CHECK(std::fabs(out_a->data[0] - out_b->data[0]) < 1e-9);
}

TEST_CASE("attention-path gradients reach only unmasked voxel rows") {
    ModelConfig mc;
    mc.s_max = 10.0; // keep the head away from the clamp so gradients flow
    Model model(mc, 77);
    Rng rng(23);
    const int K = 10;
    const TensorPtr features = nn::make_tensor({K + 1, 48}, true);
    fill_uniform(features, rng);

    LosMask mask;
    mask.binary_mask.assign(static_cast<std::size_t>(K), 1);
    mask.los_voxels = {2, 6};
    for (const auto v : mask.los_voxels)
        mask.binary_mask[static_cast<std::size_t>(v)] = 0;
    const nn::AttentionIndices idx = model.attention_indices({&mask}, static_cast<std::size_t>(K));

    Tape tape;
    const TensorPtr emb = model.embed_queries(tape, {{{2, 2, 1}, 30.0, 90.0}}, {6, 4, 2.5});
    const TensorPtr out = model.decode_features(tape, emb, features, &idx, false, nullptr);
    const TensorPtr target = tape.constant({1, 1}, {0.25});
    const TensorPtr loss = tape.mse_loss(out, target);

    features->zero_grad();
    model.params().zero_grad();
    tape.backward(loss);

    for (int k = 0; k < K; ++k) {
        double row_norm = 0.0;
        for (int j = 0; j < 48; ++j)
            row_norm += std::fabs(features->grad[static_cast<std::size_t>(k * 48 + j)]);
        const bool unmasked = mask.binary_mask[static_cast<std::size_t>(k)] == 0;
        if (unmasked)
            CHECK(row_norm > 0.0);
        else
            CHECK(row_norm == 0.0);
    }
    // Fallback row and the query path receive gradient.
    double fb = 0.0;
    for (int j = 0; j < 48; ++j)
        fb += std::fabs(features->grad[static_cast<std::size_t>(K * 48 + j)]);
    CHECK(fb > 0.0);
    double query_grad = 0.0;
    for (const double g : model.params().find("query.fc.w")->grad)
        query_grad += std::fabs(g);
    CHECK(query_grad > 0.0);
}

TEST_CASE("empty LOS sets fall back to the learned token") {
    const Fixture f = make_fixture(23);
    const Model model(ModelConfig{}, 31);
    const std::size_t K = f.grid.num_occupied();

    LosMask empty_mask;
    empty_mask.binary_mask.assign(K, 1);

    Tape tape;
    tape.recording = false;
    const SceneEncoding enc = model.encode_scene(tape, f.grid);
    const TensorPtr emb =
        model.embed_queries(tape, {{{3, 2, 1.2}, 120.0, 40.0}}, f.scene.room_dims);
    const double out_a = model.decode(tape, emb, enc, empty_mask);

    // With every voxel masked, voxel features are invisible: zeroing the
    // whole encoding must not change the prediction.
    const TensorPtr zeroed = nn::make_tensor({static_cast<int>(K) + 1, 48});
    const TensorPtr full = model.with_fallback(tape, enc);
    for (int j = 0; j < 48; ++j) // keep only the fallback row
        zeroed->data[static_cast<std::size_t>(K) * 48 + static_cast<std::size_t>(j)] =
            full->data[static_cast<std::size_t>(K) * 48 + static_cast<std::size_t>(j)];
    const nn::AttentionIndices idx = model.attention_indices({&empty_mask}, K);
    const TensorPtr out_b = model.decode_features(tape, emb, zeroed, &idx, false, nullptr);
    CHECK(out_a == doctest::Approx(out_b->data[0]).epsilon(1e-12));
}

TEST_CASE("the MLP baseline ignores scene geometry") {
    ModelConfig mc;
    mc.kind = "mlp";
    const Model mlp(mc, 5);
    const Fixture fa = make_fixture(101);
    const Fixture fb = make_fixture(102); // different furniture, same room size

    const DirectionGrid dirs = DirectionGrid::ten_degree();
    const Vec3 rx{2.2, 1.7, 1.0};
    const SpatialSpectrum sa = mlp.predict_spectrum_mlp(rx, fa.scene.room_dims, dirs);
    const SpatialSpectrum sb = mlp.predict_spectrum_mlp(rx, fb.scene.room_dims, dirs);
    CHECK(sa.values == sb.values);
    for (const double v : sa.values) {
        CHECK(v >= 0.0);
        CHECK(v <= mc.s_max);
    }
}

TEST_CASE("model checkpoints round trip through save and load") {
    const Model model(ModelConfig{}, 123);
    namespace fs = std::filesystem;
    fs::create_directories("radtwin_test_tmp");
    const std::string path = "radtwin_test_tmp/model.bin";
    save_model(model, path);

    const Model back = load_model(path);
    CHECK(back.config().kind == "radtwin");
    CHECK(back.config().d_hidden == 128);
    REQUIRE(back.params().size() == model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        CHECK(back.params().items()[i].first == model.params().items()[i].first);
        CHECK(back.params().items()[i].second->data == model.params().items()[i].second->data);
    }
}
