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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radtwin/cli.hpp"
#include "radtwin/dataset.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string> &args) {
    std::vector<const char *> argv;
    argv.push_back("radtwin");
    for (const std::string &a : args)
        argv.push_back(a.c_str());
    return radtwin::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string file_bytes(const fs::path &p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

const std::string kDataDir = "radtwin_test_tmp/cli_data";

void ensure_dataset() {
    if (fs::exists(fs::path(kDataDir) / "manifest.json"))
        return;
    REQUIRE(run_cli({"gen", "--out", kDataDir, "--scenes", "3", "--rx", "3", "--points", "8000",
                     "--max-order", "1", "--seed", "5"}) == 0);
}

} // namespace

TEST_CASE("gen validates its configuration") {
    CHECK(run_cli({"gen", "--out", "radtwin_test_tmp/cli_bad", "--scenes", "0"}) == 2);
    CHECK(run_cli({"gen"}) == 2);          // --out missing
    CHECK(run_cli({"frobnicate"}) == 2);   // unknown command
}

TEST_CASE("gen writes a manifest and is byte-reproducible") {
    ensure_dataset();
    CHECK(fs::exists(fs::path(kDataDir) / "manifest.json"));
    CHECK(fs::exists(fs::path(kDataDir) / "gen_config.json"));
    const radtwin::DatasetManifest manifest =
        radtwin::load_manifest((fs::path(kDataDir) / "manifest.json").string());
    CHECK(manifest.scene_ids.size() == 3);

    const std::string rerun_dir = "radtwin_test_tmp/cli_data_rerun";
    fs::remove_all(rerun_dir);
    REQUIRE(run_cli({"gen", "--out", rerun_dir, "--scenes", "3", "--rx", "3", "--points", "8000",
                     "--max-order", "1", "--seed", "5"}) == 0);
    CHECK(file_bytes(fs::path(kDataDir) / "manifest.json") ==
          file_bytes(fs::path(rerun_dir) / "manifest.json"));
    const std::string id = manifest.scene_ids[0];
    CHECK(file_bytes(fs::path(kDataDir) / (id + ".spectra.bin")) ==
          file_bytes(fs::path(rerun_dir) / (id + ".spectra.bin")));
}

TEST_CASE("eval on a missing checkpoint exits with code 3") {
    ensure_dataset();
    CHECK(run_cli({"eval", "--data", kDataDir, "--ckpt", "radtwin_test_tmp/nope.bin", "--out",
                   "radtwin_test_tmp/cli_eval_missing"}) == 3);
}

TEST_CASE("train, eval, render and trace round trip") {
    ensure_dataset();
    const std::string run_dir = "radtwin_test_tmp/cli_run";
    fs::remove_all(run_dir);
    REQUIRE(run_cli({"train", "--data", kDataDir, "--out", run_dir, "--epochs", "1", "--batch",
                     "512", "--ratio", "0.67", "--seed", "3"}) == 0);
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint.bin"));
    CHECK(fs::exists(fs::path(run_dir) / "split.json"));
    CHECK(fs::exists(fs::path(run_dir) / "loss_curve.csv"));
    CHECK(fs::exists(fs::path(run_dir) / "train_config.json"));

    const std::string eval_dir = "radtwin_test_tmp/cli_eval";
    REQUIRE(run_cli({"eval", "--data", kDataDir, "--ckpt",
                     (fs::path(run_dir) / "checkpoint.bin").string(), "--out", eval_dir}) == 0);
    nlohmann::json metrics;
    std::ifstream((fs::path(eval_dir) / "metrics.json").string()) >> metrics;
    CHECK(metrics.contains("median_ssim"));
    CHECK(metrics.contains("median_nmse_db"));
    CHECK(metrics.contains("p90_ssim"));

    // Render against a scene from the manifest.
    const radtwin::DatasetManifest manifest =
        radtwin::load_manifest((fs::path(kDataDir) / "manifest.json").string());
    const std::string render_dir = "radtwin_test_tmp/cli_render";
    REQUIRE(run_cli({"render", "--data", kDataDir, "--ckpt",
                     (fs::path(run_dir) / "checkpoint.bin").string(), "--scene",
                     manifest.scene_ids[0], "--rx", "3.1,2.2,1.0", "--out", render_dir}) == 0);
    const std::string pgm =
        file_bytes(fs::path(render_dir) / (manifest.scene_ids[0] + "_rx_truth.pgm"));
    CHECK(pgm.substr(0, 12) == "P5\n36 19\n255"); // width x height of the 19x36 spectrum
    CHECK(fs::exists(fs::path(render_dir) / (manifest.scene_ids[0] + "_rx_pred.csv")));

    const std::string trace_dir = "radtwin_test_tmp/cli_trace";
    REQUIRE(run_cli({"trace", "--scene",
                     (fs::path(kDataDir) / (manifest.scene_ids[0] + ".scene.json")).string(),
                     "--rx", "3.0,2.0,1.0", "--out", trace_dir, "--points", "8000"}) == 0);
    const std::string csv = file_bytes(fs::path(trace_dir) / "los.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 685); // header + 684 directions
    CHECK(fs::exists(fs::path(trace_dir) / "grid.json"));

    // Bad receiver syntax is a config error.
    CHECK(run_cli({"render", "--data", kDataDir, "--ckpt",
                   (fs::path(run_dir) / "checkpoint.bin").string(), "--scene",
                   manifest.scene_ids[0], "--rx", "oops", "--out", render_dir}) == 2);
}
