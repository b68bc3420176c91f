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

#include <string>
#include <vector>

#include "radtwin/emrt.hpp"
#include "radtwin/geometry.hpp"
#include "radtwin/scene.hpp"

namespace radtwin {

/// One specular multipath component between the fixed TX and a receiver.
struct PathComponent {
    double delta_amplitude = 0.0; // amplitude attenuation, (0, 1]
    double delta_phase = 0.0;     // phase shift in radians, [0, 2*pi)
    Vec3 arrival_dir;             // unit vector from RX toward the last bounce
    double path_length = 0.0;     // meters
    int bounce_count = 0;
};

/// Directional received power over a spherical grid. Values are linear power,
/// stored phi-row-major: values[j_phi * n_theta + i_theta], matching the
/// matrix convention of one row per elevation.
struct SpatialSpectrum {
    int n_theta = 0;
    int n_phi = 0;
    std::vector<double> values;
    Vec3 rx_position;
    std::string scene_id;

    double &at(int i_theta, int j_phi) {
        return values[static_cast<std::size_t>(j_phi * n_theta + i_theta)];
    }
    double at(int i_theta, int j_phi) const {
        return values[static_cast<std::size_t>(j_phi * n_theta + i_theta)];
    }
};

struct OracleConfig {
    int max_order = 2;              // maximum wall-bounce count
    double frequency_hz = 3.5e9;
    double reflection_coeff = 0.6;  // amplitude loss per wall bounce
    double tx_amplitude = 1.0;
    double beamwidth_deg = 10.0;    // hard receive cone per grid direction
    double loss_floor_db = 250.0;   // reported path loss for zero power
};

/// Enumerates specular multipath components by mirroring the TX across the
/// six room walls up to max_order bounces (image method). Obstacles act as
/// occluders: a candidate path is dropped when any folded segment passes
/// through a box interior. Per path, delta_amplitude is
/// lambda / (4*pi*length) * r^bounces and delta_phase is
/// 2*pi*length/lambda mod 2*pi.
std::vector<PathComponent> trace_paths(const Scene &scene, const Vec3 &rx, int max_order,
                                       double frequency_hz, double reflection_coeff = 0.6);

/// Coherent sum per grid direction over paths arriving within half the
/// beamwidth of that direction, squared to power.
SpatialSpectrum render_spectrum(const std::vector<PathComponent> &paths,
                                const DirectionGrid &dirs, double tx_amplitude,
                                double beamwidth_deg);

/// Elementwise -10*log10(power), with zero power mapped to floor_db.
/// Same layout as SpatialSpectrum::values.
std::vector<double> path_loss_db(const SpatialSpectrum &spectrum, double floor_db = 250.0);

/// True when segment a-b crosses the interior of any obstacle box.
bool segment_occluded(const Scene &scene, const Vec3 &a, const Vec3 &b);

/// Per-scene channel record: receiver positions with their directional
/// path-loss matrices in dB.
struct SceneSpectra {
    std::string scene_id;
    int n_theta = 0;
    int n_phi = 0;
    double frequency_hz = 0.0;
    std::vector<Vec3> rx_positions;
    std::vector<std::vector<double>> loss_db; // per RX, phi-row-major
};

/// Binary record format, little-endian: scene id (u32 length + bytes),
/// u32 n_rx, u32 n_theta, u32 n_phi, f64 frequency; then per RX the position
/// as 3 float32 followed by n_theta*n_phi float32 path-loss dB values in
/// phi-row order.
void save_scene_spectra(const SceneSpectra &rec, const std::string &path);
SceneSpectra load_scene_spectra(const std::string &path);

} // namespace radtwin
