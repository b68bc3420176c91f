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

#include "radtwin/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "radtwin/binary_io.hpp"

namespace radtwin {

namespace {

// Unfolded mirror-lattice coordinate along one axis: 2*n*L + s*tx with
// s = +1 costing |2n| bounces and s = -1 costing |2n - 1|.
struct AxisImage {
    double coord;
    int bounces;
};

std::vector<AxisImage> axis_images(double tx, double room_len, int max_order) {
    std::vector<AxisImage> images;
    for (int n = -(max_order + 1) / 2 - 1; n <= (max_order + 1) / 2 + 1; ++n) {
        const int b_same = std::abs(2 * n);
        if (b_same <= max_order)
            images.push_back({2.0 * n * room_len + tx, b_same});
        const int b_mirror = std::abs(2 * n - 1);
        if (b_mirror <= max_order)
            images.push_back({2.0 * n * room_len - tx, b_mirror});
    }
    return images;
}

// Maps an unfolded coordinate back into [0, L] (triangle wave of period 2L).
double fold_coord(double u, double room_len) {
    const double period = 2.0 * room_len;
    double frac = u - period * std::floor(u / period);
    return frac <= room_len ? frac : period - frac;
}

Vec3 fold_point(const Vec3 &p, const Vec3 &room) {
    return {fold_coord(p.x, room.x), fold_coord(p.y, room.y), fold_coord(p.z, room.z)};
}

// Parameters in (0, 1) where the segment rx -> image crosses a wall plane of
// the mirror lattice (any multiple of the room length per axis).
void collect_wall_crossings(double a, double b, double room_len, std::vector<double> &ts) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const int k_min = static_cast<int>(std::ceil(lo / room_len));
    const int k_max = static_cast<int>(std::floor(hi / room_len));
    for (int k = k_min; k <= k_max; ++k) {
        const double plane = k * room_len;
        if (b == a)
            continue;
        const double t = (plane - a) / (b - a);
        if (t > 1e-12 && t < 1.0 - 1e-12)
            ts.push_back(t);
    }
}

bool segment_hits_box_interior(const Vec3 &a, const Vec3 &b, const Box3 &box) {
    // Slab test in segment parameter space; strict inequalities so grazing
    // contact along a face does not count as blockage.
    double t_enter = 0.0;
    double t_exit = 1.0;
    const Vec3 d = b - a;
    for (int axis = 0; axis < 3; ++axis) {
        const double da = d[axis];
        const double pa = a[axis];
        if (da == 0.0) {
            if (pa <= box.lo[axis] || pa >= box.hi[axis])
                return false;
            continue;
        }
        const double t1 = (box.lo[axis] - pa) / da;
        const double t2 = (box.hi[axis] - pa) / da;
        t_enter = std::max(t_enter, std::min(t1, t2));
        t_exit = std::min(t_exit, std::max(t1, t2));
    }
    return t_enter < t_exit;
}

} // namespace

bool segment_occluded(const Scene &scene, const Vec3 &a, const Vec3 &b) {
    for (const BoxObstacle &obs : scene.obstacles)
        if (segment_hits_box_interior(a, b, obs.box()))
            return true;
    return false;
}

std::vector<PathComponent> trace_paths(const Scene &scene, const Vec3 &rx, int max_order,
                                       double frequency_hz, double reflection_coeff) {
    if (max_order < 0)
        throw std::invalid_argument("max_order must be non-negative");
    if (frequency_hz <= 0.0)
        throw std::invalid_argument("frequency must be positive");
    if (distance(rx, scene.tx_position) < 1e-9)
        throw std::invalid_argument("degenerate geometry");

    const Vec3 room = scene.room_dims;
    const double lambda = kSpeedOfLight / frequency_hz;
    const double two_pi = 2.0 * kPi;

    const std::vector<AxisImage> imgs_x = axis_images(scene.tx_position.x, room.x, max_order);
    const std::vector<AxisImage> imgs_y = axis_images(scene.tx_position.y, room.y, max_order);
    const std::vector<AxisImage> imgs_z = axis_images(scene.tx_position.z, room.z, max_order);

    std::vector<PathComponent> paths;
    std::vector<double> crossings;
    for (const AxisImage &ix : imgs_x) {
        for (const AxisImage &iy : imgs_y) {
            for (const AxisImage &iz : imgs_z) {
                const int bounces = ix.bounces + iy.bounces + iz.bounces;
                if (bounces > max_order)
                    continue;

                const Vec3 image{ix.coord, iy.coord, iz.coord};
                const double length = distance(image, rx);
                if (length < 1e-12)
                    continue;

                // Fold the straight rx -> image segment back into the room
                // and test every piece against the obstacle boxes.
                crossings.clear();
                collect_wall_crossings(rx.x, image.x, room.x, crossings);
                collect_wall_crossings(rx.y, image.y, room.y, crossings);
                collect_wall_crossings(rx.z, image.z, room.z, crossings);
                crossings.push_back(0.0);
                crossings.push_back(1.0);
                std::sort(crossings.begin(), crossings.end());

                bool blocked = false;
                for (std::size_t s = 0; s + 1 < crossings.size(); ++s) {
                    const Vec3 pa = fold_point(rx + (image - rx) * crossings[s], room);
                    const Vec3 pb = fold_point(rx + (image - rx) * crossings[s + 1], room);
                    if (segment_occluded(scene, pa, pb)) {
                        blocked = true;
                        break;
                    }
                }
                if (blocked)
                    continue;

                PathComponent path;
                path.path_length = length;
                path.bounce_count = bounces;
                path.arrival_dir = (image - rx) / length;
                path.delta_amplitude =
                    lambda / (4.0 * kPi * length) * std::pow(reflection_coeff, bounces);
                path.delta_phase = std::fmod(two_pi * length / lambda, two_pi);
                paths.push_back(path);
            }
        }
    }
    return paths;
}

SpatialSpectrum render_spectrum(const std::vector<PathComponent> &paths,
                                const DirectionGrid &dirs, double tx_amplitude,
                                double beamwidth_deg) {
    if (beamwidth_deg <= 0.0)
        throw std::invalid_argument("beamwidth must be positive");

    SpatialSpectrum spectrum;
    spectrum.n_theta = dirs.n_theta;
    spectrum.n_phi = dirs.n_phi;
    spectrum.values.assign(static_cast<std::size_t>(dirs.size()), 0.0);

    // A half-angle of 180 degrees or more already covers the sphere.
    const double cos_half = std::cos(deg_to_rad(std::min(beamwidth_deg / 2.0, 180.0)));
    for (int j = 0; j < dirs.n_phi; ++j) {
        for (int i = 0; i < dirs.n_theta; ++i) {
            const Vec3 d = direction_vector(dirs.theta_deg(i), dirs.phi_deg(j));
            double re = 0.0;
            double im = 0.0;
            for (const PathComponent &p : paths) {
                if (p.arrival_dir.dot(d) < cos_half)
                    continue;
                const double amp = tx_amplitude * p.delta_amplitude;
                re += amp * std::cos(p.delta_phase);
                im += amp * std::sin(p.delta_phase);
            }
            spectrum.at(i, j) = re * re + im * im;
        }
    }
    return spectrum;
}

std::vector<double> path_loss_db(const SpatialSpectrum &spectrum, double floor_db) {
    std::vector<double> loss(spectrum.values.size());
    for (std::size_t i = 0; i < spectrum.values.size(); ++i) {
        const double power = spectrum.values[i];
        loss[i] = power > 0.0 ? -10.0 * std::log10(power) : floor_db;
    }
    return loss;
}

void save_scene_spectra(const SceneSpectra &rec, const std::string &path) {
    std::ofstream os = open_output_binary(path);
    BinaryWriter w(os);
    w.str(rec.scene_id);
    w.u32(static_cast<std::uint32_t>(rec.rx_positions.size()));
    w.u32(static_cast<std::uint32_t>(rec.n_theta));
    w.u32(static_cast<std::uint32_t>(rec.n_phi));
    w.f64(rec.frequency_hz);
    for (std::size_t r = 0; r < rec.rx_positions.size(); ++r) {
        const Vec3 &pos = rec.rx_positions[r];
        w.f32(static_cast<float>(pos.x));
        w.f32(static_cast<float>(pos.y));
        w.f32(static_cast<float>(pos.z));
        for (const double v : rec.loss_db[r])
            w.f32(static_cast<float>(v));
    }
}

SceneSpectra load_scene_spectra(const std::string &path) {
    std::ifstream is = open_input_binary(path);
    BinaryReader r(is);
    SceneSpectra rec;
    rec.scene_id = r.str();
    const std::uint32_t n_rx = r.u32();
    rec.n_theta = static_cast<int>(r.u32());
    rec.n_phi = static_cast<int>(r.u32());
    rec.frequency_hz = r.f64();
    const std::size_t n_values = static_cast<std::size_t>(rec.n_theta) * rec.n_phi;
    for (std::uint32_t i = 0; i < n_rx; ++i) {
        Vec3 pos;
        pos.x = r.f32();
        pos.y = r.f32();
        pos.z = r.f32();
        rec.rx_positions.push_back(pos);
        std::vector<double> loss(n_values);
        for (double &v : loss)
            v = r.f32();
        rec.loss_db.push_back(std::move(loss));
    }
    return rec;
}

} // namespace radtwin
