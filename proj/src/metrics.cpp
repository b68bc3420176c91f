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

#include "radtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radtwin {

double nmse_db(const std::vector<double> &pred, const std::vector<double> &truth,
               double floor_db) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("nmse size mismatch");
    if (pred.empty())
        throw std::invalid_argument("nmse on empty vectors");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (den == 0.0)
        throw std::invalid_argument("nmse against an all-zero truth");
    if (num == 0.0)
        return floor_db;
    return std::max(10.0 * std::log10(num / den), floor_db);
}

namespace {

constexpr int kWindow = 11;

const double *gaussian_window() {
    static double w[kWindow];
    static bool ready = false;
    if (!ready) {
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - (kWindow - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += w[i];
        }
        for (int i = 0; i < kWindow; ++i)
            w[i] /= sum;
        ready = true;
    }
    return w;
}

} // namespace

double ssim(const std::vector<double> &img_a, const std::vector<double> &img_b, int height,
            int width, double data_range) {
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (img_a.size() != n || img_b.size() != n)
        throw std::invalid_argument("ssim image size mismatch");
    if (height < kWindow || width < kWindow)
        throw std::invalid_argument("ssim images must be at least 11x11");

    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const double *w = gaussian_window();

    // Valid-mode windowed statistics.
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + kWindow <= height; ++y) {
        for (int x = 0; x + kWindow <= width; ++x) {
            double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int dy = 0; dy < kWindow; ++dy) {
                for (int dx = 0; dx < kWindow; ++dx) {
                    const double wt = w[dy] * w[dx];
                    const double a = img_a[static_cast<std::size_t>(y + dy) * width + (x + dx)];
                    const double b = img_b[static_cast<std::size_t>(y + dy) * width + (x + dx)];
                    mu_a += wt * a;
                    mu_b += wt * b;
                    saa += wt * a * a;
                    sbb += wt * b * b;
                    sab += wt * a * b;
                }
            }
            const double var_a = saa - mu_a * mu_a;
            const double var_b = sbb - mu_b * mu_b;
            const double cov = sab - mu_a * mu_b;
            const double value = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += value;
            ++count;
        }
    }
    return total / count;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty())
        throw std::invalid_argument("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace radtwin
