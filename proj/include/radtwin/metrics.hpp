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

#include <vector>

namespace radtwin {

/// Normalized mean squared error in dB: 10*log10(sum((p-t)^2) / sum(t^2)).
/// A perfect match reports floor_db instead of -inf. Throws on an all-zero
/// truth vector.
double nmse_db(const std::vector<double> &pred, const std::vector<double> &truth,
               double floor_db = -100.0);

/// Single-scale SSIM with the reference 11-tap Gaussian window (sigma 1.5),
/// k1 = 0.01, k2 = 0.03, over images in [0, data_range]. Images are
/// row-major height x width and must be at least 11 in each dimension.
double ssim(const std::vector<double> &img_a, const std::vector<double> &img_b, int height,
            int width, double data_range = 1.0);

/// Linear-interpolated percentile (p in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double p);

} // namespace radtwin
