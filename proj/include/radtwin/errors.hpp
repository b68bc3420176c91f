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

#include <stdexcept>
#include <string>

namespace radtwin {

/// A required input file (dataset, checkpoint, scene) is absent or unreadable.
struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Numeric failure during computation (non-finite loss, degenerate input).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace radtwin
