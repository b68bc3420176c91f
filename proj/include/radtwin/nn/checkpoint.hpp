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

#include <cstdint>
#include <string>
#include <string_view>

#include "radtwin/nn/optim.hpp"

namespace radtwin::nn {

std::uint64_t fnv1a64(std::string_view s);

/// Versioned binary checkpoint: magic, format version, hash of the model
/// config JSON, the JSON itself, then the named parameter list with shapes
/// and f64 payloads. Little-endian.
void save_checkpoint(const std::string &path, const std::string &config_json,
                     const ParamStore &params);

struct Checkpoint {
    std::string config_json;
    std::vector<std::pair<std::string, TensorPtr>> params;
};

/// Loads and validates magic, version and config hash. Throws
/// MissingArtifactError for a missing file and std::runtime_error for a
/// corrupt one.
Checkpoint load_checkpoint(const std::string &path);

/// Copies checkpoint values into a live store, matching by name; throws when
/// a name is absent or a shape differs.
void load_into_store(const Checkpoint &ckpt, ParamStore &params);

} // namespace radtwin::nn
