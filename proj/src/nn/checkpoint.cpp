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

#include "radtwin/nn/checkpoint.hpp"

#include <stdexcept>

#include "radtwin/binary_io.hpp"

namespace radtwin::nn {

namespace {
constexpr char kMagic[8] = {'R', 'T', 'W', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
} // namespace

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

void save_checkpoint(const std::string &path, const std::string &config_json,
                     const ParamStore &params) {
    std::ofstream os = open_output_binary(path);
    BinaryWriter w(os);
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u64(fnv1a64(config_json));
    w.str(config_json);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto &[name, t] : params.items()) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t->shape.size()));
        for (const int d : t->shape)
            w.u32(static_cast<std::uint32_t>(d));
        for (const double x : t->data)
            w.f64(x);
    }
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream is = open_input_binary(path);
    BinaryReader r(is);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (r.u32() != kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    const std::uint64_t stored_hash = r.u64();
    Checkpoint ckpt;
    ckpt.config_json = r.str();
    if (fnv1a64(ckpt.config_json) != stored_hash)
        throw std::runtime_error("checkpoint config hash mismatch in " + path);

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        const std::uint32_t ndim = r.u32();
        std::vector<int> shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<int>(r.u32());
        TensorPtr t = make_tensor(shape, false);
        for (double &x : t->data)
            x = r.f64();
        ckpt.params.emplace_back(name, t);
    }
    return ckpt;
}

void load_into_store(const Checkpoint &ckpt, ParamStore &params) {
    for (const auto &[name, src] : ckpt.params) {
        TensorPtr dst = params.find(name);
        if (!dst)
            throw std::runtime_error("checkpoint parameter not in model: " + name);
        if (dst->shape != src->shape)
            throw std::runtime_error("checkpoint shape mismatch for: " + name);
        dst->data = src->data;
    }
    if (ckpt.params.size() != params.size())
        throw std::runtime_error("checkpoint parameter count mismatch");
}

} // namespace radtwin::nn
