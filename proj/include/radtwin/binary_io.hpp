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
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "radtwin/errors.hpp"

namespace radtwin {

/// Little-endian binary writer over an ostream.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream &os) : os_(os) {}

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_le(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_le(bits);
    }
    void str(const std::string &s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void raw(const void *p, std::size_t n) { os_.write(static_cast<const char *>(p), static_cast<std::streamsize>(n)); }

private:
    template <typename T> void put_le(T v) {
        unsigned char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        raw(buf, sizeof(T));
    }

    std::ostream &os_;
};

/// Little-endian binary reader; throws MissingArtifactError on truncation.
class BinaryReader {
public:
    explicit BinaryReader(std::istream &is) : is_(is) {}

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
    float f32() {
        const std::uint32_t bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = get_le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    void raw(void *p, std::size_t n) {
        is_.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw MissingArtifactError("binary stream truncated");
    }

private:
    template <typename T> T get_le() {
        unsigned char buf[sizeof(T)];
        raw(buf, sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }

    std::istream &is_;
};

inline std::ofstream open_output_binary(const std::string &path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw MissingArtifactError("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_input_binary(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw MissingArtifactError("cannot open for reading: " + path);
    return is;
}

} // namespace radtwin
