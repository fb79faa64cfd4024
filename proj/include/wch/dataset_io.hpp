// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
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

#ifndef WCH_DATASET_IO_HPP
#define WCH_DATASET_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wch/channel.hpp"
#include "wch/errors.hpp"

namespace wch::synth {

// Dataset container format "WCH1", version 1, little-endian:
//
//   magic          4 bytes  "WCH1"
//   version        u16      1
//   n_samples      u32
//   n_antennas     u16
//   n_subcarriers  u16
//   scenario_id    u8 length + UTF-8 bytes
//   config         numeric fields in declaration order
//                  (integers as u64, reals as f64)
//   samples        [sample][antenna][subcarrier], each entry f32 re, f32 im

inline constexpr char kDatasetMagic[4] = {'W', 'C', 'H', '1'};
inline constexpr std::uint16_t kDatasetVersion = 1;

namespace detail {

class LeWriter {
  public:
    explicit LeWriter(std::ostream &os) : os_(os) {}

    void bytes(const void *p, std::size_t n) {
        os_.write(static_cast<const char *>(p), std::streamsize(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { put_uint(v, 2); }
    void u32(std::uint32_t v) { put_uint(v, 4); }
    void u64(std::uint64_t v) { put_uint(v, 8); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

  private:
    void put_uint(std::uint64_t v, int n) {
        unsigned char buf[8];
        for (int i = 0; i < n; ++i)
            buf[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
        bytes(buf, std::size_t(n));
    }
    std::ostream &os_;
};

class LeReader {
  public:
    explicit LeReader(std::istream &is) : is_(is) {}

    void bytes(void *p, std::size_t n) {
        is_.read(static_cast<char *>(p), std::streamsize(n));
        if (!is_)
            throw_error(ErrorCode::truncated_file, "unexpected end of file");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() { return std::uint16_t(get_uint(2)); }
    std::uint32_t u32() { return std::uint32_t(get_uint(4)); }
    std::uint64_t u64() { return get_uint(8); }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

  private:
    std::uint64_t get_uint(int n) {
        unsigned char buf[8];
        bytes(buf, std::size_t(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= std::uint64_t(buf[i]) << (8 * i);
        return v;
    }
    std::istream &is_;
};

inline void write_config(LeWriter &w, const ScenarioConfig &c) {
    w.u64(c.n_antennas);
    w.u64(c.n_subcarriers);
    w.u64(c.n_clusters);
    w.u64(c.rays_per_cluster);
    w.f64(c.rician_k_db);
    w.f64(c.delay_spread);
    w.f64(c.bandwidth);
    w.f64(c.carrier_freq);
    w.f64(c.angle_spread_deg);
    w.f64(c.elevation_deg);
    w.u64(c.seed);
}

inline ScenarioConfig read_config(LeReader &r) {
    ScenarioConfig c;
    c.n_antennas = std::uint32_t(r.u64());
    c.n_subcarriers = std::uint32_t(r.u64());
    c.n_clusters = std::uint32_t(r.u64());
    c.rays_per_cluster = std::uint32_t(r.u64());
    c.rician_k_db = r.f64();
    c.delay_spread = r.f64();
    c.bandwidth = r.f64();
    c.carrier_freq = r.f64();
    c.angle_spread_deg = r.f64();
    c.elevation_deg = r.f64();
    c.seed = r.u64();
    return c;
}

} // namespace detail

inline void save_dataset(const ChannelDataset &ds, const std::string &path) {
    require(!ds.samples.empty(), ErrorCode::invalid_argument, "dataset is empty");
    const std::uint32_t rows = ds.samples.front().n_antennas;
    const std::uint32_t cols = ds.samples.front().n_subcarriers;
    require(rows >= 1 && cols >= 1, ErrorCode::invalid_argument, "empty sample shape");
    require(rows <= 0xFFFF && cols <= 0xFFFF, ErrorCode::shape_overflow,
            "sample shape exceeds u16 range");
    require(ds.scenario_id.size() <= 0xFF, ErrorCode::invalid_argument,
            "scenario_id longer than 255 bytes");
    for (const auto &s : ds.samples)
        require(s.n_antennas == rows && s.n_subcarriers == cols, ErrorCode::invalid_shape,
                "samples disagree on shape");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(bool(os), ErrorCode::io_failure, "cannot open for writing: " + path);
    detail::LeWriter w(os);
    w.bytes(kDatasetMagic, 4);
    w.u16(kDatasetVersion);
    w.u32(std::uint32_t(ds.samples.size()));
    w.u16(std::uint16_t(rows));
    w.u16(std::uint16_t(cols));
    w.u8(std::uint8_t(ds.scenario_id.size()));
    w.bytes(ds.scenario_id.data(), ds.scenario_id.size());
    detail::write_config(w, ds.config);
    for (const auto &s : ds.samples)
        for (const auto &z : s.h) {
            w.f32(z.real());
            w.f32(z.imag());
        }
    os.flush();
    require(bool(os), ErrorCode::io_failure, "write failed: " + path);
}

inline ChannelDataset load_dataset(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::io_failure, "cannot open for reading: " + path);
    detail::LeReader r(is);

    char magic[4];
    r.bytes(magic, 4);
    require(std::memcmp(magic, kDatasetMagic, 4) == 0, ErrorCode::bad_magic,
            "not a WCH1 dataset: " + path);
    const std::uint16_t version = r.u16();
    require(version == kDatasetVersion, ErrorCode::version_mismatch,
            "unsupported dataset version " + std::to_string(version));

    const std::uint32_t n_samples = r.u32();
    const std::uint32_t rows = r.u16();
    const std::uint32_t cols = r.u16();
    require(n_samples >= 1, ErrorCode::invalid_argument, "dataset holds no samples");
    require(rows >= 1 && cols >= 1, ErrorCode::shape_overflow, "invalid sample shape");

    ChannelDataset ds;
    const std::uint8_t id_len = r.u8();
    ds.scenario_id.resize(id_len);
    if (id_len > 0)
        r.bytes(ds.scenario_id.data(), id_len);
    ds.config = detail::read_config(r);

    ds.samples.reserve(n_samples);
    for (std::uint32_t i = 0; i < n_samples; ++i) {
        ChannelMatrix m(rows, cols);
        for (auto &z : m.h) {
            const float re = r.f32();
            const float im = r.f32();
            z = std::complex<float>(re, im);
        }
        ds.samples.push_back(std::move(m));
    }
    return ds;
}

} // namespace wch::synth

#endif
