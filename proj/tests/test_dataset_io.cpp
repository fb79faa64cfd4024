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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "wch/channel.hpp"
#include "wch/dataset_io.hpp"

using namespace wch::synth;

namespace {

std::string temp_path(const std::string &name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ChannelDataset small_dataset() {
    ScenarioConfig c;
    c.n_antennas = 6;
    c.n_subcarriers = 10;
    c.rician_k_db = -std::numeric_limits<double>::infinity();
    c.elevation_deg = 12.5;
    c.seed = 4242;
    return synthesize_dataset(c, 9, "unit-test-scenario");
}

wch::ErrorCode load_failure_code(const std::string &path) {
    try {
        (void)load_dataset(path);
    } catch (const wch::Error &e) {
        return e.code();
    }
    FAIL("load_dataset unexpectedly succeeded");
    return wch::ErrorCode::invalid_state;
}

} // namespace

TEST_CASE("save then load is a bit-exact identity") {
    const auto ds = small_dataset();
    const std::string path = temp_path("wch_roundtrip.bin");
    save_dataset(ds, path);
    const auto back = load_dataset(path);

    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        REQUIRE(back.samples[i].same_shape(ds.samples[i]));
        REQUIRE(back.samples[i].h == ds.samples[i].h); // f32 bit-exact
    }
    CHECK(back.scenario_id == ds.scenario_id);
    CHECK(back.config.n_antennas == ds.config.n_antennas);
    CHECK(back.config.n_subcarriers == ds.config.n_subcarriers);
    CHECK(back.config.n_clusters == ds.config.n_clusters);
    CHECK(back.config.rays_per_cluster == ds.config.rays_per_cluster);
    // -inf must survive the trip exactly
    CHECK(std::isinf(back.config.rician_k_db));
    CHECK(back.config.rician_k_db < 0.0);
    CHECK(back.config.delay_spread == ds.config.delay_spread);
    CHECK(back.config.bandwidth == ds.config.bandwidth);
    CHECK(back.config.carrier_freq == ds.config.carrier_freq);
    CHECK(back.config.angle_spread_deg == ds.config.angle_spread_deg);
    CHECK(back.config.elevation_deg == ds.config.elevation_deg);
    CHECK(back.config.seed == ds.config.seed);

    // saving twice produces byte-identical files
    const std::string path2 = temp_path("wch_roundtrip2.bin");
    save_dataset(ds, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("corrupted containers fail with distinct error codes") {
    const auto ds = small_dataset();
    const std::string path = temp_path("wch_corrupt.bin");
    save_dataset(ds, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();

    SECTION("bad magic") {
        std::string copy = bytes;
        copy[0] = 'X';
        std::ofstream(path, std::ios::binary).write(copy.data(), std::streamsize(copy.size()));
        CHECK(load_failure_code(path) == wch::ErrorCode::bad_magic);
    }
    SECTION("unsupported version") {
        std::string copy = bytes;
        copy[4] = 2; // little-endian u16 version
        std::ofstream(path, std::ios::binary).write(copy.data(), std::streamsize(copy.size()));
        CHECK(load_failure_code(path) == wch::ErrorCode::version_mismatch);
    }
    SECTION("truncated header") {
        // shorter than the magic itself: unreadable, not misidentified
        std::ofstream(path, std::ios::binary).write(bytes.data(), 3);
        CHECK(load_failure_code(path) == wch::ErrorCode::truncated_file);
    }
    SECTION("truncated body") {
        std::ofstream(path, std::ios::binary)
            .write(bytes.data(), std::streamsize(bytes.size() - 5));
        CHECK(load_failure_code(path) == wch::ErrorCode::truncated_file);
    }
    SECTION("missing file") {
        CHECK(load_failure_code(temp_path("wch_does_not_exist.bin")) ==
              wch::ErrorCode::io_failure);
    }
    std::remove(path.c_str());
}

TEST_CASE("shapes beyond the u16 header range are rejected at save time") {
    ChannelDataset ds;
    ds.config = ScenarioConfig{};
    ds.scenario_id = "too-wide";
    ds.samples.emplace_back(70000, 1);
    const std::string path = temp_path("wch_overflow.bin");
    try {
        save_dataset(ds, path);
        FAIL("save accepted an oversized shape");
    } catch (const wch::Error &e) {
        CHECK(e.code() == wch::ErrorCode::shape_overflow);
    }
}

TEST_CASE("inconsistent and empty datasets are rejected") {
    ChannelDataset empty;
    try {
        save_dataset(empty, temp_path("wch_empty.bin"));
        FAIL("save accepted an empty dataset");
    } catch (const wch::Error &e) {
        CHECK(e.code() == wch::ErrorCode::invalid_argument);
    }

    ChannelDataset ragged;
    ragged.samples.emplace_back(4, 4);
    ragged.samples.emplace_back(4, 5);
    try {
        save_dataset(ragged, temp_path("wch_ragged.bin"));
        FAIL("save accepted ragged samples");
    } catch (const wch::Error &e) {
        CHECK(e.code() == wch::ErrorCode::invalid_shape);
    }
}
