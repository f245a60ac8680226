// Copyright 2026 The qbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qbench/timetag.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "qbench/rng.hpp"
#include "qbench/simulator.hpp"

using namespace qbench;

namespace {

StreamGeometry small_geometry(int bins = 8) {
    StreamGeometry geometry;
    geometry.trial_period_ps = 1.0e6;
    geometry.tau_ps = 1.0e5;
    geometry.bins_per_arm = bins;
    geometry.arm_of_channel = {0, 0, 1, 1};
    return geometry;
}

// One populated bin with Gaussian arrivals, plus optional uniform background.
std::vector<TimeTagRecord> gaussian_bin_stream(int bin, double sigma_ps, std::uint64_t events,
                                               const StreamGeometry& geometry,
                                               double background_per_trial, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TimeTagRecord> records;
    const auto channel = static_cast<std::uint8_t>(bin & 1);
    for (std::uint64_t trial = 0; trial < events; trial++) {
        const double center = trial * geometry.trial_period_ps + bin * geometry.tau_ps;
        records.push_back(
            {channel, static_cast<std::int64_t>(std::llround(center + rng.gaussian(0, sigma_ps)))});
        if (background_per_trial > 0.0 && rng.bernoulli(background_per_trial)) {
            const double offset = (rng.next_double() - 0.5) * geometry.tau_ps;
            records.push_back({channel, static_cast<std::int64_t>(std::llround(center + offset))});
        }
    }
    return records;
}

}  // namespace

TEST_SUITE_BEGIN("timetag");

TEST_CASE("csv golden fixture parses field-exact") {
    std::istringstream in(
        "channel,timestamp_ps\n"
        "0,1000000\n"
        "3,1000150\n"
        "1,21000000\n");
    const auto records = parse_csv_stream(in);
    REQUIRE(records.size() == 3);
    CHECK(records[0].channel == 0);
    CHECK(records[0].timestamp_ps == 1000000);
    CHECK(records[1].channel == 3);
    CHECK(records[1].timestamp_ps == 1000150);
    CHECK(records[2].channel == 1);
    CHECK(records[2].timestamp_ps == 21000000);
}

TEST_CASE("empty csv input yields an empty stream") {
    std::istringstream in("");
    CHECK(parse_csv_stream(in).empty());
}

TEST_CASE("csv parse errors name the line") {
    std::istringstream missing_comma("channel,timestamp_ps\n0 1000\n");
    try {
        parse_csv_stream(missing_comma);
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::istringstream bad_header("chan,ts\n");
    CHECK_THROWS_AS(parse_csv_stream(bad_header), std::runtime_error);

    std::istringstream bad_channel("channel,timestamp_ps\n999,1000\n");
    CHECK_THROWS_AS(parse_csv_stream(bad_channel), std::runtime_error);
}

TEST_CASE("binary format round trips and reports truncation offsets") {
    std::ostringstream out;
    {
        BinaryTagWriter writer(out);
        writer.write({2, 123456789});
        writer.write({0, 1});
        writer.write({255, 9876543210123LL});
    }
    std::istringstream in(out.str());
    const auto records = parse_binary_stream(in);
    REQUIRE(records.size() == 3);
    CHECK(records[0].channel == 2);
    CHECK(records[0].timestamp_ps == 123456789);
    CHECK(records[2].channel == 255);
    CHECK(records[2].timestamp_ps == 9876543210123LL);

    std::istringstream truncated(out.str().substr(0, out.str().size() - 4));
    try {
        parse_binary_stream(truncated);
        FAIL("expected a truncation error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }

    std::istringstream bad_magic("XXXX!rest");
    CHECK_THROWS_AS(parse_binary_stream(bad_magic), std::runtime_error);
}

TEST_CASE("window specs parse and label") {
    const auto fixed = WindowSpec::parse("static:1000");
    CHECK(fixed.mode == WindowSpec::Mode::Static);
    CHECK(fixed.param == 1000.0);
    const auto adaptive = WindowSpec::parse("dynamic:2.5");
    CHECK(adaptive.mode == WindowSpec::Mode::Dynamic);
    CHECK(adaptive.label() == "dynamic:2.5");
    CHECK_THROWS_AS(WindowSpec::parse("adaptive:1"), std::invalid_argument);
    CHECK_THROWS_AS(WindowSpec::parse("static:-5"), std::invalid_argument);
}

TEST_CASE("gaussian fits recover the pulse widths") {
    const auto geometry = small_geometry();
    for (double sigma : {70.0, 700.0}) {
        const auto records = gaussian_bin_stream(2, sigma, 100000, geometry, 0.0, 11);
        const auto fits = fit_bins(records, geometry);
        const auto& fit = fits[2];
        CHECK_FALSE(fit.flagged);
        CHECK(fit.events == 100000);
        CHECK(fit.sigma_ps >= 0.9 * sigma);
        CHECK(fit.sigma_ps <= 1.1 * sigma);
        CHECK(std::abs(fit.mean_ps - 2.0 * geometry.tau_ps) <= 0.1 * sigma);
    }
}

TEST_CASE("fits stay accurate under a uniform background floor") {
    const auto geometry = small_geometry();
    const auto records = gaussian_bin_stream(3, 300.0, 50000, geometry, 0.5, 13);
    const auto fits = fit_bins(records, geometry);
    const auto& fit = fits[3];
    CHECK_FALSE(fit.flagged);
    CHECK(fit.sigma_ps == doctest::Approx(300.0).epsilon(0.10));
    CHECK(fit.background_floor > 0.0);
}

TEST_CASE("fit consistency over many seeds") {
    const auto geometry = small_geometry();
    int failures = 0;
    const int seeds = 40;
    for (int seed = 0; seed < seeds; seed++) {
        const auto records = gaussian_bin_stream(1, 150.0, 10000, geometry, 0.0, 100 + seed);
        const auto fits = fit_bins(records, geometry);
        const auto& fit = fits[1];
        const bool mean_ok = std::abs(fit.mean_ps - geometry.tau_ps) <= 0.1 * 150.0;
        const bool sigma_ok = fit.sigma_ps >= 0.9 * 150.0 && fit.sigma_ps <= 1.1 * 150.0;
        failures += (mean_ok && sigma_ok && !fit.flagged) ? 0 : 1;
    }
    CHECK(failures <= 2);  // >= 95% of seeds
}

TEST_CASE("degenerate and underpopulated bins are flagged") {
    const auto geometry = small_geometry();
    // Delta spike: all events exactly on the center.
    std::vector<TimeTagRecord> spike;
    for (int trial = 0; trial < 200; trial++) {
        spike.push_back({0, static_cast<std::int64_t>(trial * 1000000 + 200000)});
    }
    auto fits = fit_bins(spike, geometry);
    CHECK(fits[2].flagged);

    // Too few events.
    std::vector<TimeTagRecord> sparse(spike.begin(), spike.begin() + 10);
    fits = fit_bins(sparse, geometry);
    CHECK(fits[2].flagged);
    CHECK(fits[2].events == 10);
}

TEST_CASE("window plans follow the requested widths") {
    const auto geometry = small_geometry();
    std::vector<GaussianFit> fits(16);
    for (std::size_t g = 0; g < fits.size(); g++) {
        fits[g].events = 1000;
        fits[g].mean_ps = static_cast<double>(g % 8) * geometry.tau_ps;
        fits[g].sigma_ps = 200.0;
        fits[g].flagged = false;
    }

    const auto fixed = plan_windows(fits, WindowSpec::parse("static:1000"), geometry);
    for (const auto& window : fixed.windows) {
        CHECK(window.half_width_ps == doctest::Approx(500.0));
    }

    const auto adaptive = plan_windows(fits, WindowSpec::parse("dynamic:1.0"), geometry);
    for (const auto& window : adaptive.windows) {
        CHECK(window.half_width_ps == doctest::Approx(100.0));
    }

    // Monotone schedule: 3 sigma on sigma(bin) from 70 to 700 ps.
    for (std::size_t g = 0; g < fits.size(); g++) {
        const int bin = static_cast<int>(g % 8);
        fits[g].sigma_ps = 70.0 + (700.0 - 70.0) * bin / 7.0;
    }
    const auto schedule = plan_windows(fits, WindowSpec::parse("dynamic:3.0"), geometry);
    CHECK(schedule.windows[0].half_width_ps == doctest::Approx(0.5 * 3.0 * 70.0));
    CHECK(schedule.windows[7].half_width_ps == doctest::Approx(0.5 * 3.0 * 700.0));
    for (int b = 0; b + 1 < 8; b++) {
        CHECK(schedule.windows[b].half_width_ps < schedule.windows[b + 1].half_width_ps);
    }
}

TEST_CASE("overlapping windows are rejected") {
    const auto geometry = small_geometry();
    std::vector<GaussianFit> fits(16);
    for (std::size_t g = 0; g < fits.size(); g++) {
        fits[g].events = 1000;
        fits[g].mean_ps = static_cast<double>(g % 8) * geometry.tau_ps;
        fits[g].sigma_ps = 200.0;
    }
    CHECK_THROWS_AS(plan_windows(fits, WindowSpec::parse("static:250000"), geometry),
                    std::invalid_argument);
}

TEST_CASE("dynamic planning requires at least one populated fit") {
    const auto geometry = small_geometry();
    std::vector<GaussianFit> fits(16);  // all underpopulated
    CHECK_THROWS_AS(plan_windows(fits, WindowSpec::parse("dynamic:2.0"), geometry),
                    std::invalid_argument);
    // Static planning works from nominal centers.
    const auto plan = plan_windows(fits, WindowSpec::parse("static:1000"), geometry);
    CHECK(plan.windows.size() == 16);
}

TEST_CASE("accumulation dedupes clicks and accounts for every event") {
    const auto geometry = small_geometry();
    std::vector<GaussianFit> fits(16);
    for (std::size_t g = 0; g < fits.size(); g++) {
        fits[g].events = 1000;
        fits[g].mean_ps = static_cast<double>(g % 8) * geometry.tau_ps;
        fits[g].sigma_ps = 100.0;
    }
    const auto plan = plan_windows(fits, WindowSpec::parse("static:1000"), geometry);

    std::vector<TimeTagRecord> records;
    // Trial 0: two events in the same window -> one click.
    records.push_back({0, 200000});
    records.push_back({0, 200100});
    // Trial 0: one event on the idler arm, inside its window.
    records.push_back({2, 300050});
    // Trial 1: event far outside any window -> discarded.
    records.push_back({0, 1000000 + 250000 + 40000});
    // Bad channel -> discarded.
    records.push_back({9, 200000});

    const auto result = accumulate(records, plan, geometry, 2);
    CHECK(result.total_events == 5);
    CHECK(result.window_events == 3);
    CHECK(result.discarded_events == 2);
    CHECK(result.window_events + result.discarded_events == result.total_events);
    CHECK(result.joint.trials == 2);
    CHECK(result.joint.at(1, 1) == 1);  // trial 0
    CHECK(result.joint.at(0, 0) == 1);  // trial 1 (its only event was discarded)
    CHECK(result.singles.counts[2] == 1);
    CHECK(result.singles.counts[8 + 3] == 1);
}

TEST_CASE("enlarging windows never loses singles") {
    const auto geometry = small_geometry();
    ExperimentConfig config;
    config.network_bins = 8;
    config.bin_separation_ns = 100.0;
    config.trial_period_ns = 1000.0;
    config.mean_pairs = 1.0;
    config.background_click_prob = 2e-3;
    config.trials = 5000;
    config.rng_seed = 77;
    config.pulse_width_min_ps = 70.0;
    config.pulse_width_max_ps = 700.0;

    class VectorWriter : public TagWriter {
      public:
        void write(const TimeTagRecord& record) override { records.push_back(record); }
        std::vector<TimeTagRecord> records;
    };
    VectorWriter tags;
    synthesize_timetags(config, tags);

    const auto fits = fit_bins(tags.records, geometry);
    const auto narrow = accumulate(
        tags.records, plan_windows(fits, WindowSpec::parse("dynamic:1.0"), geometry), geometry,
        config.trials);
    const auto wide = accumulate(
        tags.records, plan_windows(fits, WindowSpec::parse("dynamic:4.0"), geometry), geometry,
        config.trials);
    for (std::size_t g = 0; g < narrow.singles.counts.size(); g++) {
        CHECK(wide.singles.counts[g] >= narrow.singles.counts[g]);
    }
    CHECK(wide.window_events >= narrow.window_events);
}

TEST_CASE("jitter-free synthesis reproduces the simulator histograms exactly") {
    ExperimentConfig config;
    config.network_bins = 16;
    config.bin_separation_ns = 100.0;
    config.trial_period_ns = 1600.0;
    config.mean_pairs = 0.8;
    config.schmidt_modes = 3.0;
    config.background_click_prob = 1e-3;
    config.bin_efficiency_variation = 0.05;
    config.timing_jitter = false;
    config.trials = 20000;
    config.rng_seed = 4242;

    const auto truth = simulate_trials(config);

    class VectorWriter : public TagWriter {
      public:
        void write(const TimeTagRecord& record) override { records.push_back(record); }
        std::vector<TimeTagRecord> records;
    };
    VectorWriter tags;
    synthesize_timetags(config, tags);

    StreamGeometry geometry = config.stream_geometry();
    geometry.offset_ps = estimate_stream_offset(tags.records, geometry);
    const auto fits = fit_bins(tags.records, geometry);

    for (const char* spec : {"static:1000", "dynamic:2.0"}) {
        const auto plan = plan_windows(fits, WindowSpec::parse(spec), geometry);
        const auto result = accumulate(tags.records, plan, geometry, config.trials);
        CHECK(result.joint.counts == truth.joint.counts);
        CHECK(result.singles.counts == truth.singles.counts);
        CHECK(result.discarded_events == 0);
    }
}

TEST_CASE("a global stream offset is estimated and absorbed") {
    const auto geometry = small_geometry();
    auto records = gaussian_bin_stream(2, 120.0, 20000, geometry, 0.0, 55);
    for (auto& record : records) {
        record.timestamp_ps += 37;  // constant misalignment
    }
    StreamGeometry shifted = geometry;
    shifted.offset_ps = estimate_stream_offset(records, shifted);
    CHECK(shifted.offset_ps == doctest::Approx(37.0).epsilon(0.1));

    const auto fits = fit_bins(records, shifted);
    CHECK(std::abs(fits[2].mean_ps - 2.0 * geometry.tau_ps) <= 10.0);
}

TEST_CASE("narrow static windows lose coincidences that adaptive windows keep") {
    const auto geometry = small_geometry();
    const double sigma = 700.0;
    const auto records = gaussian_bin_stream(4, sigma, 30000, geometry, 0.0, 21);
    const auto fits = fit_bins(records, geometry);
    const auto narrow = accumulate(
        records, plan_windows(fits, WindowSpec::parse("static:100"), geometry), geometry, 30000);
    const auto adaptive = accumulate(
        records, plan_windows(fits, WindowSpec::parse("dynamic:2.0"), geometry), geometry, 30000);
    CHECK(narrow.window_events < adaptive.window_events);
    // 100 ps on a 700 ps pulse keeps roughly erf(50 / (700 sqrt(2))) ~ 5.7%.
    CHECK(static_cast<double>(narrow.window_events) / 30000.0 < 0.10);
}

TEST_SUITE_END();
