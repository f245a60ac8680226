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

#include "qbench/simulator.hpp"

#include <cmath>
#include <string>

#include "doctest.h"
#include "qbench/analysis.hpp"

using namespace qbench;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig config;
    config.network_bins = 8;
    config.bin_separation_ns = 100.0;
    config.trial_period_ns = 1000.0;
    config.mean_pairs = 0.5;
    config.schmidt_modes = 2.0;
    config.background_click_prob = 0.0;
    config.bin_efficiency_variation = 0.0;
    config.trials = 20000;
    config.rng_seed = 42;
    return config;
}

}  // namespace

TEST_SUITE_BEGIN("simulator");

TEST_CASE("config validation names the offending field") {
    ExperimentConfig config = small_config();
    config.detector_efficiency = 1.2;
    try {
        config.validate();
        FAIL("expected validation to throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("detector_efficiency") != std::string::npos);
    }

    config = small_config();
    config.bin_separation_ns = 50.0;  // below the detector dead time
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = small_config();
    config.trial_period_ns = 500.0;  // bins do not fit
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("config JSON round trip and schema errors") {
    const ExperimentConfig config = small_config();
    const auto parsed = parse_config_json(config_json(config));
    CHECK(parsed.network_bins == config.network_bins);
    CHECK(parsed.mean_pairs == config.mean_pairs);
    CHECK(parsed.rng_seed == config.rng_seed);

    try {
        parse_config_json(R"({"detector_efficiency": 1.2})");
        FAIL("expected schema error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("detector_efficiency") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_json(R"({"unknown_knob": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json("not json"), std::invalid_argument);
}

TEST_CASE("pair-number sampling follows the requested statistics") {
    ExperimentConfig config = small_config();

    SUBCASE("zero mean never emits pairs") {
        config.mean_pairs = 0.0;
        Rng rng(1);
        for (int i = 0; i < 100; i++) {
            CHECK(sample_pair_number(config, rng) == 0);
        }
    }

    SUBCASE("single-mode thermal law") {
        config.mean_pairs = 1.7;
        config.schmidt_modes = 1.0;
        Rng rng(2);
        const int draws = 1000000;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < draws; i++) {
            const double n = sample_pair_number(config, rng);
            sum += n;
            sum_sq += n * n;
        }
        const double mean = sum / draws;
        const double variance = sum_sq / draws - mean * mean;
        CHECK(mean == doctest::Approx(1.7).epsilon(0.01));
        // Thermal Fano factor 1 + mean.
        CHECK(variance / mean == doctest::Approx(2.7).epsilon(0.02));
    }

    SUBCASE("Poisson limit for many modes") {
        config.mean_pairs = 2.0;
        config.schmidt_modes = 1e6;
        Rng rng(3);
        const int draws = 1000000;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < draws; i++) {
            const double n = sample_pair_number(config, rng);
            sum += n;
            sum_sq += n * n;
        }
        const double mean = sum / draws;
        const double variance = sum_sq / draws - mean * mean;
        CHECK(variance / mean == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("no source and no background means no clicks") {
    ExperimentConfig config = small_config();
    config.mean_pairs = 0.0;
    const auto result = simulate_trials(config);
    CHECK(result.joint.at(0, 0) == config.trials);
    CHECK(result.joint.trials == config.trials);
    for (auto count : result.singles.counts) {
        CHECK(count == 0);
    }
}

TEST_CASE("background-only clicks follow the binomial law") {
    ExperimentConfig config = small_config();
    config.mean_pairs = 0.0;
    config.background_click_prob = 0.02;
    config.trials = 100000;
    const auto result = simulate_trials(config);
    const auto marginal = result.joint.marginal(0);
    double mean = 0.0;
    for (int n = 0; n <= marginal.detector_count; n++) {
        mean += static_cast<double>(marginal.counts[n]) * n;
    }
    mean /= static_cast<double>(config.trials);
    const double expected = config.network_bins * config.background_click_prob;
    const double sigma = std::sqrt(expected * (1.0 - config.background_click_prob) /
                                   static_cast<double>(config.trials));
    CHECK(std::abs(mean - expected) <= 3.0 * sigma);
}

TEST_CASE("postselected single pairs concentrate on one click per arm") {
    ExperimentConfig config = small_config();
    config.network_bins = 2;
    config.bin_separation_ns = 100.0;
    config.trial_period_ns = 200.0;
    config.mean_pairs = 0.01;
    config.schmidt_modes = 1e6;
    config.transmission_a = 1.0;
    config.transmission_b = 1.0;
    config.detector_efficiency = 1.0;
    config.trials = 200000;
    const auto result = simulate_trials(config);
    std::uint64_t clicked = 0;
    for (int a = 0; a <= 2; a++) {
        for (int b = 0; b <= 2; b++) {
            if (a + b > 0) {
                clicked += result.joint.at(a, b);
            }
        }
    }
    REQUIRE(clicked > 0);
    const double fraction = static_cast<double>(result.joint.at(1, 1)) /
                            static_cast<double>(clicked);
    CHECK(fraction >= 0.98);
}

TEST_CASE("identical configuration and seed gives bit-identical results") {
    ExperimentConfig config = small_config();
    config.background_click_prob = 1e-3;
    config.bin_efficiency_variation = 0.07;
    const auto first = simulate_trials(config);
    const auto second = simulate_trials(config);
    CHECK(first.joint.counts == second.joint.counts);
    CHECK(first.singles.counts == second.singles.counts);

    config.rng_seed++;
    const auto third = simulate_trials(config);
    CHECK(first.joint.counts != third.joint.counts);
}

TEST_CASE("bin ripple lands the systematic error near the configured variation") {
    ExperimentConfig config;
    config.network_bins = 128;
    config.mean_pairs = 1.2;
    config.bin_efficiency_variation = 0.07;
    config.background_click_prob = 0.0;
    config.trials = 1000000;
    config.rng_seed = 7;
    const auto result = simulate_trials(config);
    const auto estimate = systematic_error(result.singles);
    // Peak-to-peak variation v translates to a 2-sigma relative spread of
    // about v/sqrt(2) plus shot noise.
    CHECK(estimate.pooled >= 0.5 * config.bin_efficiency_variation);
    CHECK(estimate.pooled <= 1.5 * config.bin_efficiency_variation);
}

TEST_CASE("time-tag synthesis is consistent with the trial simulation") {
    ExperimentConfig config = small_config();
    config.timing_jitter = false;
    config.background_click_prob = 5e-3;
    config.trials = 5000;

    class CountingWriter : public TagWriter {
      public:
        void write(const TimeTagRecord& record) override {
            count++;
            last = record;
        }
        std::uint64_t count = 0;
        TimeTagRecord last;
    };

    CountingWriter writer;
    std::uint64_t events = 0;
    const auto result = simulate_and_tag(config, writer, events);
    CHECK(events == writer.count);

    // Event count equals the total singles (one tag per clicked bin).
    std::uint64_t singles_total = 0;
    for (auto count : result.singles.counts) {
        singles_total += count;
    }
    CHECK(events == singles_total);

    ExperimentConfig zero = small_config();
    zero.trials = 0;
    CountingWriter empty_writer;
    CHECK(synthesize_timetags(zero, empty_writer) == 0);
}

TEST_SUITE_END();
