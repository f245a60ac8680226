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

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qbench {

namespace {

constexpr std::uint64_t kBatchSize = 65536;
constexpr std::uint64_t kJitterStreamBase = 1ULL << 32;
constexpr double kPi = 3.14159265358979323846;

// Clicked-bin set for one trial arm, deduplicated with epoch stamps.
struct ArmScratch {
    std::vector<std::uint32_t> stamp;
    std::vector<std::uint8_t> optical;
    std::vector<int> bins;
    std::uint32_t epoch = 0;

    void configure(int bin_count) {
        stamp.assign(bin_count, 0);
        optical.assign(bin_count, 0);
        epoch = 0;
    }

    void begin_trial() {
        epoch++;
        bins.clear();
    }

    void click(int bin, bool from_photon) {
        if (stamp[bin] != epoch) {
            stamp[bin] = epoch;
            optical[bin] = from_photon ? 1 : 0;
            bins.push_back(bin);
        } else if (from_photon) {
            optical[bin] = 1;
        }
    }
};

// Floyd's algorithm: k distinct background bins out of bin_count.
void sample_background_bins(Rng& rng, int bin_count, std::uint32_t k, std::vector<int>& out) {
    out.clear();
    for (int j = bin_count - static_cast<int>(k); j < bin_count; j++) {
        const int r = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(j) + 1));
        if (std::find(out.begin(), out.end(), r) != out.end()) {
            out.push_back(j);
        } else {
            out.push_back(r);
        }
    }
}

template <typename PerTrial>
void run_trials(const ExperimentConfig& config, PerTrial&& per_trial) {
    config.validate();
    const int bins = config.network_bins;

    std::vector<double> survival_a(bins);
    std::vector<double> survival_b(bins);
    for (int b = 0; b < bins; b++) {
        survival_a[b] = config.bin_survival(0, b);
        survival_b[b] = config.bin_survival(1, b);
    }

    ArmScratch arm_a;
    ArmScratch arm_b;
    arm_a.configure(bins);
    arm_b.configure(bins);
    std::vector<int> background_bins;

    const std::uint64_t batches = (config.trials + kBatchSize - 1) / kBatchSize;
    for (std::uint64_t batch = 0; batch < batches; batch++) {
        Rng rng(config.rng_seed, batch);
        Rng jitter_rng(config.rng_seed, kJitterStreamBase + batch);
        const std::uint64_t begin = batch * kBatchSize;
        const std::uint64_t end = std::min(config.trials, begin + kBatchSize);
        for (std::uint64_t trial = begin; trial < end; trial++) {
            arm_a.begin_trial();
            arm_b.begin_trial();

            const std::uint32_t pairs = sample_pair_number(config, rng);
            for (std::uint32_t p = 0; p < pairs; p++) {
                const int bin_a = static_cast<int>(rng.next_below(bins));
                if (rng.next_double() < survival_a[bin_a]) {
                    arm_a.click(bin_a, true);
                }
                const int bin_b = static_cast<int>(rng.next_below(bins));
                if (rng.next_double() < survival_b[bin_b]) {
                    arm_b.click(bin_b, true);
                }
            }
            if (config.background_click_prob > 0.0) {
                for (ArmScratch* arm : {&arm_a, &arm_b}) {
                    const std::uint32_t k =
                        rng.binomial(static_cast<std::uint32_t>(bins), config.background_click_prob);
                    if (k > 0) {
                        sample_background_bins(rng, bins, k, background_bins);
                        for (int bin : background_bins) {
                            arm->click(bin, false);
                        }
                    }
                }
            }

            std::sort(arm_a.bins.begin(), arm_a.bins.end());
            std::sort(arm_b.bins.begin(), arm_b.bins.end());
            per_trial(trial, arm_a, arm_b, jitter_rng);
        }
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& message) { throw std::invalid_argument(message); };
    if (config_version != 1) {
        fail("config_version: unsupported version (expected 1)");
    }
    if (network_bins < 2) {
        fail("network_bins: must be at least 2");
    }
    if (bin_separation_ns < 60.0) {
        fail("bin_separation_ns: below the 60 ns detector dead time");
    }
    if (trial_period_ns + 1e-9 < network_bins * bin_separation_ns) {
        fail("trial_period_ns: shorter than network_bins * bin_separation_ns");
    }
    if (mean_pairs < 0.0 || !std::isfinite(mean_pairs)) {
        fail("mean_pairs: must be finite and nonnegative");
    }
    if (schmidt_modes <= 0.0) {
        fail("schmidt_modes: must be positive");
    }
    if (transmission_a < 0.0 || transmission_a > 1.0) {
        fail("transmission_a: must be in [0, 1]");
    }
    if (transmission_b < 0.0 || transmission_b > 1.0) {
        fail("transmission_b: must be in [0, 1]");
    }
    if (detector_efficiency < 0.0 || detector_efficiency > 1.0) {
        fail("detector_efficiency: must be in [0, 1]");
    }
    if (background_click_prob < 0.0 || background_click_prob >= 1.0) {
        fail("background_click_prob: must be in [0, 1)");
    }
    if (bin_efficiency_variation < 0.0 || bin_efficiency_variation >= 1.0) {
        fail("bin_efficiency_variation: must be in [0, 1)");
    }
    const double peak = std::max(transmission_a, transmission_b) * detector_efficiency *
                        (1.0 + 0.5 * bin_efficiency_variation);
    if (peak > 1.0) {
        fail("bin_efficiency_variation: peak bin efficiency exceeds 1");
    }
    if (pulse_width_min_ps < 0.0 || pulse_width_max_ps < 0.0) {
        fail("pulse_width_min_ps: widths must be nonnegative");
    }
    if (pulse_width_min_ps > pulse_width_max_ps) {
        fail("pulse_width_min_ps: must not exceed pulse_width_max_ps");
    }
}

double ExperimentConfig::bin_survival(int arm, int bin) const {
    const double transmission = arm == 0 ? transmission_a : transmission_b;
    // Peak-to-peak relative spread bin_efficiency_variation, phase-shifted
    // between the arms so their profiles are not identical.
    const double phase = 2.0 * kPi * bin / network_bins + (arm == 0 ? 0.0 : 0.5 * kPi);
    const double ripple = 1.0 + 0.5 * bin_efficiency_variation * std::sin(phase);
    return transmission * detector_efficiency * ripple;
}

double ExperimentConfig::pulse_sigma_ps(int bin) const {
    if (network_bins <= 1) {
        return pulse_width_min_ps;
    }
    const double t = static_cast<double>(bin) / (network_bins - 1);
    return pulse_width_min_ps + (pulse_width_max_ps - pulse_width_min_ps) * t;
}

StreamGeometry ExperimentConfig::stream_geometry() const {
    StreamGeometry geometry;
    geometry.trial_period_ps = trial_period_ns * 1000.0;
    geometry.tau_ps = bin_separation_ns * 1000.0;
    geometry.bins_per_arm = network_bins;
    geometry.arm_of_channel = {0, 0, 1, 1};
    geometry.offset_ps = 0.0;
    return geometry;
}

std::uint32_t sample_pair_number(const ExperimentConfig& config, Rng& rng) {
    return rng.negative_binomial(config.mean_pairs, config.schmidt_modes);
}

SimulationResult simulate_trials(const ExperimentConfig& config) {
    SimulationResult result;
    const int bins = config.network_bins;
    result.joint.detector_count_a = bins;
    result.joint.detector_count_b = bins;
    result.joint.counts.assign(static_cast<std::size_t>(bins + 1) * (bins + 1), 0);
    result.joint.trials = config.trials;
    result.singles.bins_per_arm = bins;
    result.singles.counts.assign(2 * static_cast<std::size_t>(bins), 0);

    run_trials(config, [&](std::uint64_t, const ArmScratch& a, const ArmScratch& b, Rng&) {
        result.joint.at(static_cast<int>(a.bins.size()), static_cast<int>(b.bins.size()))++;
        for (int bin : a.bins) {
            result.singles.counts[bin]++;
        }
        for (int bin : b.bins) {
            result.singles.counts[bins + bin]++;
        }
    });
    return result;
}

namespace {

std::uint64_t run_with_tags(const ExperimentConfig& config, TagWriter& sink,
                            SimulationResult* accumulate_into) {
    const int bins = config.network_bins;
    const std::int64_t period_ps = std::llround(config.trial_period_ns * 1000.0);
    const std::int64_t tau_ps = std::llround(config.bin_separation_ns * 1000.0);
    // One full period of start offset keeps every tag positive (background
    // tags at bin 0 reach tau/2 before the first pulse).
    const std::int64_t origin_ps = period_ps;

    std::vector<double> sigma(bins);
    for (int b = 0; b < bins; b++) {
        sigma[b] = config.pulse_sigma_ps(b);
    }

    std::uint64_t events = 0;
    run_trials(config, [&](std::uint64_t trial, const ArmScratch& a, const ArmScratch& b,
                           Rng& jitter_rng) {
        if (accumulate_into != nullptr) {
            accumulate_into->joint.at(static_cast<int>(a.bins.size()),
                                      static_cast<int>(b.bins.size()))++;
        }
        const std::int64_t trial_start = origin_ps + static_cast<std::int64_t>(trial) * period_ps;
        int arm_index = 0;
        for (const ArmScratch* arm : {&a, &b}) {
            for (int bin : arm->bins) {
                double delta = 0.0;
                if (config.timing_jitter) {
                    if (arm->optical[bin]) {
                        delta = jitter_rng.gaussian(0.0, sigma[bin]);
                    } else {
                        delta = (jitter_rng.next_double() - 0.5) * static_cast<double>(tau_ps);
                    }
                }
                TimeTagRecord record;
                record.channel = static_cast<std::uint8_t>(arm_index * 2 + (bin & 1));
                record.timestamp_ps = trial_start + static_cast<std::int64_t>(bin) * tau_ps +
                                      std::llround(delta);
                sink.write(record);
                events++;
                if (accumulate_into != nullptr) {
                    accumulate_into->singles.counts[arm_index * bins + bin]++;
                }
            }
            arm_index++;
        }
    });
    return events;
}

}  // namespace

std::uint64_t synthesize_timetags(const ExperimentConfig& config, TagWriter& sink) {
    return run_with_tags(config, sink, nullptr);
}

SimulationResult simulate_and_tag(const ExperimentConfig& config, TagWriter& sink,
                                  std::uint64_t& events_written) {
    SimulationResult result;
    const int bins = config.network_bins;
    result.joint.detector_count_a = bins;
    result.joint.detector_count_b = bins;
    result.joint.counts.assign(static_cast<std::size_t>(bins + 1) * (bins + 1), 0);
    result.joint.trials = config.trials;
    result.singles.bins_per_arm = bins;
    result.singles.counts.assign(2 * static_cast<std::size_t>(bins), 0);
    events_written = run_with_tags(config, sink, &result);
    return result;
}

}  // namespace qbench
