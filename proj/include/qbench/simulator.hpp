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

#ifndef QBENCH_SIMULATOR_H
#define QBENCH_SIMULATOR_H

#include <cstdint>
#include <string>

#include "qbench/click_counting.hpp"
#include "qbench/rng.hpp"
#include "qbench/timetag.hpp"

namespace qbench {

// Monte Carlo model of the experiment: pulsed PDC pair source, uniform
// time-multiplexed splitting over network_bins per arm, per-bin loss and
// efficiency ripple, independent background clicks, on-off readout.
struct ExperimentConfig {
    int config_version = 1;
    int network_bins = 128;            // MD, bins per arm
    double bin_separation_ns = 100.0;  // tau
    double trial_period_ns = 20000.0;  // laser repetition period after pulse picking
    double mean_pairs = 1.2;           // mean photon pairs per pulse (pump-power proxy)
    double schmidt_modes = 4.0;        // effective thermal mode count of the source
    double transmission_a = 0.861;
    double transmission_b = 0.813;
    double detector_efficiency = 0.90;
    double background_click_prob = 2.0e-4;  // per bin per trial
    double bin_efficiency_variation = 0.07; // peak-to-peak relative spread over bins
    double pulse_width_min_ps = 70.0;       // dispersion-broadened pulse sigma, first bin
    double pulse_width_max_ps = 700.0;      // and last bin
    bool timing_jitter = true;
    std::uint64_t trials = 100000;
    std::uint64_t rng_seed = 1;

    void validate() const;  // throws std::invalid_argument naming the bad field

    // Survival probability of a photon placed in the given bin:
    // arm transmission x detector efficiency x sinusoidal bin ripple.
    double bin_survival(int arm, int bin) const;
    // Gaussian arrival-time sigma of a bin, linear in the bin index.
    double pulse_sigma_ps(int bin) const;

    StreamGeometry stream_geometry() const;
};

struct SimulationResult {
    JointClickHistogram joint;
    SinglesProfile singles;
};

// Draw a photon-pair number for one pulse: negative binomial with
// mean = mean_pairs and schmidt_modes effective modes (Poisson limit for
// large mode counts).
std::uint32_t sample_pair_number(const ExperimentConfig& config, Rng& rng);

// Run all trials, accumulating the joint click histogram and per-bin singles.
// Deterministic for a given config and seed; trials are processed in fixed
// batches with per-batch RNG streams so partitioned runs merge identically.
SimulationResult simulate_trials(const ExperimentConfig& config);

// Same trial stream as simulate_trials (identical click patterns for the
// same seed), additionally emitting one time tag per click. Optical tags are
// Gaussian around the bin center with the bin's sigma schedule; background
// tags are uniform over the bin's slot. With timing_jitter = false every tag
// sits exactly on its bin center. Returns the number of events written.
std::uint64_t synthesize_timetags(const ExperimentConfig& config, TagWriter& sink);

// One pass producing both the ground-truth histograms and the tag stream.
SimulationResult simulate_and_tag(const ExperimentConfig& config, TagWriter& sink,
                                  std::uint64_t& events_written);

// JSON config file I/O (schema documented in README; unknown keys rejected).
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);
std::string config_json(const ExperimentConfig& config);

}  // namespace qbench

#endif
