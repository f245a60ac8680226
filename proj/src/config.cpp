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

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "qbench/simulator.hpp"

namespace qbench {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& field, const std::string& problem) {
    throw std::invalid_argument("config field '" + field + "': " + problem);
}

double require_number(const json& j, const std::string& field, double fallback, bool* present) {
    if (!j.contains(field)) {
        *present = false;
        return fallback;
    }
    *present = true;
    if (!j.at(field).is_number()) {
        schema_error(field, "expected a number");
    }
    return j.at(field).get<double>();
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }

    static const std::set<std::string> known = {
        "config_version",    "network_bins",        "bin_separation_ns",
        "trial_period_ns",   "mean_pairs",          "schmidt_modes",
        "transmission_a",    "transmission_b",      "detector_efficiency",
        "background_click_prob", "bin_efficiency_variation", "pulse_width_min_ps",
        "pulse_width_max_ps", "timing_jitter",      "trials",
        "rng_seed"};
    for (const auto& item : j.items()) {
        if (known.find(item.key()) == known.end()) {
            schema_error(item.key(), "unknown field");
        }
    }

    ExperimentConfig config;
    bool present = false;

    if (j.contains("config_version")) {
        if (!j.at("config_version").is_number_integer()) {
            schema_error("config_version", "expected an integer");
        }
        config.config_version = j.at("config_version").get<int>();
    }
    if (j.contains("network_bins")) {
        if (!j.at("network_bins").is_number_integer()) {
            schema_error("network_bins", "expected an integer");
        }
        config.network_bins = j.at("network_bins").get<int>();
    }
    config.bin_separation_ns =
        require_number(j, "bin_separation_ns", config.bin_separation_ns, &present);
    config.trial_period_ns = require_number(j, "trial_period_ns", config.trial_period_ns, &present);
    config.mean_pairs = require_number(j, "mean_pairs", config.mean_pairs, &present);
    config.schmidt_modes = require_number(j, "schmidt_modes", config.schmidt_modes, &present);
    config.transmission_a = require_number(j, "transmission_a", config.transmission_a, &present);
    config.transmission_b = require_number(j, "transmission_b", config.transmission_b, &present);
    config.detector_efficiency =
        require_number(j, "detector_efficiency", config.detector_efficiency, &present);
    config.background_click_prob =
        require_number(j, "background_click_prob", config.background_click_prob, &present);
    config.bin_efficiency_variation =
        require_number(j, "bin_efficiency_variation", config.bin_efficiency_variation, &present);
    config.pulse_width_min_ps =
        require_number(j, "pulse_width_min_ps", config.pulse_width_min_ps, &present);
    config.pulse_width_max_ps =
        require_number(j, "pulse_width_max_ps", config.pulse_width_max_ps, &present);
    if (j.contains("timing_jitter")) {
        if (!j.at("timing_jitter").is_boolean()) {
            schema_error("timing_jitter", "expected a boolean");
        }
        config.timing_jitter = j.at("timing_jitter").get<bool>();
    }
    if (j.contains("trials")) {
        if (!j.at("trials").is_number_unsigned() && !j.at("trials").is_number_integer()) {
            schema_error("trials", "expected a nonnegative integer");
        }
        if (j.at("trials").is_number_integer() && j.at("trials").get<std::int64_t>() < 0) {
            schema_error("trials", "expected a nonnegative integer");
        }
        config.trials = j.at("trials").get<std::uint64_t>();
    }
    if (j.contains("rng_seed")) {
        if (!j.at("rng_seed").is_number_unsigned() && !j.at("rng_seed").is_number_integer()) {
            schema_error("rng_seed", "expected an integer");
        }
        config.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    }

    config.validate();  // range checks, messages name the offending field
    return config;
}

std::string config_json(const ExperimentConfig& config) {
    json j;
    j["config_version"] = config.config_version;
    j["network_bins"] = config.network_bins;
    j["bin_separation_ns"] = config.bin_separation_ns;
    j["trial_period_ns"] = config.trial_period_ns;
    j["mean_pairs"] = config.mean_pairs;
    j["schmidt_modes"] = config.schmidt_modes;
    j["transmission_a"] = config.transmission_a;
    j["transmission_b"] = config.transmission_b;
    j["detector_efficiency"] = config.detector_efficiency;
    j["background_click_prob"] = config.background_click_prob;
    j["bin_efficiency_variation"] = config.bin_efficiency_variation;
    j["pulse_width_min_ps"] = config.pulse_width_min_ps;
    j["pulse_width_max_ps"] = config.pulse_width_max_ps;
    j["timing_jitter"] = config.timing_jitter;
    j["trials"] = config.trials;
    j["rng_seed"] = config.rng_seed;
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_json(buffer.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write config file: " + path);
    }
    out << config_json(config);
}

}  // namespace qbench
