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

#ifndef QBENCH_CLI_H
#define QBENCH_CLI_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qbench/click_counting.hpp"

namespace qbench {

// Serialization used by the commands and handy for tooling around them.
std::string joint_histogram_json(const JointClickHistogram& hist);
JointClickHistogram parse_joint_histogram_json(const std::string& text);
std::string singles_csv(const SinglesProfile& singles);

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitNumericalFailure = 3;

struct SimulateOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // overrides the config seed
    bool csv_tags = false;              // write CSV instead of binary tags
};

// Writes timetags.(ttb|csv), histogram.json, singles.csv, manifest.json.
int cmd_simulate(const SimulateOptions& options);

struct AnalyzeOptions {
    std::string timetag_path;
    std::vector<std::string> windows;  // "static:<ps>" / "dynamic:<mult>"
    std::string out_dir;
    int herald_min = 1;
    int herald_max = 6;
    int herald_arm = 1;              // condition on idler by default
    std::vector<int> k_list = {1};   // witness mode counts
    int mode_bins = 128;             // detector bins per witness mode
    std::uint64_t trials = 0;        // 0 = take from sibling manifest or infer
    std::optional<double> trial_period_ns;
    std::optional<double> bin_separation_ns;
    std::optional<int> network_bins;
};

// fit -> windows -> accumulate -> moments -> witness -> errors; writes
// results.csv/results.json, fits.csv, diagnostics.json, manifest.json.
int cmd_analyze(const AnalyzeOptions& options);

struct SweepOptions {
    std::string config_path;
    std::string sweep_path;  // sweep spec JSON
    std::string out_dir;
    bool resume = false;
};

// Full grid over pump settings x windows x heralds x K. Each finished cell is
// persisted under cells/ and skipped on resume; the final table is rebuilt
// from cells, so interrupted and uninterrupted runs converge byte-identically.
int cmd_sweep(const SweepOptions& options);

struct ReportOptions {
    std::string results_path;  // results.csv or a directory containing it
};

// Human-readable summary of a result table.
int cmd_report(const ReportOptions& options);

}  // namespace qbench

#endif
