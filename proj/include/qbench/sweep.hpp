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

#ifndef QBENCH_SWEEP_H
#define QBENCH_SWEEP_H

#include <cstdint>
#include <string>
#include <vector>

#include "qbench/analysis.hpp"
#include "qbench/timetag.hpp"

namespace qbench {

// One witness evaluation cell in a sweep over pump settings, coincidence
// windows, herald click numbers, and mode counts K.
struct SweepCellKey {
    std::string pump;
    std::string window_mode;  // "static" | "dynamic"
    double window_param = 0.0;
    int herald_n = 0;
    int mode_count = 1;  // K

    // Filesystem- and sort-friendly unique key.
    std::string id() const;
};

struct SweepCellResult {
    SweepCellKey key;
    std::string status;  // "ok", "empty_slice", "low_statistics", or an error note
    double lambda_min = 0.0;
    double err_random = 0.0;
    double err_sys = 0.0;
    double err_combined = 0.0;
    double significance = 0.0;
    std::uint64_t trials = 0;  // heralding trials feeding this cell
};

struct ResultTable {
    std::vector<SweepCellResult> rows;

    void sort_by_key();
    std::string to_csv() const;   // fixed column schema, %.17g numerics
    std::string to_json() const;  // same rows plus status
};

// Witness cells for every (herald, K) pair from one accumulated dataset.
// herald cells with an empty slice are recorded as failures and skipped;
// slices under 100 trials are evaluated but marked low_statistics.
std::vector<SweepCellResult> evaluate_herald_cells(
    const JointClickHistogram& joint, double systematic_relative, const std::string& pump_label,
    const WindowSpec& window, int herald_arm, int herald_min, int herald_max,
    const std::vector<int>& mode_counts, int witness_detector_count);

}  // namespace qbench

#endif
