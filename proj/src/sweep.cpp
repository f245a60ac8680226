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

#include "qbench/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace qbench {

namespace {

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::string format_param(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

auto key_tuple(const SweepCellKey& key) {
    return std::make_tuple(key.pump, key.window_mode, key.window_param, key.herald_n,
                           key.mode_count);
}

}  // namespace

std::string SweepCellKey::id() const {
    char buffer[160];
    std::snprintf(buffer, sizeof(buffer), "%s__%s-%s__h%02d__K%03d", pump.c_str(),
                  window_mode.c_str(), format_param(window_param).c_str(), herald_n, mode_count);
    return buffer;
}

void ResultTable::sort_by_key() {
    std::sort(rows.begin(), rows.end(), [](const SweepCellResult& a, const SweepCellResult& b) {
        return key_tuple(a.key) < key_tuple(b.key);
    });
}

std::string ResultTable::to_csv() const {
    std::ostringstream out;
    out << "pump,window_mode,window_param,herald_n,K,lambda_min,err_random,err_sys,"
           "err_combined,significance,trials\n";
    for (const auto& row : rows) {
        out << row.key.pump << ',' << row.key.window_mode << ','
            << format_param(row.key.window_param) << ',' << row.key.herald_n << ','
            << row.key.mode_count << ',';
        if (row.status == "ok" || row.status == "low_statistics") {
            out << format_double(row.lambda_min) << ',' << format_double(row.err_random) << ','
                << format_double(row.err_sys) << ',' << format_double(row.err_combined) << ','
                << format_double(row.significance) << ',' << row.trials << '\n';
        } else {
            out << "nan,nan,nan,nan,nan,0\n";
        }
    }
    return out.str();
}

std::string ResultTable::to_json() const {
    nlohmann::json array = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json cell;
        cell["pump"] = row.key.pump;
        cell["window_mode"] = row.key.window_mode;
        cell["window_param"] = row.key.window_param;
        cell["herald_n"] = row.key.herald_n;
        cell["K"] = row.key.mode_count;
        cell["status"] = row.status;
        if (row.status == "ok" || row.status == "low_statistics") {
            cell["lambda_min"] = row.lambda_min;
            cell["err_random"] = row.err_random;
            cell["err_sys"] = row.err_sys;
            cell["err_combined"] = row.err_combined;
            // A negative eigenvalue with exactly zero error has unbounded
            // significance; JSON has no infinity, so it is flagged instead.
            if (std::isfinite(row.significance)) {
                cell["significance"] = row.significance;
            } else {
                cell["significance_unbounded"] = true;
            }
        }
        cell["trials"] = row.trials;
        array.push_back(cell);
    }
    return array.dump(2) + "\n";
}

std::vector<SweepCellResult> evaluate_herald_cells(
    const JointClickHistogram& joint, double systematic_relative, const std::string& pump_label,
    const WindowSpec& window, int herald_arm, int herald_min, int herald_max,
    const std::vector<int>& mode_counts, int witness_detector_count) {
    const std::string window_mode =
        window.mode == WindowSpec::Mode::Static ? "static" : "dynamic";

    std::vector<SweepCellResult> cells;
    for (int herald = herald_min; herald <= herald_max; herald++) {
        bool have_slice = false;
        HeraldedSlice slice;
        std::string slice_status;
        try {
            slice = herald_condition(joint, herald_arm, herald);
            have_slice = true;
        } catch (const std::exception&) {
            slice_status = "empty_slice";
        }

        for (int mode_count : mode_counts) {
            SweepCellResult cell;
            cell.key = {pump_label, window_mode, window.param, herald, mode_count};
            if (!have_slice) {
                cell.status = slice_status;
                cells.push_back(cell);
                continue;
            }
            try {
                const auto witness = evaluate_witness(slice.conditional, mode_count,
                                                      witness_detector_count, systematic_relative);
                cell.status = slice.low_statistics ? "low_statistics" : "ok";
                cell.lambda_min = witness.min_eigenvalue;
                cell.err_random = witness.random_error;
                cell.err_sys = witness.systematic_error;
                cell.err_combined = witness.combined_error;
                cell.significance = witness.significance;
                cell.trials = witness.trials;
            } catch (const std::exception& e) {
                cell.status = std::string("error: ") + e.what();
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

}  // namespace qbench
