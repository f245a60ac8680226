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

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qbench/cli.hpp"

namespace {

// "A..B" -> [A, B]
bool parse_range(const std::string& text, int& lo, int& hi) {
    const auto pos = text.find("..");
    if (pos == std::string::npos) {
        return false;
    }
    try {
        lo = std::stoi(text.substr(0, pos));
        hi = std::stoi(text.substr(pos + 2));
    } catch (const std::exception&) {
        return false;
    }
    return lo >= 0 && hi >= lo;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Click-counting simulation and multimode nonclassicality analysis"};
    app.require_subcommand(1);

    qbench::SimulateOptions simulate_options;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto* simulate = app.add_subcommand("simulate", "generate time tags and ground truth");
    simulate->add_option("--config", simulate_options.config_path, "experiment config JSON")
        ->required();
    simulate->add_option("--out", simulate_options.out_dir, "output directory")->required();
    simulate->add_option("--seed", seed, "override the config RNG seed")
        ->each([&seed_set](const std::string&) { seed_set = true; });
    simulate->add_flag("--csv-tags", simulate_options.csv_tags, "write CSV instead of binary tags");

    qbench::AnalyzeOptions analyze_options;
    std::string herald_range = "1..6";
    auto* analyze = app.add_subcommand("analyze", "witness analysis of a time-tag stream");
    analyze->add_option("--input", analyze_options.timetag_path, "time-tag file (.ttb or .csv)")
        ->required();
    analyze
        ->add_option("--windows", analyze_options.windows,
                     "window specs: static:<ps> or dynamic:<multiple>")
        ->required();
    analyze->add_option("--out", analyze_options.out_dir, "output directory")->required();
    analyze->add_option("--herald-range", herald_range, "herald click range A..B (default 1..6)");
    analyze->add_option("--herald-arm", analyze_options.herald_arm,
                        "heralding arm: 0 = signal, 1 = idler (default)");
    analyze->add_option("--k-list", analyze_options.k_list, "witness mode counts K");
    analyze->add_option("--mode-bins", analyze_options.mode_bins,
                        "detection bins per witness mode (default 128)");
    analyze->add_option("--trials", analyze_options.trials,
                        "total trial count (default: manifest, else inferred)");
    double trial_period_ns = 0.0;
    double bin_separation_ns = 0.0;
    int network_bins = 0;
    analyze->add_option("--trial-period-ns", trial_period_ns, "override the trial period");
    analyze->add_option("--bin-separation-ns", bin_separation_ns, "override the bin separation");
    analyze->add_option("--network-bins", network_bins, "override the per-arm bin count");

    qbench::SweepOptions sweep_options;
    auto* sweep = app.add_subcommand("sweep", "grid of witness analyses");
    sweep->add_option("--config", sweep_options.config_path, "base experiment config JSON")
        ->required();
    sweep->add_option("--sweep", sweep_options.sweep_path, "sweep spec JSON")->required();
    sweep->add_option("--out", sweep_options.out_dir, "output directory")->required();
    sweep->add_flag("--resume", sweep_options.resume, "skip cells that already exist");

    qbench::ReportOptions report_options;
    auto* report = app.add_subcommand("report", "summarize a result table");
    report->add_option("--results", report_options.results_path, "results.csv/table.csv or dir")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qbench::kExitUsage;
    }

    if (simulate->parsed()) {
        if (seed_set) {
            simulate_options.seed = seed;
        }
        return qbench::cmd_simulate(simulate_options);
    }
    if (analyze->parsed()) {
        if (!parse_range(herald_range, analyze_options.herald_min, analyze_options.herald_max)) {
            return qbench::kExitUsage;
        }
        if (trial_period_ns > 0.0) {
            analyze_options.trial_period_ns = trial_period_ns;
        }
        if (bin_separation_ns > 0.0) {
            analyze_options.bin_separation_ns = bin_separation_ns;
        }
        if (network_bins > 0) {
            analyze_options.network_bins = network_bins;
        }
        return qbench::cmd_analyze(analyze_options);
    }
    if (sweep->parsed()) {
        return qbench::cmd_sweep(sweep_options);
    }
    if (report->parsed()) {
        return qbench::cmd_report(report_options);
    }
    return qbench::kExitUsage;
}
