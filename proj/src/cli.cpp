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

#include "qbench/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "qbench/analysis.hpp"
#include "qbench/simulator.hpp"
#include "qbench/sweep.hpp"
#include "qbench/timetag.hpp"

namespace qbench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path.string());
    }
    out << content;
}

std::string file_digest(const fs::path& path) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path.string()))));
    return buffer;
}

struct Manifest {
    std::string command;
    json parameters = json::object();
    json inputs = json::object();
    json outputs = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void add_input(const fs::path& path) { inputs[path.string()] = file_digest(path); }
    void add_output(const fs::path& path) {
        outputs[path.filename().string()] = file_digest(path);
    }
    void write(const fs::path& path) const {
        json manifest;
        manifest["tool"] = "qbench";
        manifest["version"] = kToolVersion;
        manifest["command"] = command;
        manifest["parameters"] = parameters;
        manifest["inputs"] = inputs;
        manifest["outputs"] = outputs;
        manifest["elapsed_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_file(path, manifest.dump(2) + "\n");
    }
};

json config_as_json(const ExperimentConfig& config) {
    return json::parse(config_json(config));
}

class VectorTagWriter : public TagWriter {
  public:
    void write(const TimeTagRecord& record) override { records.push_back(record); }
    std::vector<TimeTagRecord> records;
};

int report_error(const std::string& message, int code) {
    std::cerr << "qbench: " << message << "\n";
    return code;
}

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::string fits_csv(const std::vector<GaussianFit>& fits, int bins_per_arm) {
    std::ostringstream out;
    out << "arm,bin,events,mean_ps,sigma_ps,amplitude,background_floor,fit_residual,flagged\n";
    for (std::size_t g = 0; g < fits.size(); g++) {
        const auto& fit = fits[g];
        out << g / bins_per_arm << ',' << g % bins_per_arm << ',' << fit.events << ','
            << format_double(fit.mean_ps) << ',' << format_double(fit.sigma_ps) << ','
            << format_double(fit.amplitude) << ',' << format_double(fit.background_floor) << ','
            << format_double(fit.fit_residual) << ',' << (fit.flagged ? 1 : 0) << '\n';
    }
    return out.str();
}

SweepCellResult cell_from_json(const json& j) {
    SweepCellResult cell;
    cell.key.pump = j.at("pump").get<std::string>();
    cell.key.window_mode = j.at("window_mode").get<std::string>();
    cell.key.window_param = j.at("window_param").get<double>();
    cell.key.herald_n = j.at("herald_n").get<int>();
    cell.key.mode_count = j.at("K").get<int>();
    cell.status = j.at("status").get<std::string>();
    if (j.contains("lambda_min")) {
        cell.lambda_min = j.at("lambda_min").get<double>();
        cell.err_random = j.at("err_random").get<double>();
        cell.err_sys = j.at("err_sys").get<double>();
        cell.err_combined = j.at("err_combined").get<double>();
        if (j.contains("significance")) {
            cell.significance = j.at("significance").get<double>();
        } else if (j.value("significance_unbounded", false)) {
            cell.significance = std::numeric_limits<double>::infinity();
        }
    }
    cell.trials = j.at("trials").get<std::uint64_t>();
    return cell;
}

json cell_to_json(const SweepCellResult& cell) {
    json j;
    j["pump"] = cell.key.pump;
    j["window_mode"] = cell.key.window_mode;
    j["window_param"] = cell.key.window_param;
    j["herald_n"] = cell.key.herald_n;
    j["K"] = cell.key.mode_count;
    j["status"] = cell.status;
    if (cell.status == "ok" || cell.status == "low_statistics") {
        j["lambda_min"] = cell.lambda_min;
        j["err_random"] = cell.err_random;
        j["err_sys"] = cell.err_sys;
        j["err_combined"] = cell.err_combined;
        if (std::isfinite(cell.significance)) {
            j["significance"] = cell.significance;
        } else {
            j["significance_unbounded"] = true;
        }
    }
    j["trials"] = cell.trials;
    return j;
}

}  // namespace

std::string joint_histogram_json(const JointClickHistogram& hist) {
    json j;
    j["detector_count_a"] = hist.detector_count_a;
    j["detector_count_b"] = hist.detector_count_b;
    j["trials"] = hist.trials;
    json cells = json::array();
    for (int n_a = 0; n_a <= hist.detector_count_a; n_a++) {
        for (int n_b = 0; n_b <= hist.detector_count_b; n_b++) {
            const auto count = hist.at(n_a, n_b);
            if (count != 0) {
                cells.push_back(json::array({n_a, n_b, count}));
            }
        }
    }
    j["cells"] = cells;
    return j.dump(2) + "\n";
}

JointClickHistogram parse_joint_histogram_json(const std::string& text) {
    const json j = json::parse(text);
    JointClickHistogram hist;
    hist.detector_count_a = j.at("detector_count_a").get<int>();
    hist.detector_count_b = j.at("detector_count_b").get<int>();
    hist.trials = j.at("trials").get<std::uint64_t>();
    hist.counts.assign(
        static_cast<std::size_t>(hist.detector_count_a + 1) * (hist.detector_count_b + 1), 0);
    for (const auto& cell : j.at("cells")) {
        hist.at(cell.at(0).get<int>(), cell.at(1).get<int>()) = cell.at(2).get<std::uint64_t>();
    }
    hist.validate();
    return hist;
}

std::string singles_csv(const SinglesProfile& singles) {
    std::ostringstream out;
    out << "arm,bin,count\n";
    for (std::size_t g = 0; g < singles.counts.size(); g++) {
        out << g / singles.bins_per_arm << ',' << g % singles.bins_per_arm << ','
            << singles.counts[g] << '\n';
    }
    return out.str();
}

int cmd_simulate(const SimulateOptions& options) {
    ExperimentConfig config;
    try {
        config = load_config(options.config_path);
        if (options.seed) {
            config.rng_seed = *options.seed;
        }
        config.validate();
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitDataError);
    }

    try {
        Manifest manifest;
        manifest.command = "simulate";
        manifest.parameters["config"] = config_as_json(config);
        manifest.parameters["seed"] = config.rng_seed;
        manifest.add_input(options.config_path);

        const fs::path out_dir(options.out_dir);
        fs::create_directories(out_dir);

        const fs::path tag_path = out_dir / (options.csv_tags ? "timetags.csv" : "timetags.ttb");
        std::uint64_t events = 0;
        SimulationResult result;
        {
            std::ofstream tag_stream(tag_path, std::ios::binary);
            if (!tag_stream) {
                throw std::runtime_error("cannot write " + tag_path.string());
            }
            if (options.csv_tags) {
                CsvTagWriter writer(tag_stream);
                result = simulate_and_tag(config, writer, events);
            } else {
                BinaryTagWriter writer(tag_stream);
                result = simulate_and_tag(config, writer, events);
            }
        }
        write_file(out_dir / "histogram.json", joint_histogram_json(result.joint));
        write_file(out_dir / "singles.csv", singles_csv(result.singles));

        manifest.parameters["events_written"] = events;
        manifest.add_output(tag_path);
        manifest.add_output(out_dir / "histogram.json");
        manifest.add_output(out_dir / "singles.csv");
        manifest.write(out_dir / "manifest.json");
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitDataError);
    }
}

namespace {

// Geometry and trial count for an analysis, from explicit options or the
// manifest sitting next to the input stream.
struct AnalysisContext {
    StreamGeometry geometry;
    std::uint64_t trials = 0;
};

AnalysisContext resolve_analysis_context(const AnalyzeOptions& options) {
    AnalysisContext context;
    ExperimentConfig defaults;
    double trial_period_ns = defaults.trial_period_ns;
    double bin_separation_ns = defaults.bin_separation_ns;
    int network_bins = defaults.network_bins;
    std::uint64_t trials = 0;

    const fs::path manifest_path = fs::path(options.timetag_path).parent_path() / "manifest.json";
    if (fs::exists(manifest_path)) {
        const json manifest = json::parse(read_file(manifest_path.string()));
        if (manifest.contains("parameters") && manifest["parameters"].contains("config")) {
            const auto& config = manifest["parameters"]["config"];
            trial_period_ns = config.value("trial_period_ns", trial_period_ns);
            bin_separation_ns = config.value("bin_separation_ns", bin_separation_ns);
            network_bins = config.value("network_bins", network_bins);
            trials = config.value("trials", trials);
        }
    }
    if (options.trial_period_ns) {
        trial_period_ns = *options.trial_period_ns;
    }
    if (options.bin_separation_ns) {
        bin_separation_ns = *options.bin_separation_ns;
    }
    if (options.network_bins) {
        network_bins = *options.network_bins;
    }
    if (options.trials > 0) {
        trials = options.trials;
    }

    context.geometry.trial_period_ps = trial_period_ns * 1000.0;
    context.geometry.tau_ps = bin_separation_ns * 1000.0;
    context.geometry.bins_per_arm = network_bins;
    context.geometry.arm_of_channel = {0, 0, 1, 1};
    context.trials = trials;
    return context;
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& options) {
    if (options.windows.empty()) {
        return report_error("analyze needs at least one --windows spec", kExitUsage);
    }
    std::vector<WindowSpec> specs;
    try {
        for (const auto& text : options.windows) {
            specs.push_back(WindowSpec::parse(text));
        }
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitUsage);
    }

    std::vector<TimeTagRecord> records;
    AnalysisContext context;
    try {
        records = parse_stream_file(options.timetag_path);
        context = resolve_analysis_context(options);
        context.geometry.validate();
        for (int k : options.k_list) {
            if (k < 1 || k * options.mode_bins > context.geometry.bins_per_arm) {
                throw std::invalid_argument(
                    "k_list entry exceeds the per-arm detection bin budget");
            }
        }
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitDataError);
    }

    try {
        Manifest manifest;
        manifest.command = "analyze";
        manifest.add_input(options.timetag_path);

        const std::string dataset = fs::path(options.timetag_path).stem().string();
        context.geometry.offset_ps = estimate_stream_offset(records, context.geometry);
        const auto fits = fit_bins(records, context.geometry);

        ResultTable table;
        json diagnostics = json::array();
        for (const auto& spec : specs) {
            const auto plan = plan_windows(fits, spec, context.geometry);
            const auto accumulated = accumulate(records, plan, context.geometry, context.trials);

            double eps_sys = 0.0;
            json diag;
            diag["window"] = spec.label();
            diag["total_events"] = accumulated.total_events;
            diag["window_events"] = accumulated.window_events;
            diag["discarded_events"] = accumulated.discarded_events;
            diag["trials"] = accumulated.joint.trials;
            try {
                const auto sys = systematic_error(accumulated.singles);
                eps_sys = sys.pooled;
                diag["eps_sys_arm_a"] = sys.arm_a;
                diag["eps_sys_arm_b"] = sys.arm_b;
                diag["eps_sys_pooled"] = sys.pooled;
            } catch (const std::exception& e) {
                diag["eps_sys_error"] = e.what();
            }
            diagnostics.push_back(diag);

            auto cells = evaluate_herald_cells(accumulated.joint, eps_sys, dataset, spec,
                                               options.herald_arm, options.herald_min,
                                               options.herald_max, options.k_list,
                                               options.mode_bins);
            table.rows.insert(table.rows.end(), cells.begin(), cells.end());
        }
        table.sort_by_key();

        const fs::path out_dir(options.out_dir);
        write_file(out_dir / "results.csv", table.to_csv());
        write_file(out_dir / "results.json", table.to_json());
        write_file(out_dir / "fits.csv", fits_csv(fits, context.geometry.bins_per_arm));
        write_file(out_dir / "diagnostics.json", diagnostics.dump(2) + "\n");

        manifest.parameters["windows"] = options.windows;
        manifest.parameters["herald_arm"] = options.herald_arm;
        manifest.parameters["herald_min"] = options.herald_min;
        manifest.parameters["herald_max"] = options.herald_max;
        manifest.parameters["k_list"] = options.k_list;
        manifest.parameters["mode_bins"] = options.mode_bins;
        manifest.parameters["trials"] = context.trials;
        manifest.parameters["stream_offset_ps"] = context.geometry.offset_ps;
        manifest.add_output(out_dir / "results.csv");
        manifest.add_output(out_dir / "results.json");
        manifest.add_output(out_dir / "fits.csv");
        manifest.add_output(out_dir / "diagnostics.json");
        manifest.write(out_dir / "manifest.json");
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitNumericalFailure);
    }
}

int cmd_sweep(const SweepOptions& options) {
    ExperimentConfig base_config;
    json spec;
    try {
        base_config = load_config(options.config_path);
        spec = json::parse(read_file(options.sweep_path));
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitDataError);
    }

    try {
        Manifest manifest;
        manifest.command = "sweep";
        manifest.add_input(options.config_path);
        manifest.add_input(options.sweep_path);

        struct PumpSetting {
            std::string label;
            double mean_pairs;
        };
        std::vector<PumpSetting> pumps;
        for (const auto& pump : spec.at("pump_settings")) {
            pumps.push_back({pump.at("label").get<std::string>(),
                             pump.at("mean_pairs").get<double>()});
        }
        std::vector<WindowSpec> windows;
        for (const auto& text : spec.at("windows")) {
            windows.push_back(WindowSpec::parse(text.get<std::string>()));
        }
        const int herald_arm = spec.value("herald_arm", 1);
        const int herald_min = spec.value("herald_min", 1);
        const int herald_max = spec.value("herald_max", 12);
        std::vector<int> k_list = {1};
        if (spec.contains("k_list")) {
            k_list = spec.at("k_list").get<std::vector<int>>();
        }
        const int mode_bins = spec.value("mode_bins", base_config.network_bins);
        const std::uint64_t trials = spec.value("trials", base_config.trials);

        const fs::path out_dir(options.out_dir);
        const fs::path cells_dir = out_dir / "cells";
        fs::create_directories(cells_dir);

        std::uint64_t evaluated = 0;
        std::uint64_t skipped = 0;
        for (std::size_t pump_index = 0; pump_index < pumps.size(); pump_index++) {
            const auto& pump = pumps[pump_index];

            // A dataset is regenerated only when at least one of its cells is
            // missing; finished (pump, window) groups are skipped on resume.
            std::vector<bool> window_done(windows.size(), false);
            bool all_done = true;
            for (std::size_t w = 0; w < windows.size(); w++) {
                bool done = options.resume;
                if (options.resume) {
                    for (int herald = herald_min; herald <= herald_max && done; herald++) {
                        for (int k : k_list) {
                            SweepCellKey key{pump.label,
                                             windows[w].mode == WindowSpec::Mode::Static
                                                 ? "static"
                                                 : "dynamic",
                                             windows[w].param, herald, k};
                            if (!fs::exists(cells_dir / (key.id() + ".json"))) {
                                done = false;
                                break;
                            }
                        }
                    }
                }
                window_done[w] = done;
                all_done = all_done && done;
            }
            if (all_done) {
                skipped += windows.size();
                continue;
            }

            ExperimentConfig config = base_config;
            config.mean_pairs = pump.mean_pairs;
            config.trials = trials;
            config.rng_seed = base_config.rng_seed + 1000003ULL * pump_index;
            config.validate();

            VectorTagWriter tags;
            std::uint64_t events = 0;
            simulate_and_tag(config, tags, events);

            StreamGeometry geometry = config.stream_geometry();
            geometry.offset_ps = estimate_stream_offset(tags.records, geometry);
            const auto fits = fit_bins(tags.records, geometry);

            for (std::size_t w = 0; w < windows.size(); w++) {
                if (window_done[w]) {
                    skipped++;
                    continue;
                }
                const auto plan = plan_windows(fits, windows[w], geometry);
                const auto accumulated =
                    accumulate(tags.records, plan, geometry, config.trials);
                double eps_sys = 0.0;
                try {
                    eps_sys = systematic_error(accumulated.singles).pooled;
                } catch (const std::exception&) {
                    // No singles (e.g. zero-trial run); keep zero.
                }
                const auto cells = evaluate_herald_cells(
                    accumulated.joint, eps_sys, pump.label, windows[w], herald_arm, herald_min,
                    herald_max, k_list, mode_bins);
                for (const auto& cell : cells) {
                    write_file(cells_dir / (cell.key.id() + ".json"),
                               cell_to_json(cell).dump(2) + "\n");
                    evaluated++;
                }
            }
        }

        // Rebuild the table from the persisted cells; resumed and fresh runs
        // produce byte-identical tables.
        ResultTable table;
        bool any_cell_error = false;
        for (const auto& pump : pumps) {
            for (const auto& window : windows) {
                for (int herald = herald_min; herald <= herald_max; herald++) {
                    for (int k : k_list) {
                        SweepCellKey key{pump.label,
                                         window.mode == WindowSpec::Mode::Static ? "static"
                                                                                 : "dynamic",
                                         window.param, herald, k};
                        const fs::path cell_path = cells_dir / (key.id() + ".json");
                        if (!fs::exists(cell_path)) {
                            throw std::runtime_error("sweep cell missing: " + key.id());
                        }
                        auto cell = cell_from_json(json::parse(read_file(cell_path.string())));
                        any_cell_error =
                            any_cell_error || cell.status.rfind("error:", 0) == 0;
                        table.rows.push_back(std::move(cell));
                    }
                }
            }
        }
        table.sort_by_key();
        write_file(out_dir / "table.csv", table.to_csv());
        write_file(out_dir / "table.json", table.to_json());

        manifest.parameters["pump_settings"] = spec.at("pump_settings");
        manifest.parameters["windows"] = spec.at("windows");
        manifest.parameters["herald_arm"] = herald_arm;
        manifest.parameters["herald_min"] = herald_min;
        manifest.parameters["herald_max"] = herald_max;
        manifest.parameters["k_list"] = k_list;
        manifest.parameters["mode_bins"] = mode_bins;
        manifest.parameters["trials"] = trials;
        manifest.parameters["cells_total"] = table.rows.size();
        manifest.parameters["cells_evaluated"] = evaluated;
        manifest.parameters["cell_groups_skipped"] = skipped;
        manifest.add_output(out_dir / "table.csv");
        manifest.add_output(out_dir / "table.json");
        manifest.write(out_dir / "manifest.json");
        return any_cell_error ? kExitNumericalFailure : kExitOk;
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitNumericalFailure);
    }
}

int cmd_report(const ReportOptions& options) {
    fs::path path(options.results_path);
    try {
        if (fs::is_directory(path)) {
            if (fs::exists(path / "results.csv")) {
                path /= "results.csv";
            } else if (fs::exists(path / "table.csv")) {
                path /= "table.csv";
            } else {
                throw std::runtime_error("no results.csv or table.csv in " + path.string());
            }
        }
        std::ifstream in(path);
        if (!in) {
            throw std::runtime_error("cannot open " + path.string());
        }

        std::string line;
        if (!std::getline(in, line)) {
            throw std::runtime_error("empty result table");
        }
        struct Row {
            std::string pump, window_mode;
            double window_param, lambda, err, sig;
            int herald, k;
            std::uint64_t trials;
        };
        std::vector<Row> rows;
        std::size_t blank = 0;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string field;
            while (std::getline(ss, field, ',')) {
                fields.push_back(field);
            }
            if (fields.size() != 11) {
                throw std::runtime_error("malformed result row: " + line);
            }
            Row row;
            row.pump = fields[0];
            row.window_mode = fields[1];
            row.window_param = std::stod(fields[2]);
            row.herald = std::stoi(fields[3]);
            row.k = std::stoi(fields[4]);
            row.lambda = std::stod(fields[5]);
            row.err = std::stod(fields[8]);
            row.sig = std::stod(fields[9]);
            row.trials = std::stoull(fields[10]);
            if (std::isnan(row.lambda)) {
                blank++;
            } else {
                rows.push_back(row);
            }
        }

        std::size_t nonclassical = 0;
        std::size_t significant = 0;
        const Row* best = nullptr;
        for (const auto& row : rows) {
            if (row.lambda < 0.0) {
                nonclassical++;
                if (row.sig >= 5.0) {
                    significant++;
                }
                if (best == nullptr || row.sig > best->sig) {
                    best = &row;
                }
            }
        }

        std::cout << "result table: " << path.string() << "\n";
        std::cout << "cells: " << rows.size() + blank << " total, " << rows.size()
                  << " evaluated, " << blank << " blank\n";
        std::cout << "nonclassical cells (lambda_min < 0): " << nonclassical << "\n";
        std::cout << "significant cells (Sigma >= 5): " << significant << "\n";
        if (best != nullptr) {
            std::cout << "highest significance: Sigma = " << best->sig << " at pump=" << best->pump
                      << " window=" << best->window_mode << ":" << best->window_param
                      << " herald=" << best->herald << " K=" << best->k
                      << " (lambda_min = " << best->lambda << ", trials = " << best->trials
                      << ")\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(e.what(), kExitDataError);
    }
}

}  // namespace qbench
