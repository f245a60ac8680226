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

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qbench {

namespace {

constexpr char kBinaryMagic[4] = {'T', 'T', 'G', '1'};
constexpr std::uint8_t kBinaryVersion = 1;
constexpr std::uint64_t kMinFitEvents = 50;
constexpr double kSigmaFloorPs = 10.0;
constexpr double kSigmaCeilPs = 10000.0;
constexpr double kTwoPi = 6.28318530717958647692;

[[noreturn]] void parse_error(const std::string& what) {
    throw std::runtime_error(what);
}

struct FoldedEvent {
    int arm = -1;
    std::int64_t trial = -1;
    double position_ps = 0.0;  // in-trial position, in [-tau/2, period - tau/2)
    bool valid = false;
};

FoldedEvent fold_event(const TimeTagRecord& record, const StreamGeometry& geometry) {
    FoldedEvent event;
    if (record.channel >= geometry.arm_of_channel.size()) {
        return event;
    }
    event.arm = geometry.arm_of_channel[record.channel];
    if (event.arm < 0) {
        return event;
    }
    // Shift by tau/2 so bin 0's window is contiguous inside one trial.
    const double t = static_cast<double>(record.timestamp_ps) - geometry.offset_ps;
    const double shifted = t + 0.5 * geometry.tau_ps;
    const double trial = std::floor(shifted / geometry.trial_period_ps);
    event.trial = static_cast<std::int64_t>(trial);
    event.position_ps = t - trial * geometry.trial_period_ps;
    event.valid = true;
    return event;
}

// Least-squares Gaussian-plus-floor fit on a histogram, Levenberg-Marquardt
// with analytic Jacobian. Returns false when the solver stalls; the caller
// then falls back to the moment estimates it used for initialization.
bool fit_gaussian_lm(const std::vector<double>& x, const std::vector<double>& y, double& amplitude,
                     double& mean, double& sigma, double& floor_level, double& rms_residual) {
    const int n = static_cast<int>(x.size());
    Eigen::Vector4d params(amplitude, mean, sigma, floor_level);

    auto sum_squared_residuals = [&](const Eigen::Vector4d& p) {
        double ss = 0.0;
        for (int i = 0; i < n; i++) {
            const double z = (x[i] - p[1]) / p[2];
            const double model = p[0] * std::exp(-0.5 * z * z) + p[3];
            const double r = model - y[i];
            ss += r * r;
        }
        return ss;
    };

    double ss = sum_squared_residuals(params);
    double lambda = 1e-3;
    bool improved_once = false;
    for (int iter = 0; iter < 200; iter++) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (int i = 0; i < n; i++) {
            const double z = (x[i] - params[1]) / params[2];
            const double e = std::exp(-0.5 * z * z);
            const double r = params[0] * e + params[3] - y[i];
            Eigen::Vector4d jac;
            jac[0] = e;
            jac[1] = params[0] * e * z / params[2];
            jac[2] = params[0] * e * z * z / params[2];
            jac[3] = 1.0;
            jtj += jac * jac.transpose();
            jtr += jac * r;
        }
        Eigen::Matrix4d damped = jtj;
        for (int d = 0; d < 4; d++) {
            damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
        }
        const Eigen::Vector4d step = damped.ldlt().solve(-jtr);
        if (!step.allFinite()) {
            return improved_once;
        }
        Eigen::Vector4d trial_params = params + step;
        if (trial_params[2] <= 0.0) {
            trial_params[2] = 0.5 * params[2];
        }
        const double trial_ss = sum_squared_residuals(trial_params);
        if (trial_ss < ss) {
            const double relative_drop = (ss - trial_ss) / std::max(ss, 1e-300);
            params = trial_params;
            ss = trial_ss;
            lambda = std::max(lambda * 0.3, 1e-12);
            improved_once = true;
            if (relative_drop < 1e-10) {
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e9) {
                break;
            }
        }
    }
    amplitude = params[0];
    mean = params[1];
    sigma = std::abs(params[2]);
    floor_level = params[3];
    rms_residual = std::sqrt(ss / n);
    return true;
}

}  // namespace

void StreamGeometry::validate() const {
    if (tau_ps <= 0.0 || trial_period_ps <= 0.0) {
        throw std::invalid_argument("stream geometry times must be positive");
    }
    if (bins_per_arm < 1) {
        throw std::invalid_argument("bins_per_arm must be positive");
    }
    if (bins_per_arm * tau_ps > trial_period_ps + 1e-6) {
        throw std::invalid_argument("bins do not fit into the trial period");
    }
    const double periods = trial_period_ps / tau_ps;
    if (std::abs(periods - std::round(periods)) > 1e-9 * periods) {
        throw std::invalid_argument("trial period must be an integer number of bin separations");
    }
    bool any_arm = false;
    for (int arm : arm_of_channel) {
        if (arm > 1) {
            throw std::invalid_argument("arm indices must be 0, 1, or -1 (ignored)");
        }
        any_arm = any_arm || arm >= 0;
    }
    if (!any_arm) {
        throw std::invalid_argument("no channel is mapped to an arm");
    }
}

int StreamGeometry::arm_count() const {
    int max_arm = -1;
    for (int arm : arm_of_channel) {
        max_arm = std::max(max_arm, arm);
    }
    return max_arm + 1;
}

CsvTagWriter::CsvTagWriter(std::ostream& out) : out_(out) {
    out_ << "channel,timestamp_ps\n";
}

void CsvTagWriter::write(const TimeTagRecord& record) {
    out_ << static_cast<int>(record.channel) << ',' << record.timestamp_ps << '\n';
}

BinaryTagWriter::BinaryTagWriter(std::ostream& out) : out_(out) {
    out_.write(kBinaryMagic, 4);
    out_.put(static_cast<char>(kBinaryVersion));
}

void BinaryTagWriter::write(const TimeTagRecord& record) {
    char frame[9];
    frame[0] = static_cast<char>(record.channel);
    const auto ts = static_cast<std::uint64_t>(record.timestamp_ps);
    for (int i = 0; i < 8; i++) {
        frame[1 + i] = static_cast<char>((ts >> (8 * i)) & 0xff);
    }
    out_.write(frame, 9);
}

std::vector<TimeTagRecord> parse_csv_stream(std::istream& in) {
    std::vector<TimeTagRecord> records;
    std::string line;
    std::size_t line_number = 0;

    if (!std::getline(in, line)) {
        return records;  // empty input, empty stream
    }
    line_number++;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "channel,timestamp_ps") {
        parse_error("time-tag CSV line 1: expected header 'channel,timestamp_ps'");
    }

    while (std::getline(in, line)) {
        line_number++;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            parse_error("time-tag CSV line " + std::to_string(line_number) + ": missing comma");
        }
        int channel = -1;
        std::int64_t timestamp = 0;
        const char* begin = line.data();
        auto channel_result = std::from_chars(begin, begin + comma, channel);
        if (channel_result.ec != std::errc() || channel_result.ptr != begin + comma) {
            parse_error("time-tag CSV line " + std::to_string(line_number) + ": bad channel");
        }
        const char* ts_begin = begin + comma + 1;
        const char* ts_end = begin + line.size();
        auto ts_result = std::from_chars(ts_begin, ts_end, timestamp);
        if (ts_result.ec != std::errc() || ts_result.ptr != ts_end) {
            parse_error("time-tag CSV line " + std::to_string(line_number) + ": bad timestamp");
        }
        if (channel < 0 || channel > 255) {
            parse_error("time-tag CSV line " + std::to_string(line_number) +
                        ": channel out of range");
        }
        records.push_back({static_cast<std::uint8_t>(channel), timestamp});
    }
    return records;
}

std::vector<TimeTagRecord> parse_binary_stream(std::istream& in) {
    char header[5];
    in.read(header, 5);
    if (in.gcount() != 5 || std::memcmp(header, kBinaryMagic, 4) != 0) {
        parse_error("time-tag binary: missing TTG1 magic at offset 0");
    }
    if (static_cast<std::uint8_t>(header[4]) != kBinaryVersion) {
        parse_error("time-tag binary: unsupported version at offset 4");
    }

    std::vector<TimeTagRecord> records;
    std::vector<char> buffer(9 * 65536);
    std::uint64_t offset = 5;
    std::size_t leftover = 0;
    for (;;) {
        in.read(buffer.data() + leftover, static_cast<std::streamsize>(buffer.size() - leftover));
        const std::size_t available = leftover + static_cast<std::size_t>(in.gcount());
        if (available == 0) {
            break;
        }
        const std::size_t frames = available / 9;
        for (std::size_t f = 0; f < frames; f++) {
            const char* frame = buffer.data() + f * 9;
            std::uint64_t ts = 0;
            for (int i = 0; i < 8; i++) {
                ts |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(frame[1 + i]))
                      << (8 * i);
            }
            records.push_back(
                {static_cast<std::uint8_t>(frame[0]), static_cast<std::int64_t>(ts)});
        }
        leftover = available - frames * 9;
        if (leftover > 0) {
            std::memmove(buffer.data(), buffer.data() + frames * 9, leftover);
        }
        offset += frames * 9;
        if (in.eof()) {
            if (leftover != 0) {
                parse_error("time-tag binary: truncated frame at offset " +
                            std::to_string(offset));
            }
            break;
        }
    }
    if (leftover != 0) {
        parse_error("time-tag binary: truncated frame at offset " + std::to_string(offset));
    }
    return records;
}

std::vector<TimeTagRecord> parse_stream_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open time-tag file: " + path);
    }
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, kBinaryMagic, 4) == 0) {
        return parse_binary_stream(in);
    }
    return parse_csv_stream(in);
}

std::string WindowSpec::label() const {
    std::ostringstream out;
    if (mode == Mode::Static) {
        out << "static:" << param;
    } else {
        out << "dynamic:" << param;
    }
    return out.str();
}

WindowSpec WindowSpec::parse(const std::string& text) {
    const std::size_t colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("window spec must be static:<ps> or dynamic:<multiple>");
    }
    const std::string mode = text.substr(0, colon);
    WindowSpec spec;
    if (mode == "static") {
        spec.mode = Mode::Static;
    } else if (mode == "dynamic") {
        spec.mode = Mode::Dynamic;
    } else {
        throw std::invalid_argument("unknown window mode '" + mode + "'");
    }
    try {
        spec.param = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("bad window parameter in '" + text + "'");
    }
    if (spec.param <= 0.0) {
        throw std::invalid_argument("window parameter must be positive");
    }
    return spec;
}

double estimate_stream_offset(const std::vector<TimeTagRecord>& records,
                              const StreamGeometry& geometry) {
    geometry.validate();
    double sum_sin = 0.0;
    double sum_cos = 0.0;
    for (const auto& record : records) {
        if (record.channel >= geometry.arm_of_channel.size() ||
            geometry.arm_of_channel[record.channel] < 0) {
            continue;
        }
        const double angle =
            kTwoPi * static_cast<double>(record.timestamp_ps) / geometry.tau_ps;
        sum_sin += std::sin(angle);
        sum_cos += std::cos(angle);
    }
    if (sum_sin == 0.0 && sum_cos == 0.0) {
        return 0.0;
    }
    return std::atan2(sum_sin, sum_cos) / kTwoPi * geometry.tau_ps;
}

std::vector<GaussianFit> fit_bins(const std::vector<TimeTagRecord>& records,
                                  const StreamGeometry& geometry) {
    geometry.validate();
    const int bins = geometry.bins_per_arm;
    const int arms = std::max(2, geometry.arm_count());
    std::vector<std::vector<double>> samples(static_cast<std::size_t>(arms) * bins);

    for (const auto& record : records) {
        const auto event = fold_event(record, geometry);
        if (!event.valid) {
            continue;
        }
        int slot = static_cast<int>(std::lround(event.position_ps / geometry.tau_ps));
        slot = std::clamp(slot, 0, bins - 1);
        samples[static_cast<std::size_t>(event.arm) * bins + slot].push_back(
            event.position_ps - slot * geometry.tau_ps);
    }

    std::vector<GaussianFit> fits(samples.size());
    for (std::size_t g = 0; g < samples.size(); g++) {
        auto& sample = samples[g];
        GaussianFit& fit = fits[g];
        fit.events = sample.size();
        const double nominal_center = static_cast<double>(g % bins) * geometry.tau_ps;
        if (sample.size() < kMinFitEvents) {
            fit.flagged = true;
            fit.mean_ps = nominal_center;
            continue;
        }

        // Robust initialization: median and scaled MAD ignore the uniform
        // background tail.
        std::nth_element(sample.begin(), sample.begin() + sample.size() / 2, sample.end());
        const double median = sample[sample.size() / 2];
        std::vector<double> deviations(sample.size());
        for (std::size_t i = 0; i < sample.size(); i++) {
            deviations[i] = std::abs(sample[i] - median);
        }
        std::nth_element(deviations.begin(), deviations.begin() + deviations.size() / 2,
                         deviations.end());
        const double sigma0 = 1.4826 * deviations[deviations.size() / 2];

        if (sigma0 < 0.5 * kSigmaFloorPs) {
            // Delta spike (or digitizer-limited): below the resolvable floor.
            fit.flagged = true;
            fit.mean_ps = nominal_center + median;
            fit.sigma_ps = sigma0;
            fit.amplitude = static_cast<double>(sample.size());
            continue;
        }

        const double span = std::min(std::max(6.0 * sigma0, 300.0), 0.5 * geometry.tau_ps);
        const int buckets = 128;
        const double width = 2.0 * span / buckets;
        std::vector<double> x(buckets);
        std::vector<double> y(buckets, 0.0);
        for (int i = 0; i < buckets; i++) {
            x[i] = median - span + (i + 0.5) * width;
        }
        for (double value : sample) {
            const int i = static_cast<int>((value - (median - span)) / width);
            if (i >= 0 && i < buckets) {
                y[i] += 1.0;
            }
        }

        double floor_level = std::min(y.front(), y.back());
        double amplitude = *std::max_element(y.begin(), y.end()) - floor_level;
        double mean = median;
        double sigma = sigma0;
        double residual = 0.0;
        const bool converged =
            fit_gaussian_lm(x, y, amplitude, mean, sigma, floor_level, residual);
        if (!converged) {
            // Solver stalled; keep the moment/median estimates.
            mean = median;
            sigma = sigma0;
        }
        fit.mean_ps = nominal_center + mean;
        fit.sigma_ps = sigma;
        fit.amplitude = amplitude;
        fit.background_floor = floor_level;
        fit.fit_residual = residual;
        fit.flagged = sigma < kSigmaFloorPs || sigma > kSigmaCeilPs;
    }
    return fits;
}

void BinWindowPlan::validate(const StreamGeometry& geometry) const {
    const int bins = geometry.bins_per_arm;
    if (windows.size() % bins != 0) {
        throw std::invalid_argument("window plan does not cover whole arms");
    }
    const int arms = static_cast<int>(windows.size()) / bins;
    for (int arm = 0; arm < arms; arm++) {
        for (int b = 0; b + 1 < bins; b++) {
            const auto& left = windows[static_cast<std::size_t>(arm) * bins + b];
            const auto& right = windows[static_cast<std::size_t>(arm) * bins + b + 1];
            if (left.half_width_ps <= 0.0 || right.half_width_ps <= 0.0) {
                throw std::invalid_argument("window widths must be positive");
            }
            if (left.center_ps + left.half_width_ps >= right.center_ps - right.half_width_ps) {
                throw std::invalid_argument("coincidence windows overlap within a trial");
            }
        }
    }
}

BinWindowPlan plan_windows(const std::vector<GaussianFit>& fits, const WindowSpec& spec,
                           const StreamGeometry& geometry) {
    geometry.validate();
    const int bins = geometry.bins_per_arm;
    if (fits.size() % bins != 0 || fits.empty()) {
        throw std::invalid_argument("fit list does not cover whole arms");
    }

    double sigma_fallback = 0.0;
    if (spec.mode == WindowSpec::Mode::Dynamic) {
        // Underpopulated bins never produce clicks, but they still need a
        // placeholder width; use the median sigma of the populated fits.
        std::vector<double> sigmas;
        for (const auto& fit : fits) {
            if (fit.events >= kMinFitEvents) {
                sigmas.push_back(fit.sigma_ps);
            }
        }
        if (sigmas.empty()) {
            throw std::invalid_argument(
                "dynamic windows requested but no bin has enough events to fit");
        }
        std::nth_element(sigmas.begin(), sigmas.begin() + sigmas.size() / 2, sigmas.end());
        sigma_fallback = sigmas[sigmas.size() / 2];
    }

    BinWindowPlan plan;
    plan.spec = spec;
    plan.windows.resize(fits.size());
    for (std::size_t g = 0; g < fits.size(); g++) {
        const auto& fit = fits[g];
        const double nominal_center = static_cast<double>(g % bins) * geometry.tau_ps;
        BinWindow& window = plan.windows[g];
        if (spec.mode == WindowSpec::Mode::Static) {
            window.center_ps = fit.events >= kMinFitEvents ? fit.mean_ps : nominal_center;
            window.half_width_ps = 0.5 * spec.param;
        } else {
            // Flagged-but-populated bins (for example jitter-free delta
            // spikes) keep their measured center and sigma; only
            // underpopulated bins fall back to the nominal grid. The 1 ps
            // floor is half the timestamp quantum, so exactly centered
            // events are always captured.
            window.center_ps = fit.events >= kMinFitEvents ? fit.mean_ps : nominal_center;
            const double sigma = fit.events >= kMinFitEvents ? fit.sigma_ps : sigma_fallback;
            window.half_width_ps = std::max(0.5 * spec.param * sigma, 1.0);
        }
    }
    plan.validate(geometry);
    return plan;
}

AccumulationResult accumulate(const std::vector<TimeTagRecord>& records,
                              const BinWindowPlan& plan, const StreamGeometry& geometry,
                              std::uint64_t total_trials) {
    geometry.validate();
    plan.validate(geometry);
    const int bins = geometry.bins_per_arm;
    const int arms = static_cast<int>(plan.windows.size()) / bins;
    if (arms < 2) {
        throw std::invalid_argument("accumulation expects two arms");
    }

    AccumulationResult result;
    result.total_events = records.size();

    // First pass: window membership, keeping raw trial indices. The stream
    // origin is arbitrary, so trial indices are normalized to the first
    // observed trial before any range check.
    struct Assignment {
        std::int64_t trial;
        std::uint16_t bin;
    };
    std::vector<Assignment> raw;
    raw.reserve(records.size());
    std::int64_t min_trial = std::numeric_limits<std::int64_t>::max();
    std::int64_t max_trial = std::numeric_limits<std::int64_t>::min();
    const int bin_bits = 12;
    for (const auto& record : records) {
        const auto event = fold_event(record, geometry);
        if (!event.valid) {
            result.discarded_events++;
            continue;
        }
        int slot = static_cast<int>(std::lround(event.position_ps / geometry.tau_ps));
        slot = std::clamp(slot, 0, bins - 1);
        const std::size_t g = static_cast<std::size_t>(event.arm) * bins + slot;
        const auto& window = plan.windows[g];
        if (std::abs(event.position_ps - window.center_ps) > window.half_width_ps) {
            result.discarded_events++;
            continue;
        }
        min_trial = std::min(min_trial, event.trial);
        max_trial = std::max(max_trial, event.trial);
        raw.push_back({event.trial, static_cast<std::uint16_t>(g)});
    }

    std::vector<std::uint64_t> assignments;
    assignments.reserve(raw.size());
    for (const auto& assignment : raw) {
        const std::uint64_t trial = static_cast<std::uint64_t>(assignment.trial - min_trial);
        if (total_trials > 0 && trial >= total_trials) {
            result.discarded_events++;
            continue;
        }
        result.window_events++;
        assignments.push_back((trial << bin_bits) | assignment.bin);
    }
    raw.clear();
    raw.shrink_to_fit();

    if (total_trials == 0 && max_trial >= min_trial) {
        total_trials = static_cast<std::uint64_t>(max_trial - min_trial) + 1;
    }

    std::sort(assignments.begin(), assignments.end());
    assignments.erase(std::unique(assignments.begin(), assignments.end()), assignments.end());

    result.joint.detector_count_a = bins;
    result.joint.detector_count_b = bins;
    result.joint.counts.assign(static_cast<std::size_t>(bins + 1) * (bins + 1), 0);
    result.joint.trials = total_trials;
    result.singles.bins_per_arm = bins;
    result.singles.counts.assign(static_cast<std::size_t>(2) * bins, 0);

    std::uint64_t trials_seen = 0;
    std::size_t i = 0;
    const std::uint64_t bin_mask = (1ULL << bin_bits) - 1;
    while (i < assignments.size()) {
        const std::uint64_t trial = assignments[i] >> bin_bits;
        int clicks_a = 0;
        int clicks_b = 0;
        while (i < assignments.size() && (assignments[i] >> bin_bits) == trial) {
            const auto g = static_cast<std::size_t>(assignments[i] & bin_mask);
            if (g < static_cast<std::size_t>(2) * bins) {
                result.singles.counts[g]++;
            }
            if (g < static_cast<std::size_t>(bins)) {
                clicks_a++;
            } else {
                clicks_b++;
            }
            i++;
        }
        result.joint.at(clicks_a, clicks_b)++;
        trials_seen++;
    }
    result.joint.at(0, 0) += total_trials - trials_seen;
    return result;
}

}  // namespace qbench
