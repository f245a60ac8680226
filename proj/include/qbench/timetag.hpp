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

#ifndef QBENCH_TIMETAG_H
#define QBENCH_TIMETAG_H

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qbench/click_counting.hpp"

namespace qbench {

// One detector event. Channels encode (arm, detector); timestamps are
// integer picoseconds from an arbitrary stream origin.
struct TimeTagRecord {
    std::uint8_t channel = 0;
    std::int64_t timestamp_ps = 0;
};

// How a stream maps onto the experiment: trial period, bin spacing tau,
// bins per arm, and which arm each channel belongs to (-1 = ignore).
// Bin b of an arm sits at in-trial position b * tau + offset.
struct StreamGeometry {
    double trial_period_ps = 2.0e7;  // 50 kHz repetition
    double tau_ps = 1.0e5;           // 100 ns bin separation
    int bins_per_arm = 128;
    std::vector<int> arm_of_channel = {0, 0, 1, 1};
    double offset_ps = 0.0;

    void validate() const;
    int arm_count() const;
};

// --- Stream formats -------------------------------------------------------
//
// CSV (canonical): header line "channel,timestamp_ps", then one ASCII
// decimal record per line.
//
// Binary: magic "TTG1", one version byte (1), then 9-byte little-endian
// frames of u8 channel + u64 timestamp in picoseconds.

enum class TagFormat { Csv, Binary };

class TagWriter {
  public:
    virtual ~TagWriter() = default;
    virtual void write(const TimeTagRecord& record) = 0;
};

class CsvTagWriter : public TagWriter {
  public:
    explicit CsvTagWriter(std::ostream& out);
    void write(const TimeTagRecord& record) override;

  private:
    std::ostream& out_;
};

class BinaryTagWriter : public TagWriter {
  public:
    explicit BinaryTagWriter(std::ostream& out);
    void write(const TimeTagRecord& record) override;

  private:
    std::ostream& out_;
};

// Parsers throw std::runtime_error naming the line (CSV) or byte offset
// (binary) of the first malformed record.
std::vector<TimeTagRecord> parse_csv_stream(std::istream& in);
std::vector<TimeTagRecord> parse_binary_stream(std::istream& in);

// Dispatches on the binary magic, else CSV.
std::vector<TimeTagRecord> parse_stream_file(const std::string& path);

// --- Pulse fitting and window planning -------------------------------------

struct GaussianFit {
    double mean_ps = 0.0;  // absolute in-trial position
    double sigma_ps = 0.0;
    double amplitude = 0.0;
    double background_floor = 0.0;
    double fit_residual = 0.0;  // rms residual over histogram buckets
    std::uint64_t events = 0;
    bool flagged = false;  // underpopulated or sigma outside [10 ps, 10 ns]
};

// Least-squares Gaussian (mean, sigma, amplitude, constant floor) on the
// folded arrival-time histogram of every (arm, bin). Bins with fewer than 50
// events are flagged, not fitted.
std::vector<GaussianFit> fit_bins(const std::vector<TimeTagRecord>& records,
                                  const StreamGeometry& geometry);

struct WindowSpec {
    enum class Mode { Static, Dynamic };
    Mode mode = Mode::Dynamic;
    double param = 2.0;  // full width in ps (static) or multiple of sigma (dynamic)

    std::string label() const;
    // Accepts "static:<ps>" or "dynamic:<multiple>".
    static WindowSpec parse(const std::string& text);
};

struct BinWindow {
    double center_ps = 0.0;
    double half_width_ps = 0.0;
};

struct BinWindowPlan {
    WindowSpec spec;
    std::vector<BinWindow> windows;  // global bin index = arm * bins_per_arm + b

    void validate(const StreamGeometry& geometry) const;  // windows must not overlap
};

// Static mode centers every window of full width param on the fitted mean
// (nominal bin position when a fit is flagged). Dynamic mode uses full width
// param * sigma_bin and requires a valid fit for every populated bin.
BinWindowPlan plan_windows(const std::vector<GaussianFit>& fits, const WindowSpec& spec,
                           const StreamGeometry& geometry);

// Estimate a global stream offset (circular mean of folded positions against
// the nominal bin grid); subtracting it makes bin centers sit on multiples
// of tau regardless of the stream's absolute time origin.
double estimate_stream_offset(const std::vector<TimeTagRecord>& records,
                              const StreamGeometry& geometry);

struct AccumulationResult {
    JointClickHistogram joint;
    SinglesProfile singles;
    std::uint64_t window_events = 0;     // events inside some window (pre-dedup)
    std::uint64_t discarded_events = 0;  // outside every window, or bad channel/trial
    std::uint64_t total_events = 0;
};

// Per trial, a bin clicks when at least one event lands in its window;
// multiple events in one window count once. total_trials fixes the (0,0)
// histogram cell; pass 0 to infer max(trial index)+1 from the stream.
AccumulationResult accumulate(const std::vector<TimeTagRecord>& records,
                              const BinWindowPlan& plan, const StreamGeometry& geometry,
                              std::uint64_t total_trials);

}  // namespace qbench

#endif
