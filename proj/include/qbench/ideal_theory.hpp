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

#ifndef QBENCH_IDEAL_THEORY_H
#define QBENCH_IDEAL_THEORY_H

#include <vector>

namespace qbench {

// N photons split uniformly over M output modes, loss- and noise-free.
// The reference theory every detection model in this project is checked
// against.
struct FockSplitConfig {
    int photon_number = 0;  // N
    int mode_count = 1;     // M

    void validate() const;
};

using OccupationPattern = std::vector<int>;  // (n_1, ..., n_M)
using MultiIndex = std::vector<int>;         // (m_1, ..., m_M)

// Probability of observing a specific occupation pattern in the split state:
// N! / (M^N n_1! ... n_M!). Throws if the pattern length or total is wrong.
double output_probability(const FockSplitConfig& config, const OccupationPattern& pattern);

// Normally ordered photon-number correlation of the split state:
// N! / (M^{sum m} (N - sum m)!) for sum m <= N, zero otherwise.
double ideal_correlation(const FockSplitConfig& config, const MultiIndex& idx);

// Independent route: enumerate the full joint photon-number distribution and
// sum factorial moments. Exponential in N, guarded to N <= 12, M <= 8; test
// oracle only.
double ideal_correlation_oracle(const FockSplitConfig& config, const MultiIndex& idx);

// All occupation patterns with the given total, lexicographic order.
std::vector<OccupationPattern> enumerate_patterns(int total, int modes);

}  // namespace qbench

#endif
