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

#ifndef QBENCH_CLICK_COUNTING_H
#define QBENCH_CLICK_COUNTING_H

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace qbench {

// Empirical counts of joint click numbers 0..D over recorded trials.
struct ClickHistogram {
    int detector_count = 0;             // D
    std::vector<std::uint64_t> counts;  // length D+1, index = click number
    std::uint64_t trials = 0;

    void validate() const;  // throws unless sum(counts) == trials and sizes match
    std::vector<double> probabilities() const;
};

// Joint signal/idler click counts C(n_A, n_B).
struct JointClickHistogram {
    int detector_count_a = 0;
    int detector_count_b = 0;
    std::vector<std::uint64_t> counts;  // (D_A+1) x (D_B+1), row-major in n_A
    std::uint64_t trials = 0;

    std::uint64_t& at(int n_a, int n_b);
    std::uint64_t at(int n_a, int n_b) const;
    void validate() const;
    ClickHistogram marginal(int arm) const;  // arm 0 = A, 1 = B
};

// Per-detection-bin single counts, signal bins first then idler bins.
struct SinglesProfile {
    int bins_per_arm = 0;
    std::vector<std::uint64_t> counts;  // length 2 * bins_per_arm
};

// Estimated symmetric moments G^(0)..G^(max_order) with their covariance.
// The covariance block is filled by the analysis layer; it is zero right
// after estimation.
struct SymmetricMomentVector {
    int max_order = 0;
    std::vector<double> values;
    Eigen::MatrixXd covariance;
    std::uint64_t trials = 0;
};

// Two-index moment table G^(m_A, m_B) for the joint signal/idler witness.
struct JointMomentTable {
    int max_order_a = 0;
    int max_order_b = 0;
    Eigen::MatrixXd values;  // (max_a+1) x (max_b+1)
    std::uint64_t trials = 0;
};

// Reference photon-number models for the D-fold multiplexed on-off POVM.
struct SourceModel {
    enum class Kind { Fock, Coherent, Thermal };

    Kind kind = Kind::Fock;
    double photon_number = 0.0;         // fock: N; coherent: |alpha|^2; thermal: mean photons
    double schmidt_modes = 1.0;         // thermal only
    double efficiency = 1.0;            // per-bin eta
    double background_click_prob = 0.0; // independent per-bin click probability

    static SourceModel fock(int n, double eta = 1.0, double p_bg = 0.0);
    static SourceModel coherent(double mean_photons, double eta = 1.0, double p_bg = 0.0);
    static SourceModel thermal(double mean_photons, double modes, double eta = 1.0,
                               double p_bg = 0.0);
    void validate() const;
};

// Exact click distribution c(0..D) of the model under uniform D-fold
// multiplexing, by inclusion-exclusion over silent-detector subsets. The
// alternating sums are evaluated in 100-digit floats; at D = 128 the raw
// terms reach ~1e37 and double arithmetic would lose everything.
std::vector<double> exact_click_distribution(const SourceModel& model, int detector_count);

// Unbiased moment estimator: G^(m) = sum_n binom(n,m)/binom(D,m) c(n).
SymmetricMomentVector moments_from_histogram(const ClickHistogram& hist, int max_order);

// Same estimator applied per axis of a joint histogram.
JointMomentTable joint_moments_from_histogram(const JointClickHistogram& hist, int max_order_a,
                                              int max_order_b);

// Multinomial sampling from an exact distribution; test and calibration use.
ClickHistogram sample_histogram(const std::vector<double>& distribution, std::uint64_t trials,
                                std::uint64_t seed);

// Cached estimator weights w[m][n] = binom(n,m)/binom(D,m) for one detector
// count, computed once in exact integer arithmetic. Thread-safe.
const std::vector<std::vector<double>>& click_weight_table(int detector_count);

}  // namespace qbench

#endif
