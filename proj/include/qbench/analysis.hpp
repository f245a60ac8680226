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

#ifndef QBENCH_ANALYSIS_H
#define QBENCH_ANALYSIS_H

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qbench/click_counting.hpp"
#include "qbench/moments_witness.hpp"

namespace qbench {

// Multinomial (delta-method) covariance of the moment estimates:
// Cov(G_m, G_m') = (1/C) [ sum_n w_m(n) w_m'(n) c(n) - G_m G_m' ].
Eigen::MatrixXd moment_covariance(const ClickHistogram& hist, int max_order);

// Moments with the covariance block filled in.
SymmetricMomentVector estimate_moments(const ClickHistogram& hist, int max_order);

// Relative systematic error from the nonuniformity of per-bin single counts:
// two standard deviations over the bins, scaled to the mean (a 95% band).
// Reported per arm; the pooled value is the rms of the per-arm estimates so
// that a deliberate transmission difference between arms does not masquerade
// as bin nonuniformity.
struct SystematicErrorEstimate {
    double arm_a = 0.0;
    double arm_b = 0.0;
    double pooled = 0.0;
};

SystematicErrorEstimate systematic_error(const SinglesProfile& singles);

struct ErrorBudget {
    Eigen::MatrixXd moment_covariance;  // (max_order+1)^2
    double systematic_relative = 0.0;   // fully correlated scale uncertainty
};

struct WitnessErrors {
    double random_error = 0.0;
    double systematic_error = 0.0;
    double combined_error = 0.0;
};

// First-order eigenvalue perturbation with the eigenvector held fixed:
// dlambda/dG^(m) = sum_{j+l=m} v_j v_l sqrt(d_j d_l).
WitnessErrors propagate_witness_error(const ReducedWitnessMatrix& matrix,
                                      const Eigen::VectorXd& eigvec, const ErrorBudget& budget);

// Sigma = max(0, -lambda) / combined_error. Never divides by zero: a negative
// eigenvalue with zero error is flagged unbounded by the caller.
double significance(double min_eigenvalue, double combined_error);

// Full single-group pipeline: moments, covariance, reduced matrix, minimal
// eigenpair, error propagation, significance.
WitnessResult evaluate_witness(const ClickHistogram& hist, int mode_count, int detector_count,
                               double systematic_relative);

// Joint two-group witness with errors propagated directly from the joint
// histogram (the joint moment covariance is never materialized; only the
// quadratic form with the eigenvalue gradient is accumulated).
WitnessResult evaluate_joint_witness(const JointClickHistogram& hist, int mode_count_a,
                                     int mode_count_b, int detector_count_a, int detector_count_b,
                                     double systematic_relative);

// Conditional click statistics of the partner arm given a click number on the
// heralding arm.
struct HeraldedSlice {
    int herald_arm = 0;  // 0 = condition on A, histogram over B; 1 = the reverse
    int herald_clicks = 0;
    ClickHistogram conditional;
    bool low_statistics = false;  // fewer than 100 heralding trials
};

HeraldedSlice herald_condition(const JointClickHistogram& joint, int herald_arm, int herald_clicks);

}  // namespace qbench

#endif
