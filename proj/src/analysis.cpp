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

#include "qbench/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qbench {

namespace {

constexpr std::uint64_t kLowStatisticsTrials = 100;

// Per-arm relative 2-sigma spread of the singles counts.
double arm_relative_spread(const std::uint64_t* counts, int bins) {
    double mean = 0.0;
    for (int i = 0; i < bins; i++) {
        mean += static_cast<double>(counts[i]);
    }
    mean /= bins;
    if (mean <= 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double ss = 0.0;
    for (int i = 0; i < bins; i++) {
        const double dev = static_cast<double>(counts[i]) - mean;
        ss += dev * dev;
    }
    const double stddev = std::sqrt(ss / std::max(1, bins - 1));
    return 2.0 * stddev / mean;
}

}  // namespace

Eigen::MatrixXd moment_covariance(const ClickHistogram& hist, int max_order) {
    hist.validate();
    if (hist.trials == 0) {
        throw std::invalid_argument("cannot build a covariance from zero trials");
    }
    if (max_order < 1 || max_order > hist.detector_count) {
        throw std::invalid_argument("max_order must be in [1, detector_count]");
    }
    const auto& weights = click_weight_table(hist.detector_count);
    const auto c = hist.probabilities();

    Eigen::VectorXd g = Eigen::VectorXd::Zero(max_order + 1);
    g[0] = 1.0;
    for (int m = 1; m <= max_order; m++) {
        for (int n = m; n <= hist.detector_count; n++) {
            g[m] += weights[m][n] * c[n];
        }
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(max_order + 1, max_order + 1);
    const double inv_trials = 1.0 / static_cast<double>(hist.trials);
    for (int m = 0; m <= max_order; m++) {
        for (int mp = m; mp <= max_order; mp++) {
            double cross = 0.0;
            for (int n = std::max(m, mp); n <= hist.detector_count; n++) {
                cross += weights[m][n] * weights[mp][n] * c[n];
            }
            const double value = inv_trials * (cross - g[m] * g[mp]);
            cov(m, mp) = value;
            cov(mp, m) = value;
        }
    }
    // Row and column 0 belong to the constant G^(0) = 1 and are exactly zero.
    return cov;
}

SymmetricMomentVector estimate_moments(const ClickHistogram& hist, int max_order) {
    auto moments = moments_from_histogram(hist, max_order);
    moments.covariance = moment_covariance(hist, max_order);
    return moments;
}

SystematicErrorEstimate systematic_error(const SinglesProfile& singles) {
    if (singles.bins_per_arm < 2 ||
        singles.counts.size() != static_cast<std::size_t>(2 * singles.bins_per_arm)) {
        throw std::invalid_argument("singles profile needs two arms with at least 2 bins each");
    }
    SystematicErrorEstimate estimate;
    estimate.arm_a = arm_relative_spread(singles.counts.data(), singles.bins_per_arm);
    estimate.arm_b =
        arm_relative_spread(singles.counts.data() + singles.bins_per_arm, singles.bins_per_arm);
    if (!std::isfinite(estimate.arm_a) || !std::isfinite(estimate.arm_b)) {
        throw std::invalid_argument("singles profile has an arm with no counts");
    }
    estimate.pooled =
        std::sqrt(0.5 * (estimate.arm_a * estimate.arm_a + estimate.arm_b * estimate.arm_b));
    return estimate;
}

WitnessErrors propagate_witness_error(const ReducedWitnessMatrix& matrix,
                                      const Eigen::VectorXd& eigvec, const ErrorBudget& budget) {
    const int kappa = matrix.mult.kappa();
    if (eigvec.size() != kappa + 1) {
        throw std::invalid_argument("eigenvector dimension does not match the witness matrix");
    }
    const int gradient_orders = 2 * kappa;
    if (budget.moment_covariance.rows() < gradient_orders + 1 ||
        budget.moment_covariance.cols() < gradient_orders + 1) {
        throw std::invalid_argument("moment covariance does not cover the witness orders");
    }

    std::vector<double> sqrt_d(kappa + 1);
    for (int j = 0; j <= kappa; j++) {
        sqrt_d[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult.d[j])));
    }

    // dlambda/dG^(m) with the eigenvector held fixed.
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(gradient_orders + 1);
    for (int j = 0; j <= kappa; j++) {
        for (int l = 0; l <= kappa; l++) {
            gradient[j + l] += eigvec[j] * eigvec[l] * sqrt_d[j] * sqrt_d[l];
        }
    }

    WitnessErrors errors;
    const auto cov = budget.moment_covariance.topLeftCorner(gradient_orders + 1, gradient_orders + 1);
    errors.random_error = std::sqrt(std::max(0.0, gradient.dot(cov * gradient)));

    double systematic = 0.0;
    for (int m = 0; m <= gradient_orders; m++) {
        systematic += std::abs(gradient[m]) * std::abs(matrix.source_moments.values[m]);
    }
    errors.systematic_error = budget.systematic_relative * systematic;
    errors.combined_error = std::hypot(errors.random_error, errors.systematic_error);
    return errors;
}

double significance(double min_eigenvalue, double combined_error) {
    const double negativity = std::max(0.0, -min_eigenvalue);
    if (combined_error <= 0.0) {
        if (negativity == 0.0) {
            return 0.0;
        }
        return std::numeric_limits<double>::infinity();  // reported as unbounded, never divided
    }
    return negativity / combined_error;
}

WitnessResult evaluate_witness(const ClickHistogram& hist, int mode_count, int detector_count,
                               double systematic_relative) {
    const int required_order = mode_count * detector_count;
    if (required_order > hist.detector_count) {
        throw std::invalid_argument("witness order exceeds the histogram's detector count");
    }
    const auto moments = estimate_moments(hist, required_order);
    const auto matrix = build_reduced_matrix(moments, mode_count, detector_count);
    const auto pair = min_eigenpair(matrix);

    ErrorBudget budget;
    budget.moment_covariance = moments.covariance;
    budget.systematic_relative = systematic_relative;
    const auto errors = propagate_witness_error(matrix, pair.vector, budget);

    WitnessResult result;
    result.min_eigenvalue = pair.value;
    result.eigenvector = pair.vector;
    result.random_error = errors.random_error;
    result.systematic_error = errors.systematic_error;
    result.combined_error = errors.combined_error;
    result.significance = significance(pair.value, errors.combined_error);
    result.significance_unbounded =
        result.combined_error <= 0.0 && result.min_eigenvalue < 0.0;
    result.trials = hist.trials;
    return result;
}

WitnessResult evaluate_joint_witness(const JointClickHistogram& hist, int mode_count_a,
                                     int mode_count_b, int detector_count_a, int detector_count_b,
                                     double systematic_relative) {
    hist.validate();
    if (hist.trials == 0) {
        throw std::invalid_argument("cannot evaluate a witness from zero trials");
    }
    const int order_a = mode_count_a * detector_count_a;
    const int order_b = mode_count_b * detector_count_b;
    if (order_a > hist.detector_count_a || order_b > hist.detector_count_b) {
        throw std::invalid_argument("witness orders exceed the histogram's detector counts");
    }
    const auto moments = joint_moments_from_histogram(hist, order_a, order_b);
    const auto matrix = build_joint_reduced_matrix(moments, mode_count_a, mode_count_b,
                                                   detector_count_a, detector_count_b);
    const auto pair = min_eigenpair(matrix.entries);

    const int kappa_a = matrix.mult_a.kappa();
    const int kappa_b = matrix.mult_b.kappa();
    std::vector<double> sqrt_da(kappa_a + 1);
    std::vector<double> sqrt_db(kappa_b + 1);
    for (int j = 0; j <= kappa_a; j++) {
        sqrt_da[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult_a.d[j])));
    }
    for (int j = 0; j <= kappa_b; j++) {
        sqrt_db[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult_b.d[j])));
    }

    // Eigenvalue gradient with respect to the joint moments G^(a, b).
    Eigen::MatrixXd gradient = Eigen::MatrixXd::Zero(order_a + 1, order_b + 1);
    auto flat = [&](int j_a, int j_b) { return j_a * (kappa_b + 1) + j_b; };
    for (int j_a = 0; j_a <= kappa_a; j_a++) {
        for (int j_b = 0; j_b <= kappa_b; j_b++) {
            const double vj = pair.vector[flat(j_a, j_b)];
            if (vj == 0.0) {
                continue;
            }
            for (int l_a = 0; l_a <= kappa_a; l_a++) {
                for (int l_b = 0; l_b <= kappa_b; l_b++) {
                    gradient(j_a + l_a, j_b + l_b) += vj * pair.vector[flat(l_a, l_b)] *
                                                      sqrt_da[j_a] * sqrt_da[l_a] * sqrt_db[j_b] *
                                                      sqrt_db[l_b];
                }
            }
        }
    }

    // Random error: the multinomial quadratic form is accumulated cell by
    // cell; the full joint covariance is never materialized.
    const auto& weights_a = click_weight_table(hist.detector_count_a);
    const auto& weights_b = click_weight_table(hist.detector_count_b);
    Eigen::MatrixXd partial(order_a + 1, hist.detector_count_b + 1);  // gradient x w_B
    for (int a = 0; a <= order_a; a++) {
        for (int n_b = 0; n_b <= hist.detector_count_b; n_b++) {
            double sum = 0.0;
            for (int b = 0; b <= std::min(order_b, n_b); b++) {
                sum += gradient(a, b) * weights_b[b][n_b];
            }
            partial(a, n_b) = sum;
        }
    }
    double quad = 0.0;
    double mean_term = 0.0;
    const double inv_trials = 1.0 / static_cast<double>(hist.trials);
    for (int n_a = 0; n_a <= hist.detector_count_a; n_a++) {
        for (int n_b = 0; n_b <= hist.detector_count_b; n_b++) {
            const std::uint64_t count = hist.at(n_a, n_b);
            if (count == 0) {
                continue;
            }
            double s = 0.0;
            for (int a = 0; a <= std::min(order_a, n_a); a++) {
                s += weights_a[a][n_a] * partial(a, n_b);
            }
            const double c = static_cast<double>(count) * inv_trials;
            quad += s * s * c;
            mean_term += s * c;
        }
    }
    const double random_var = inv_trials * std::max(0.0, quad - mean_term * mean_term);

    double systematic = 0.0;
    for (int a = 0; a <= order_a; a++) {
        for (int b = 0; b <= order_b; b++) {
            systematic += std::abs(gradient(a, b)) * std::abs(moments.values(a, b));
        }
    }

    WitnessResult result;
    result.min_eigenvalue = pair.value;
    result.eigenvector = pair.vector;
    result.random_error = std::sqrt(random_var);
    result.systematic_error = systematic_relative * systematic;
    result.combined_error = std::hypot(result.random_error, result.systematic_error);
    result.significance = significance(pair.value, result.combined_error);
    result.significance_unbounded = result.combined_error <= 0.0 && result.min_eigenvalue < 0.0;
    result.trials = hist.trials;
    return result;
}

HeraldedSlice herald_condition(const JointClickHistogram& joint, int herald_arm,
                               int herald_clicks) {
    joint.validate();
    if (herald_arm != 0 && herald_arm != 1) {
        throw std::invalid_argument("herald_arm must be 0 (A) or 1 (B)");
    }
    const int herald_max = herald_arm == 0 ? joint.detector_count_a : joint.detector_count_b;
    if (herald_clicks < 0 || herald_clicks > herald_max) {
        throw std::invalid_argument("herald click number out of range");
    }

    HeraldedSlice slice;
    slice.herald_arm = herald_arm;
    slice.herald_clicks = herald_clicks;
    slice.conditional.detector_count =
        herald_arm == 0 ? joint.detector_count_b : joint.detector_count_a;
    slice.conditional.counts.assign(slice.conditional.detector_count + 1, 0);

    std::uint64_t herald_trials = 0;
    for (int other = 0; other <= slice.conditional.detector_count; other++) {
        const std::uint64_t count =
            herald_arm == 0 ? joint.at(herald_clicks, other) : joint.at(other, herald_clicks);
        slice.conditional.counts[other] = count;
        herald_trials += count;
    }
    if (herald_trials == 0) {
        throw std::invalid_argument("empty herald slice");
    }
    slice.conditional.trials = herald_trials;
    slice.low_statistics = herald_trials < kLowStatisticsTrials;
    return slice;
}

}  // namespace qbench
