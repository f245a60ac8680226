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
#include <numeric>

#include "doctest.h"
#include "qbench/rng.hpp"

using namespace qbench;

namespace {

ClickHistogram histogram_from_counts(std::vector<std::uint64_t> counts) {
    ClickHistogram hist;
    hist.detector_count = static_cast<int>(counts.size()) - 1;
    hist.trials = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    hist.counts = std::move(counts);
    return hist;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("point-mass histograms have zero covariance") {
    const auto hist = histogram_from_counts({0, 10000, 0});
    const auto cov = moment_covariance(hist, 2);
    CHECK(cov.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("hand-evaluated variance of the first moment") {
    // D = 2, c = (1/4, 1/2, 1/4), C = 1e4: Var(G1) = (0.375 - 0.25) / 1e4.
    const auto hist = histogram_from_counts({2500, 5000, 2500});
    const auto cov = moment_covariance(hist, 2);
    CHECK(cov(1, 1) == doctest::Approx(1.25e-5).epsilon(1e-10));
    CHECK(cov(0, 0) == 0.0);
}

TEST_CASE("delta-method covariance matches the sampling covariance") {
    const auto dist = exact_click_distribution(SourceModel::thermal(1.0, 2.0, 0.8, 0.01), 4);
    const std::uint64_t trials = 10000;
    const int max_order = 3;

    // Predicted covariance from the exact distribution.
    std::vector<std::uint64_t> scaled(dist.size());
    ClickHistogram reference;
    // Use a sampled histogram only to size the prediction; the covariance
    // formula is evaluated on near-exact counts.
    for (std::size_t n = 0; n < dist.size(); n++) {
        scaled[n] = static_cast<std::uint64_t>(std::llround(dist[n] * 1e9));
    }
    reference = histogram_from_counts(std::move(scaled));
    Eigen::MatrixXd predicted = moment_covariance(reference, max_order);
    predicted *= static_cast<double>(reference.trials) / static_cast<double>(trials);

    // Empirical covariance of the estimator over many independent samples.
    const int replicas = 4000;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(max_order + 1, 1);
    std::vector<Eigen::VectorXd> estimates;
    estimates.reserve(replicas);
    for (int r = 0; r < replicas; r++) {
        const auto sample = sample_histogram(dist, trials, 1000 + r);
        const auto moments = moments_from_histogram(sample, max_order);
        Eigen::VectorXd v(max_order + 1);
        for (int m = 0; m <= max_order; m++) {
            v[m] = moments.values[m];
        }
        estimates.push_back(v);
        mean += v;
    }
    mean /= replicas;
    Eigen::MatrixXd empirical = Eigen::MatrixXd::Zero(max_order + 1, max_order + 1);
    for (const auto& v : estimates) {
        const Eigen::VectorXd d = v - mean;
        empirical += d * d.transpose();
    }
    empirical /= replicas - 1;

    // Compare the nontrivial block (order 0 is constant).
    const auto p = predicted.bottomRightCorner(max_order, max_order);
    const auto e = empirical.bottomRightCorner(max_order, max_order);
    const double relative = (p - e).norm() / p.norm();
    CHECK(relative <= 0.10);
}

TEST_CASE("moment estimates stay within five sigma of the model") {
    const auto dist = exact_click_distribution(SourceModel::thermal(1.5, 3.0, 0.85, 0.002), 8);
    const auto& weights = click_weight_table(8);
    std::vector<double> truth(5, 0.0);
    truth[0] = 1.0;
    for (int m = 1; m <= 4; m++) {
        for (int n = m; n <= 8; n++) {
            truth[m] += weights[m][n] * dist[n];
        }
    }

    const std::uint64_t trials = 20000;
    int failures = 0;
    const int seeds = 200;
    for (int seed = 0; seed < seeds; seed++) {
        const auto sample = sample_histogram(dist, trials, 5000 + seed);
        const auto moments = estimate_moments(sample, 4);
        bool ok = true;
        for (int m = 1; m <= 4; m++) {
            const double sigma = std::sqrt(moments.covariance(m, m));
            if (std::abs(moments.values[m] - truth[m]) > 5.0 * sigma + 1e-12) {
                ok = false;
            }
        }
        failures += ok ? 0 : 1;
    }
    CHECK(failures <= seeds / 100);  // >= 99% of seeds within five sigma
}

TEST_CASE("systematic error of perfectly uniform singles is zero") {
    SinglesProfile singles;
    singles.bins_per_arm = 8;
    singles.counts.assign(16, 1000);
    const auto estimate = systematic_error(singles);
    CHECK(estimate.arm_a == 0.0);
    CHECK(estimate.arm_b == 0.0);
    CHECK(estimate.pooled == 0.0);
}

TEST_CASE("systematic error on shot-noise-limited uniform singles is 2/sqrt(mean)") {
    Rng rng(7);
    SinglesProfile singles;
    singles.bins_per_arm = 128;
    singles.counts.resize(256);
    const double mean = 10000.0;
    for (auto& count : singles.counts) {
        count = rng.poisson(mean);
    }
    const auto estimate = systematic_error(singles);
    const double expected = 2.0 / std::sqrt(mean);
    CHECK(estimate.pooled == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("systematic error rejects empty arms") {
    SinglesProfile singles;
    singles.bins_per_arm = 4;
    singles.counts.assign(8, 0);
    CHECK_THROWS_AS(systematic_error(singles), std::invalid_argument);
}

TEST_CASE("error propagation closed forms") {
    SymmetricMomentVector moments;
    moments.max_order = 2;
    moments.values = {1.0, 0.5, 0.0};
    moments.covariance = Eigen::MatrixXd::Zero(3, 3);
    const auto matrix = build_reduced_matrix(moments, 1, 2);
    const auto pair = min_eigenpair(matrix);

    ErrorBudget budget;
    budget.moment_covariance = Eigen::MatrixXd::Zero(3, 3);
    budget.systematic_relative = 0.0;
    auto errors = propagate_witness_error(matrix, pair.vector, budget);
    CHECK(errors.random_error == 0.0);
    CHECK(errors.systematic_error == 0.0);
    CHECK(errors.combined_error == 0.0);

    // Diagonal variance on G^(1) only: random error is 2 |v0 v1| sigma.
    const double sigma = 0.01;
    budget.moment_covariance(1, 1) = sigma * sigma;
    errors = propagate_witness_error(matrix, pair.vector, budget);
    CHECK(errors.random_error ==
          doctest::Approx(2.0 * std::abs(pair.vector[0] * pair.vector[1]) * sigma)
              .epsilon(1e-12));

    budget.systematic_relative = 0.05;
    errors = propagate_witness_error(matrix, pair.vector, budget);
    CHECK(errors.combined_error ==
          doctest::Approx(std::hypot(errors.random_error, errors.systematic_error))
              .epsilon(1e-12));
}

TEST_CASE("first-order propagation matches the Monte Carlo eigenvalue spread") {
    SymmetricMomentVector moments;
    moments.max_order = 2;
    moments.values = {1.0, 0.4, 0.1};
    moments.covariance = Eigen::MatrixXd::Zero(3, 3);
    const auto matrix = build_reduced_matrix(moments, 1, 2);
    const auto pair = min_eigenpair(matrix);

    ErrorBudget budget;
    budget.moment_covariance = Eigen::MatrixXd::Zero(3, 3);
    budget.moment_covariance(1, 1) = 1e-6;
    budget.moment_covariance(2, 2) = 4e-6;
    const auto errors = propagate_witness_error(matrix, pair.vector, budget);

    Rng rng(13);
    const int samples = 1000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int s = 0; s < samples; s++) {
        SymmetricMomentVector perturbed = moments;
        perturbed.values[1] += rng.gaussian(0.0, 1e-3);
        perturbed.values[2] += rng.gaussian(0.0, 2e-3);
        const auto sample_pair = min_eigenpair(build_reduced_matrix(perturbed, 1, 2));
        sum += sample_pair.value;
        sum_sq += sample_pair.value * sample_pair.value;
    }
    const double spread = std::sqrt(sum_sq / samples - (sum / samples) * (sum / samples));
    CHECK(errors.random_error == doctest::Approx(spread).epsilon(0.20));
}

TEST_CASE("significance is the negativity in units of the combined error") {
    CHECK(significance(-0.2, 0.01) == doctest::Approx(20.0));
    CHECK(significance(0.3, 0.01) == 0.0);
    CHECK(significance(-1e-12, 1e-3) == doctest::Approx(1e-9));
    CHECK(significance(0.0, 0.0) == 0.0);
    CHECK(std::isinf(significance(-0.1, 0.0)));  // unbounded, never divided
}

TEST_CASE("herald slices partition the joint histogram") {
    JointClickHistogram joint;
    joint.detector_count_a = 3;
    joint.detector_count_b = 3;
    joint.counts.assign(16, 0);
    Rng rng(3);
    std::uint64_t trials = 0;
    for (int a = 0; a <= 3; a++) {
        for (int b = 0; b <= 3; b++) {
            joint.at(a, b) = rng.next_below(50);
            trials += joint.at(a, b);
        }
    }
    joint.trials = trials;

    std::uint64_t accounted = 0;
    for (int n = 0; n <= 3; n++) {
        try {
            const auto slice = herald_condition(joint, 1, n);
            accounted += slice.conditional.trials;
            // Conditional counts are the matching row of the joint table.
            for (int a = 0; a <= 3; a++) {
                CHECK(slice.conditional.counts[a] == joint.at(a, n));
            }
        } catch (const std::invalid_argument&) {
            // empty slice contributes nothing
        }
    }
    CHECK(accounted == trials);
}

TEST_CASE("heralding an independent source returns the marginal") {
    JointClickHistogram joint;
    joint.detector_count_a = 2;
    joint.detector_count_b = 2;
    joint.counts.assign(9, 0);
    const std::vector<std::uint64_t> a = {60, 30, 10};
    const std::vector<std::uint64_t> b = {50, 40, 10};
    std::uint64_t trials = 0;
    for (int n_a = 0; n_a <= 2; n_a++) {
        for (int n_b = 0; n_b <= 2; n_b++) {
            joint.at(n_a, n_b) = a[n_a] * b[n_b];
            trials += a[n_a] * b[n_b];
        }
    }
    joint.trials = trials;

    for (int n = 0; n <= 2; n++) {
        const auto slice = herald_condition(joint, 1, n);
        const auto conditional = slice.conditional.probabilities();
        for (int m = 0; m <= 2; m++) {
            CHECK(conditional[m] == doctest::Approx(a[m] / 100.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("heralding perfectly correlated pairs gives a point mass") {
    JointClickHistogram joint;
    joint.detector_count_a = 2;
    joint.detector_count_b = 2;
    joint.counts.assign(9, 0);
    joint.at(1, 1) = 400;
    joint.at(0, 0) = 600;
    joint.trials = 1000;
    const auto slice = herald_condition(joint, 1, 1);
    CHECK(slice.conditional.counts[1] == 400);
    CHECK(slice.conditional.trials == 400);
    CHECK_FALSE(slice.low_statistics);
    CHECK_THROWS_AS(herald_condition(joint, 1, 2), std::invalid_argument);  // empty slice
}

TEST_CASE("witness pipeline on the exact single-photon distribution") {
    const auto hist = histogram_from_counts({0, 100000, 0});
    const auto result = evaluate_witness(hist, 1, 2, 0.0);
    CHECK(std::abs(result.min_eigenvalue - (1.0 - std::sqrt(2.0)) / 2.0) <= 1e-12);
    CHECK(result.random_error == 0.0);
    CHECK(result.trials == 100000);
}

TEST_CASE("significance grows like the square root of the trial count") {
    const auto dist = exact_click_distribution(SourceModel::fock(1, 0.6, 0.001), 8);
    double previous = 0.0;
    for (std::uint64_t trials : {10000ULL, 40000ULL, 160000ULL}) {
        std::vector<std::uint64_t> counts(dist.size());
        for (std::size_t n = 0; n < dist.size(); n++) {
            counts[n] = static_cast<std::uint64_t>(std::llround(dist[n] * trials));
        }
        auto hist = histogram_from_counts(std::move(counts));
        const auto result = evaluate_witness(hist, 1, 8, 0.0);
        CHECK(result.min_eigenvalue < 0.0);
        // Exact-distribution counts: each doubling of C scales sigma by 1/2.
        if (previous > 0.0) {
            CHECK(result.significance > 1.7 * previous);
            CHECK(result.significance < 2.3 * previous);
        }
        previous = result.significance;
    }
}

TEST_SUITE_END();
