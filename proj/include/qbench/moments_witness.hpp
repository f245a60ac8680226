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

#ifndef QBENCH_MOMENTS_WITNESS_H
#define QBENCH_MOMENTS_WITNESS_H

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qbench/binomial.hpp"
#include "qbench/click_counting.hpp"

namespace qbench {

// Number of K-mode multi-indices (m_1..m_K), m_j in 0..D/2, with a fixed
// order sum m. These are the coefficients of [(1-z^{D/2+1})/(1-z)]^K and the
// reason the witness matrix shrinks from (D/2+1)^K rows to kappa+1 rows.
struct Multiplicities {
    int mode_count = 0;      // K
    int detector_count = 0;  // D, even
    std::vector<BigInt> d;   // length kappa+1

    int kappa() const { return mode_count * detector_count / 2; }
};

Multiplicities multiplicities(int mode_count, int detector_count);

// The scaled reduced matrix S * Gamma~ * S with entries sqrt(d_j d_l) G^(j+l).
// Shares every nonzero eigenvalue with the exponentially large matrix of
// moments; the rest of that spectrum is an exact zero kernel.
struct ReducedWitnessMatrix {
    int mode_count = 0;
    int detector_count = 0;
    Eigen::MatrixXd entries;
    Multiplicities mult;
    SymmetricMomentVector source_moments;
};

ReducedWitnessMatrix build_reduced_matrix(const SymmetricMomentVector& moments, int mode_count,
                                          int detector_count);

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;
};

// Algebraically smallest eigenvalue and a unit eigenvector of a symmetric
// matrix. Dense diagonalization up to dimension 256, Lanczos beyond. The
// eigenvector sign is fixed so the first significant component is positive.
EigenPair min_eigenpair(const Eigen::MatrixXd& symmetric);
EigenPair min_eigenpair(const ReducedWitnessMatrix& matrix);

// Unreduced matrix of moments over all (D/2+1)^K multi-indices, lexicographic
// index order. Validation oracle only; guarded to dimension <= 4096.
Eigen::MatrixXd build_full_matrix_oracle(const SymmetricMomentVector& moments, int mode_count,
                                         int detector_count);

struct WitnessResult {
    double min_eigenvalue = 0.0;
    Eigen::VectorXd eigenvector;
    double random_error = 0.0;
    double systematic_error = 0.0;
    double combined_error = 0.0;
    double significance = 0.0;  // max(0, -lambda) / combined_error
    bool significance_unbounded = false;  // negative eigenvalue with zero error
    std::uint64_t trials = 0;
};

// Two-group reduced witness: block symmetry applied independently on each
// side, dimension (kappa_A+1)(kappa_B+1). Index (j_A, j_B) is row-major in
// j_A. No error estimate at this level (see analysis).
struct JointReducedWitnessMatrix {
    int mode_count_a = 0, mode_count_b = 0;
    int detector_count_a = 0, detector_count_b = 0;
    Eigen::MatrixXd entries;
    Multiplicities mult_a, mult_b;
};

JointReducedWitnessMatrix build_joint_reduced_matrix(const JointMomentTable& moments,
                                                     int mode_count_a, int mode_count_b,
                                                     int detector_count_a, int detector_count_b);

WitnessResult joint_reduced_witness(const JointMomentTable& moments, int mode_count_a,
                                    int mode_count_b, int detector_count_a, int detector_count_b);

}  // namespace qbench

#endif
