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

#include "qbench/moments_witness.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace qbench {

namespace {

constexpr int kDenseEigenLimit = 256;

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void fix_sign(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); i++) {
        if (std::abs(v[i]) > 1e-12) {
            if (v[i] < 0.0) {
                v = -v;
            }
            return;
        }
    }
}

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); i++) {
        if (a[i] != b[i]) {
            return a[i] < b[i];
        }
    }
    return false;
}

EigenPair dense_min_eigenpair(const Eigen::MatrixXd& matrix) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("symmetric eigensolver did not converge");
    }
    const auto& values = solver.eigenvalues();
    const double lambda = values[0];
    const double scale = std::max(1.0, std::abs(values[values.size() - 1]));

    // Degenerate minimum: deterministic tie-break by the sign-fixed
    // lexicographically smallest eigenvector.
    EigenPair best;
    best.value = lambda;
    for (Eigen::Index i = 0; i < values.size() && values[i] <= lambda + 1e-12 * scale; i++) {
        Eigen::VectorXd v = solver.eigenvectors().col(i);
        v.normalize();
        fix_sign(v);
        if (best.vector.size() == 0 || lexicographically_less(v, best.vector)) {
            best.vector = v;
        }
    }
    return best;
}

// Lanczos with full reorthogonalization for the dimensions the dense solver
// would be wasteful at (the joint two-group witness reaches 4225).
EigenPair lanczos_min_eigenpair(const Eigen::MatrixXd& matrix) {
    const Eigen::Index dim = matrix.rows();
    const int max_iter = static_cast<int>(std::min<Eigen::Index>(dim, 600));
    const double scale = std::max(1.0, matrix.cwiseAbs().rowwise().sum().maxCoeff());
    const double tolerance = 1e-11 * scale;

    Eigen::MatrixXd basis(dim, max_iter);
    Eigen::VectorXd alpha(max_iter);
    Eigen::VectorXd beta(max_iter);

    // Deterministic start vector with no special structure.
    Eigen::VectorXd v(dim);
    std::uint64_t state = 0x2545f4914f6cdd1dULL;
    for (Eigen::Index i = 0; i < dim; i++) {
        v[i] = 0.5 + static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    }
    v.normalize();

    int steps = 0;
    for (int j = 0; j < max_iter; j++) {
        basis.col(j) = v;
        Eigen::VectorXd w = matrix * v;
        alpha[j] = v.dot(w);
        w -= alpha[j] * v;
        if (j > 0) {
            w -= beta[j - 1] * basis.col(j - 1);
        }
        // Full reorthogonalization keeps the Ritz values trustworthy.
        w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
        beta[j] = w.norm();
        steps = j + 1;

        const bool krylov_exhausted = beta[j] < 1e-14 * scale;
        if (j >= 8 || krylov_exhausted || j == max_iter - 1) {
            Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(steps, steps);
            for (int i = 0; i < steps; i++) {
                tri(i, i) = alpha[i];
                if (i + 1 < steps) {
                    tri(i, i + 1) = beta[i];
                    tri(i + 1, i) = beta[i];
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
            if (small.info() != Eigen::Success) {
                throw std::runtime_error("symmetric eigensolver did not converge");
            }
            const Eigen::VectorXd s = small.eigenvectors().col(0);
            const double residual = krylov_exhausted ? 0.0 : std::abs(beta[j] * s[steps - 1]);
            if (residual < tolerance || krylov_exhausted || j == max_iter - 1) {
                if (residual >= tolerance && !krylov_exhausted) {
                    throw std::runtime_error("Lanczos eigensolver did not converge");
                }
                EigenPair pair;
                pair.value = small.eigenvalues()[0];
                pair.vector = basis.leftCols(steps) * s;
                pair.vector.normalize();
                fix_sign(pair.vector);
                return pair;
            }
        }
        if (krylov_exhausted) {
            break;
        }
        v = w / beta[j];
    }
    throw std::runtime_error("Lanczos eigensolver did not converge");
}

}  // namespace

Multiplicities multiplicities(int mode_count, int detector_count) {
    if (mode_count < 0) {
        throw std::invalid_argument("mode_count must be nonnegative");
    }
    if (detector_count < 2 || detector_count % 2 != 0) {
        throw std::invalid_argument("detector_count must be a positive even number");
    }
    // Coefficients of (1 + z + ... + z^{D/2})^K by iterated convolution.
    const int segment = detector_count / 2;
    std::vector<BigInt> poly{BigInt(1)};
    for (int k = 0; k < mode_count; k++) {
        std::vector<BigInt> next(poly.size() + segment, BigInt(0));
        for (std::size_t i = 0; i < poly.size(); i++) {
            for (int j = 0; j <= segment; j++) {
                next[i + j] += poly[i];
            }
        }
        poly = std::move(next);
    }
    Multiplicities result;
    result.mode_count = mode_count;
    result.detector_count = detector_count;
    result.d = std::move(poly);
    return result;
}

ReducedWitnessMatrix build_reduced_matrix(const SymmetricMomentVector& moments, int mode_count,
                                          int detector_count) {
    if (mode_count < 1) {
        throw std::invalid_argument("mode_count must be positive");
    }
    auto mult = multiplicities(mode_count, detector_count);
    const int kappa = mult.kappa();
    if (moments.max_order < 2 * kappa) {
        // Zero-padding missing orders would inject spurious negativity.
        throw std::invalid_argument("moment vector order too low for the requested witness");
    }

    ReducedWitnessMatrix matrix;
    matrix.mode_count = mode_count;
    matrix.detector_count = detector_count;
    matrix.mult = std::move(mult);
    matrix.source_moments = moments;
    matrix.entries = Eigen::MatrixXd(kappa + 1, kappa + 1);

    std::vector<double> sqrt_d(kappa + 1);
    for (int j = 0; j <= kappa; j++) {
        sqrt_d[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult.d[j])));
    }
    for (int j = 0; j <= kappa; j++) {
        for (int l = j; l <= kappa; l++) {
            const double value = sqrt_d[j] * sqrt_d[l] * moments.values[j + l];
            matrix.entries(j, l) = value;
            matrix.entries(l, j) = value;
        }
    }
    return matrix;
}

EigenPair min_eigenpair(const Eigen::MatrixXd& symmetric) {
    if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0) {
        throw std::invalid_argument("matrix must be square and nonempty");
    }
    if (!symmetric.allFinite()) {
        throw std::invalid_argument("matrix entries must be finite");
    }
    if (symmetric.rows() <= kDenseEigenLimit) {
        return dense_min_eigenpair(symmetric);
    }
    return lanczos_min_eigenpair(symmetric);
}

EigenPair min_eigenpair(const ReducedWitnessMatrix& matrix) {
    return min_eigenpair(matrix.entries);
}

Eigen::MatrixXd build_full_matrix_oracle(const SymmetricMomentVector& moments, int mode_count,
                                         int detector_count) {
    if (mode_count < 1) {
        throw std::invalid_argument("mode_count must be positive");
    }
    if (detector_count < 2 || detector_count % 2 != 0) {
        throw std::invalid_argument("detector_count must be a positive even number");
    }
    const int digits = detector_count / 2 + 1;
    double dim_check = std::pow(static_cast<double>(digits), mode_count);
    if (dim_check > 4096.0) {
        throw std::invalid_argument("full matrix oracle limited to dimension 4096");
    }
    const int dim = static_cast<int>(dim_check + 0.5);
    if (moments.max_order < mode_count * detector_count) {
        throw std::invalid_argument("moment vector order too low for the requested witness");
    }

    // Order sums of all multi-indices in lexicographic order (first mode is
    // the most significant digit).
    std::vector<int> order_sum(dim, 0);
    for (int index = 0; index < dim; index++) {
        int rest = index;
        int sum = 0;
        for (int mode = 0; mode < mode_count; mode++) {
            sum += rest % digits;
            rest /= digits;
        }
        order_sum[index] = sum;
    }

    Eigen::MatrixXd full(dim, dim);
    for (int r = 0; r < dim; r++) {
        for (int c = 0; c < dim; c++) {
            full(r, c) = moments.values[order_sum[r] + order_sum[c]];
        }
    }
    return full;
}

JointReducedWitnessMatrix build_joint_reduced_matrix(const JointMomentTable& moments,
                                                     int mode_count_a, int mode_count_b,
                                                     int detector_count_a, int detector_count_b) {
    if (mode_count_a < 1 || mode_count_b < 0) {
        throw std::invalid_argument("mode counts must be positive (B may be zero)");
    }
    JointReducedWitnessMatrix matrix;
    matrix.mode_count_a = mode_count_a;
    matrix.mode_count_b = mode_count_b;
    matrix.detector_count_a = detector_count_a;
    matrix.detector_count_b = detector_count_b;
    matrix.mult_a = multiplicities(mode_count_a, detector_count_a);
    matrix.mult_b = multiplicities(mode_count_b, detector_count_b);
    const int kappa_a = matrix.mult_a.kappa();
    const int kappa_b = matrix.mult_b.kappa();
    if (moments.max_order_a < 2 * kappa_a || moments.max_order_b < 2 * kappa_b) {
        throw std::invalid_argument("joint moment table orders too low for the requested witness");
    }

    std::vector<double> sqrt_da(kappa_a + 1);
    std::vector<double> sqrt_db(kappa_b + 1);
    for (int j = 0; j <= kappa_a; j++) {
        sqrt_da[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult_a.d[j])));
    }
    for (int j = 0; j <= kappa_b; j++) {
        sqrt_db[j] = std::sqrt(static_cast<double>(BigFloat(matrix.mult_b.d[j])));
    }

    const int dim = (kappa_a + 1) * (kappa_b + 1);
    matrix.entries = Eigen::MatrixXd(dim, dim);
    auto flat = [&](int j_a, int j_b) { return j_a * (kappa_b + 1) + j_b; };
    for (int j_a = 0; j_a <= kappa_a; j_a++) {
        for (int j_b = 0; j_b <= kappa_b; j_b++) {
            for (int l_a = 0; l_a <= kappa_a; l_a++) {
                for (int l_b = 0; l_b <= kappa_b; l_b++) {
                    matrix.entries(flat(j_a, j_b), flat(l_a, l_b)) =
                        sqrt_da[j_a] * sqrt_da[l_a] * sqrt_db[j_b] * sqrt_db[l_b] *
                        moments.values(j_a + l_a, j_b + l_b);
                }
            }
        }
    }
    return matrix;
}

WitnessResult joint_reduced_witness(const JointMomentTable& moments, int mode_count_a,
                                    int mode_count_b, int detector_count_a, int detector_count_b) {
    const auto matrix = build_joint_reduced_matrix(moments, mode_count_a, mode_count_b,
                                                   detector_count_a, detector_count_b);
    const auto pair = min_eigenpair(matrix.entries);
    WitnessResult result;
    result.min_eigenvalue = pair.value;
    result.eigenvector = pair.vector;
    result.trials = moments.trials;
    return result;
}

}  // namespace qbench
