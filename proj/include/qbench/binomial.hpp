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

#ifndef QBENCH_BINOMIAL_H
#define QBENCH_BINOMIAL_H

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>

namespace qbench {

// Exact integers for multiplicity counting and binomial tables. Counts like
// 2^64 or binom(128, 64) ~ 2.4e37 exceed every fixed-width type.
using BigInt = boost::multiprecision::cpp_int;

// High-precision float for inclusion-exclusion sums whose alternating terms
// reach ~1e37 before cancelling down to probabilities.
using BigFloat = boost::multiprecision::cpp_bin_float_100;

inline BigInt exact_binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) {
        return 0;
    }
    if (k > n - k) {
        k = n - k;
    }
    BigInt result = 1;
    for (int i = 0; i < k; i++) {
        result *= n - i;
        result /= i + 1;  // exact: product of i+1 consecutive integers
    }
    return result;
}

inline BigInt exact_factorial(int n) {
    BigInt result = 1;
    for (int i = 2; i <= n; i++) {
        result *= i;
    }
    return result;
}

// Falling factorial n(n-1)...(n-k+1); zero when k > n.
inline BigInt exact_falling_factorial(int n, int k) {
    if (k < 0 || n < 0) {
        throw std::invalid_argument("falling factorial needs nonnegative arguments");
    }
    if (k > n) {
        return 0;
    }
    BigInt result = 1;
    for (int i = 0; i < k; i++) {
        result *= n - i;
    }
    return result;
}

// Estimator weight binom(n, m) / binom(D, m), with the convention that
// binom(x, m) = 0 for m > x. Evaluated as one exact ratio so the only
// rounding is the final conversion to double.
inline double click_moment_weight(int n, int m, int detector_count) {
    if (m > n) {
        return 0.0;
    }
    if (m > detector_count) {
        throw std::invalid_argument("moment order exceeds detector count");
    }
    if (m == 0) {
        return 1.0;
    }
    const BigFloat num(exact_binomial(n, m));
    const BigFloat den(exact_binomial(detector_count, m));
    return static_cast<double>(num / den);
}

}  // namespace qbench

#endif
