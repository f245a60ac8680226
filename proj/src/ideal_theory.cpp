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

#include "qbench/ideal_theory.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "qbench/binomial.hpp"

namespace qbench {

namespace {

constexpr int kExactFactorialLimit = 20;  // big-integer path below, log-space above
constexpr int kOracleMaxPhotons = 12;
constexpr int kOracleMaxModes = 8;

double falling_factorial_over_power(int n, int k, int base) {
    // n! / ((n-k)! base^k), exact for small n, log-space otherwise.
    if (k > n) {
        return 0.0;
    }
    if (n <= kExactFactorialLimit) {
        return static_cast<double>(BigFloat(exact_falling_factorial(n, k)) /
                                   boost::multiprecision::pow(BigFloat(base), k));
    }
    double log_value = std::lgamma(n + 1.0) - std::lgamma(n - k + 1.0) -
                       k * std::log(static_cast<double>(base));
    return std::exp(log_value);
}

}  // namespace

void FockSplitConfig::validate() const {
    if (photon_number < 0) {
        throw std::invalid_argument("photon_number must be nonnegative");
    }
    if (mode_count < 1) {
        throw std::invalid_argument("mode_count must be positive");
    }
}

double output_probability(const FockSplitConfig& config, const OccupationPattern& pattern) {
    config.validate();
    if (static_cast<int>(pattern.size()) != config.mode_count) {
        throw std::invalid_argument("occupation pattern length must equal mode count");
    }
    int total = 0;
    for (int n : pattern) {
        if (n < 0) {
            throw std::invalid_argument("occupations must be nonnegative");
        }
        total += n;
    }
    if (total != config.photon_number) {
        throw std::invalid_argument("occupation sum must equal the photon number");
    }

    const int n_photons = config.photon_number;
    if (n_photons <= kExactFactorialLimit) {
        BigInt denom = 1;
        for (int n : pattern) {
            denom *= exact_factorial(n);
        }
        denom *= boost::multiprecision::pow(BigInt(config.mode_count), n_photons);
        return static_cast<double>(BigFloat(exact_factorial(n_photons)) / BigFloat(denom));
    }
    double log_p = std::lgamma(n_photons + 1.0) -
                   n_photons * std::log(static_cast<double>(config.mode_count));
    for (int n : pattern) {
        log_p -= std::lgamma(n + 1.0);
    }
    return std::exp(log_p);
}

double ideal_correlation(const FockSplitConfig& config, const MultiIndex& idx) {
    config.validate();
    if (static_cast<int>(idx.size()) != config.mode_count) {
        throw std::invalid_argument("multi-index length must equal mode count");
    }
    int order = 0;
    for (int m : idx) {
        if (m < 0) {
            throw std::invalid_argument("orders must be nonnegative");
        }
        order += m;
    }
    return falling_factorial_over_power(config.photon_number, order, config.mode_count);
}

std::vector<OccupationPattern> enumerate_patterns(int total, int modes) {
    std::vector<OccupationPattern> result;
    OccupationPattern current(modes, 0);
    // Lexicographic recursion over (n_1, ..., n_M) with fixed sum.
    auto recurse = [&](auto&& self, int mode, int remaining) -> void {
        if (mode == modes - 1) {
            current[mode] = remaining;
            result.push_back(current);
            return;
        }
        for (int n = 0; n <= remaining; n++) {
            current[mode] = n;
            self(self, mode + 1, remaining - n);
        }
    };
    recurse(recurse, 0, total);
    return result;
}

double ideal_correlation_oracle(const FockSplitConfig& config, const MultiIndex& idx) {
    config.validate();
    if (static_cast<int>(idx.size()) != config.mode_count) {
        throw std::invalid_argument("multi-index length must equal mode count");
    }
    if (config.photon_number > kOracleMaxPhotons || config.mode_count > kOracleMaxModes) {
        throw std::invalid_argument("instance too large for the enumeration oracle");
    }
    double moment = 0.0;
    for (const auto& pattern : enumerate_patterns(config.photon_number, config.mode_count)) {
        const double p = output_probability(config, pattern);
        BigInt factor = 1;
        for (int j = 0; j < config.mode_count; j++) {
            factor *= exact_falling_factorial(pattern[j], idx[j]);
        }
        moment += p * static_cast<double>(BigFloat(factor));
    }
    return moment;
}

}  // namespace qbench
