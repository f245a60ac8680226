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

#ifndef QBENCH_RNG_H
#define QBENCH_RNG_H

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qbench {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that streams are
// bit-reproducible across platforms and standard libraries; every sampling
// transform below is ours for the same reason.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        // Distinct streams decorrelate by seeding splitmix at different points.
        std::uint64_t x = seed + stream * 0x9e3779b97f4a7c15ULL;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
            state_[0] = 0x853c49e6748fea9bULL;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) {
        return next_double() < p;
    }

    // Unbiased integer in [0, n) (Lemire rejection).
    std::uint32_t next_below(std::uint32_t n) {
        if (n == 0) {
            throw std::invalid_argument("next_below(0)");
        }
        std::uint64_t m = static_cast<std::uint64_t>(static_cast<std::uint32_t>(next_u64())) * n;
        auto low = static_cast<std::uint32_t>(m);
        if (low < n) {
            const std::uint32_t threshold = (0u - n) % n;
            while (low < threshold) {
                m = static_cast<std::uint64_t>(static_cast<std::uint32_t>(next_u64())) * n;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    double gaussian(double mean = 0.0, double sigma = 1.0) {
        // Box-Muller; the second variate is discarded to keep calls stateless.
        double u1 = next_double();
        while (u1 <= 0.0) {
            u1 = next_double();
        }
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * radius * std::cos(6.283185307179586476925287 * u2);
    }

    // Exact Poisson sampling. Large means are split into chunks so the
    // multiplicative (Knuth) method never underflows.
    std::uint32_t poisson(double lambda) {
        if (lambda < 0.0 || !std::isfinite(lambda)) {
            throw std::invalid_argument("poisson mean must be finite and nonnegative");
        }
        std::uint32_t total = 0;
        while (lambda > 16.0) {
            total += poisson_knuth(16.0);
            lambda -= 16.0;
        }
        return total + poisson_knuth(lambda);
    }

    // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
    double gamma(double shape, double scale) {
        if (shape <= 0.0 || scale <= 0.0) {
            throw std::invalid_argument("gamma parameters must be positive");
        }
        if (shape < 1.0) {
            const double u = std::max(next_double(), 1e-300);
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = gaussian();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_double();
            if (u < 1.0 - 0.0331 * x * x * x * x) {
                return d * v * scale;
            }
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return d * v * scale;
            }
        }
    }

    // Negative binomial with given mean and a (possibly fractional) number of
    // thermal modes, via the gamma-Poisson mixture. modes -> inf is Poisson.
    std::uint32_t negative_binomial(double mean, double modes) {
        if (mean < 0.0 || modes <= 0.0) {
            throw std::invalid_argument("negative binomial needs mean >= 0, modes > 0");
        }
        if (mean == 0.0) {
            return 0;
        }
        if (modes > 1e7) {
            return poisson(mean);
        }
        return poisson(gamma(modes, mean / modes));
    }

    // Exact binomial via CDF inversion; O(np) expected, fine for the small
    // per-trial background counts this is used for.
    std::uint32_t binomial(std::uint32_t n, double p) {
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("binomial probability out of range");
        }
        if (n == 0 || p == 0.0) {
            return 0;
        }
        if (p == 1.0) {
            return n;
        }
        if (p > 0.5) {
            return n - binomial(n, 1.0 - p);
        }
        const double q = 1.0 - p;
        double pmf = std::pow(q, static_cast<double>(n));
        if (pmf <= 0.0) {
            // Mean too large for the inversion walk; fall back to direct draws.
            std::uint32_t count = 0;
            for (std::uint32_t i = 0; i < n; i++) {
                count += bernoulli(p) ? 1 : 0;
            }
            return count;
        }
        double cdf = pmf;
        const double u = next_double();
        std::uint32_t k = 0;
        while (u > cdf && k < n) {
            pmf *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (p / q);
            cdf += pmf;
            k++;
        }
        return k;
    }

  private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint32_t poisson_knuth(double lambda) {
        if (lambda <= 0.0) {
            return 0;
        }
        const double limit = std::exp(-lambda);
        std::uint32_t k = 0;
        double product = next_double();
        while (product > limit) {
            k++;
            product *= next_double();
        }
        return k;
    }

    std::uint64_t state_[4];
};

}  // namespace qbench

#endif
