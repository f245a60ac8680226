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

#include "qbench/click_counting.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "qbench/binomial.hpp"
#include "qbench/rng.hpp"

namespace qbench {

void ClickHistogram::validate() const {
    if (detector_count < 1) {
        throw std::invalid_argument("detector_count must be positive");
    }
    if (counts.size() != static_cast<std::size_t>(detector_count) + 1) {
        throw std::invalid_argument("counts must have length detector_count + 1");
    }
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total != trials) {
        throw std::invalid_argument("histogram counts must sum to the trial count");
    }
}

std::vector<double> ClickHistogram::probabilities() const {
    validate();
    if (trials == 0) {
        throw std::invalid_argument("histogram has zero trials");
    }
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); i++) {
        p[i] = static_cast<double>(counts[i]) / static_cast<double>(trials);
    }
    return p;
}

std::uint64_t& JointClickHistogram::at(int n_a, int n_b) {
    return counts[static_cast<std::size_t>(n_a) * (detector_count_b + 1) + n_b];
}

std::uint64_t JointClickHistogram::at(int n_a, int n_b) const {
    return counts[static_cast<std::size_t>(n_a) * (detector_count_b + 1) + n_b];
}

void JointClickHistogram::validate() const {
    if (detector_count_a < 1 || detector_count_b < 1) {
        throw std::invalid_argument("detector counts must be positive");
    }
    const std::size_t expected =
        static_cast<std::size_t>(detector_count_a + 1) * (detector_count_b + 1);
    if (counts.size() != expected) {
        throw std::invalid_argument("joint histogram has the wrong shape");
    }
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total != trials) {
        throw std::invalid_argument("joint histogram counts must sum to the trial count");
    }
}

ClickHistogram JointClickHistogram::marginal(int arm) const {
    validate();
    ClickHistogram hist;
    hist.detector_count = arm == 0 ? detector_count_a : detector_count_b;
    hist.counts.assign(hist.detector_count + 1, 0);
    hist.trials = trials;
    for (int n_a = 0; n_a <= detector_count_a; n_a++) {
        for (int n_b = 0; n_b <= detector_count_b; n_b++) {
            hist.counts[arm == 0 ? n_a : n_b] += at(n_a, n_b);
        }
    }
    return hist;
}

SourceModel SourceModel::fock(int n, double eta, double p_bg) {
    SourceModel model;
    model.kind = Kind::Fock;
    model.photon_number = n;
    model.efficiency = eta;
    model.background_click_prob = p_bg;
    model.validate();
    return model;
}

SourceModel SourceModel::coherent(double mean_photons, double eta, double p_bg) {
    SourceModel model;
    model.kind = Kind::Coherent;
    model.photon_number = mean_photons;
    model.efficiency = eta;
    model.background_click_prob = p_bg;
    model.validate();
    return model;
}

SourceModel SourceModel::thermal(double mean_photons, double modes, double eta, double p_bg) {
    SourceModel model;
    model.kind = Kind::Thermal;
    model.photon_number = mean_photons;
    model.schmidt_modes = modes;
    model.efficiency = eta;
    model.background_click_prob = p_bg;
    model.validate();
    return model;
}

void SourceModel::validate() const {
    if (photon_number < 0.0) {
        throw std::invalid_argument("photon number / mean must be nonnegative");
    }
    if (kind == Kind::Fock && photon_number != std::floor(photon_number)) {
        throw std::invalid_argument("fock photon number must be an integer");
    }
    if (kind == Kind::Thermal && schmidt_modes <= 0.0) {
        throw std::invalid_argument("thermal schmidt_modes must be positive");
    }
    if (efficiency < 0.0 || efficiency > 1.0) {
        throw std::invalid_argument("efficiency must be in [0, 1]");
    }
    if (background_click_prob < 0.0 || background_click_prob >= 1.0) {
        throw std::invalid_argument("background_click_prob must be in [0, 1)");
    }
}

std::vector<double> exact_click_distribution(const SourceModel& model, int detector_count) {
    model.validate();
    if (detector_count < 1) {
        throw std::invalid_argument("detector_count must be positive");
    }
    const int bins = detector_count;

    // Probability that a fixed set of s bins stays silent: no background
    // click in any of them, and every source photon either misses the set or
    // is lost.
    auto silent_prob = [&](int s) -> BigFloat {
        const BigFloat eta(model.efficiency);
        const BigFloat frac = eta * s / bins;
        BigFloat optical;
        switch (model.kind) {
            case SourceModel::Kind::Fock:
                optical = boost::multiprecision::pow(BigFloat(1) - frac,
                                                     static_cast<int>(model.photon_number));
                break;
            case SourceModel::Kind::Coherent:
                optical = boost::multiprecision::exp(-BigFloat(model.photon_number) * frac);
                break;
            case SourceModel::Kind::Thermal: {
                const BigFloat mu(model.schmidt_modes);
                const BigFloat base = BigFloat(1) + BigFloat(model.photon_number) * frac / mu;
                optical = boost::multiprecision::pow(base, -mu);
                break;
            }
        }
        return boost::multiprecision::pow(BigFloat(1) - BigFloat(model.background_click_prob), s) *
               optical;
    };

    std::vector<BigFloat> q(bins + 1);
    for (int s = 0; s <= bins; s++) {
        q[s] = silent_prob(s);
    }

    // c(n) = binom(D,n) sum_j (-1)^j binom(n,j) q(D-n+j). The alternating
    // terms are astronomically larger than the result at D = 128; 100-digit
    // arithmetic keeps the cancellation exact to double precision.
    std::vector<double> distribution(bins + 1);
    for (int n = 0; n <= bins; n++) {
        BigFloat sum = 0;
        for (int j = 0; j <= n; j++) {
            BigFloat term = BigFloat(exact_binomial(n, j)) * q[bins - n + j];
            if (j % 2 == 0) {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum *= BigFloat(exact_binomial(bins, n));
        double value = static_cast<double>(sum);
        distribution[n] = std::max(value, 0.0);
    }
    return distribution;
}

const std::vector<std::vector<double>>& click_weight_table(int detector_count) {
    if (detector_count < 1 || detector_count > 4096) {
        throw std::invalid_argument("detector_count out of supported range");
    }
    static std::mutex mutex;
    static std::map<int, std::vector<std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(detector_count);
    if (it == cache.end()) {
        std::vector<std::vector<double>> table(detector_count + 1,
                                               std::vector<double>(detector_count + 1, 0.0));
        for (int m = 0; m <= detector_count; m++) {
            for (int n = 0; n <= detector_count; n++) {
                table[m][n] = click_moment_weight(n, m, detector_count);
            }
        }
        it = cache.emplace(detector_count, std::move(table)).first;
    }
    return it->second;
}

SymmetricMomentVector moments_from_histogram(const ClickHistogram& hist, int max_order) {
    hist.validate();
    if (max_order < 1 || max_order > hist.detector_count) {
        throw std::invalid_argument("max_order must be in [1, detector_count]");
    }
    if (hist.trials == 0) {
        throw std::invalid_argument("cannot estimate moments from zero trials");
    }
    const auto& weights = click_weight_table(hist.detector_count);
    const auto c = hist.probabilities();

    SymmetricMomentVector moments;
    moments.max_order = max_order;
    moments.trials = hist.trials;
    moments.values.assign(max_order + 1, 0.0);
    moments.covariance = Eigen::MatrixXd::Zero(max_order + 1, max_order + 1);
    moments.values[0] = 1.0;
    for (int m = 1; m <= max_order; m++) {
        double sum = 0.0;
        for (int n = m; n <= hist.detector_count; n++) {
            sum += weights[m][n] * c[n];
        }
        moments.values[m] = sum;
    }
    return moments;
}

JointMomentTable joint_moments_from_histogram(const JointClickHistogram& hist, int max_order_a,
                                              int max_order_b) {
    hist.validate();
    if (max_order_a < 0 || max_order_a > hist.detector_count_a || max_order_b < 0 ||
        max_order_b > hist.detector_count_b) {
        throw std::invalid_argument("joint moment orders exceed detector counts");
    }
    if (hist.trials == 0) {
        throw std::invalid_argument("cannot estimate moments from zero trials");
    }
    const auto& weights_a = click_weight_table(hist.detector_count_a);
    const auto& weights_b = click_weight_table(hist.detector_count_b);

    JointMomentTable table;
    table.max_order_a = max_order_a;
    table.max_order_b = max_order_b;
    table.trials = hist.trials;
    table.values = Eigen::MatrixXd::Zero(max_order_a + 1, max_order_b + 1);

    // Two-stage contraction: fold the B axis first, then the A axis.
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(hist.detector_count_a + 1, max_order_b + 1);
    for (int n_a = 0; n_a <= hist.detector_count_a; n_a++) {
        for (int n_b = 0; n_b <= hist.detector_count_b; n_b++) {
            const std::uint64_t count = hist.at(n_a, n_b);
            if (count == 0) {
                continue;
            }
            const double c = static_cast<double>(count) / static_cast<double>(hist.trials);
            for (int m_b = 0; m_b <= std::min(max_order_b, n_b); m_b++) {
                partial(n_a, m_b) += weights_b[m_b][n_b] * c;
            }
        }
    }
    for (int m_a = 0; m_a <= max_order_a; m_a++) {
        for (int n_a = m_a; n_a <= hist.detector_count_a; n_a++) {
            const double w = weights_a[m_a][n_a];
            if (w == 0.0) {
                continue;
            }
            for (int m_b = 0; m_b <= max_order_b; m_b++) {
                table.values(m_a, m_b) += w * partial(n_a, m_b);
            }
        }
    }
    return table;
}

ClickHistogram sample_histogram(const std::vector<double>& distribution, std::uint64_t trials,
                                std::uint64_t seed) {
    if (distribution.empty()) {
        throw std::invalid_argument("empty distribution");
    }
    std::vector<double> cdf(distribution.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < distribution.size(); i++) {
        acc += distribution[i];
        cdf[i] = acc;
    }
    if (std::abs(acc - 1.0) > 1e-9) {
        throw std::invalid_argument("distribution must sum to 1");
    }
    cdf.back() = 1.0;

    ClickHistogram hist;
    hist.detector_count = static_cast<int>(distribution.size()) - 1;
    hist.counts.assign(distribution.size(), 0);
    hist.trials = trials;
    Rng rng(seed);
    for (std::uint64_t t = 0; t < trials; t++) {
        const double u = rng.next_double();
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        hist.counts[static_cast<std::size_t>(it - cdf.begin())]++;
    }
    return hist;
}

}  // namespace qbench
