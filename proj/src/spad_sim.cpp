#include "transient/spad_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "transient/rng.hpp"

namespace transient {

std::vector<double> detection_probabilities(const TransientHistogram& hist) {
    require_valid(hist);
    const int n = hist.n_bins();
    std::vector<double> p(n + 1);
    double survival = 1.0;  // prod_{j<i} (1 - q_j)
    for (int i = 0; i < n; ++i) {
        const double q = -std::expm1(-hist.flux[i]);
        p[i] = q * survival;
        survival *= 1.0 - q;
    }
    p[n] = survival;
    return p;
}

SpadHistogram simulate_synchronous_spad(const TransientHistogram& hist, std::int64_t cycles,
                                        std::uint64_t seed) {
    if (cycles < 1) throw validation_error("cycles must be >= 1");
    const auto p = detection_probabilities(hist);
    const int n = hist.n_bins();
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        cdf[i] = acc;
    }

    SpadHistogram spad;
    spad.mode = SpadMode::synchronous;
    spad.cycles = cycles;
    spad.bin_time_s = hist.bin_time_s;
    spad.counts.assign(n + 1, 0);
    SplitMix64 rng(seed_stream(seed, 0));
    for (std::int64_t c = 0; c < cycles; ++c) {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const size_t idx = std::min(static_cast<size_t>(it - cdf.begin()), cdf.size() - 1);
        ++spad.counts[idx];
    }
    return spad;
}

SpadHistogram simulate_asynchronous_spad(const TransientHistogram& hist, std::int64_t cycles,
                                         int dead_time_bins, std::uint64_t seed) {
    if (cycles < 1) throw validation_error("cycles must be >= 1");
    if (dead_time_bins < 1) throw validation_error("dead_time_bins must be >= 1");
    require_valid(hist);
    const int n = hist.n_bins();
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = -std::expm1(-hist.flux[i]);

    SpadHistogram spad;
    spad.mode = SpadMode::asynchronous;
    spad.cycles = cycles;
    spad.bin_time_s = hist.bin_time_s;
    spad.counts.assign(n, 0);

    SplitMix64 rng(seed_stream(seed, 0));
    const std::int64_t total_bins = cycles * static_cast<std::int64_t>(n);
    std::int64_t t = 0;
    int phase = 0;
    while (t < total_bins) {
        const double qi = q[phase];
        // Zero-flux bins never consume a draw.
        if (qi > 0.0 && rng.uniform() < qi) {
            ++spad.counts[phase];
            t += dead_time_bins;
            phase = static_cast<int>(t % n);
        } else {
            ++t;
            if (++phase == n) phase = 0;
        }
    }
    return spad;
}

TransientHistogram estimate_transient_lowflux(const SpadHistogram& spad) {
    require_valid(spad);
    const int n = spad.n_bins();
    TransientHistogram hist;
    hist.bin_time_s = spad.bin_time_s;
    hist.flux.resize(n);
    const double inv_cycles = 1.0 / static_cast<double>(spad.cycles);
    for (int i = 0; i < n; ++i) hist.flux[i] = static_cast<double>(spad.counts[i]) * inv_cycles;
    return hist;
}

TransientHistogram correct_pileup_coates(const SpadHistogram& spad) {
    require_valid(spad);
    if (spad.mode != SpadMode::synchronous)
        throw validation_error("Coates correction requires a synchronous SPAD histogram");
    const int n = spad.n_bins();
    TransientHistogram hist;
    hist.bin_time_s = spad.bin_time_s;
    hist.flux.resize(n);
    std::int64_t remaining = spad.cycles;
    for (int i = 0; i < n; ++i) {
        const std::int64_t c = spad.counts[i];
        if (remaining <= 0 || (c > 0 && c >= remaining)) {
            throw numeric_error("Coates correction saturated at bin " + std::to_string(i + 1) +
                                ": all remaining cycles detected");
        }
        hist.flux[i] = c == 0 ? 0.0
                              : -std::log1p(-static_cast<double>(c) / static_cast<double>(remaining));
        remaining -= c;
    }
    return hist;
}

}  // namespace transient
