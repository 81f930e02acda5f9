#pragma once

#include <cstdint>
#include <vector>

#include "transient/scene_model.hpp"

namespace transient {

// Per-cycle detection probabilities p_1..p_{N+1} of a synchronous SPAD:
// q_i = 1 - exp(-flux_i), p_i = q_i * prod_{j<i} (1 - q_j), and p_{N+1} is
// the probability of a cycle with no detection. Sums to 1.
std::vector<double> detection_probabilities(const TransientHistogram& hist);

// Draws `cycles` independent categorical samples from the detection
// probabilities (at most one photon per laser period). Counts sum to cycles;
// bin N+1 holds the empty cycles.
SpadHistogram simulate_synchronous_spad(const TransientHistogram& hist, std::int64_t cycles,
                                        std::uint64_t seed);

// Free-running acquisition over a continuous timeline of `cycles` laser
// periods. Each live bin detects with probability 1 - exp(-flux_i) (at most
// one detection per bin); after a detection the detector resumes exactly
// dead_time_bins later, spanning period boundaries. Detection timestamps are
// re-synchronized modulo the period and histogrammed.
SpadHistogram simulate_asynchronous_spad(const TransientHistogram& hist, std::int64_t cycles,
                                         int dead_time_bins, std::uint64_t seed);

// Low-flux estimator: flux_i ~= counts_i / cycles over bins 1..N.
TransientHistogram estimate_transient_lowflux(const SpadHistogram& spad);

// Coates correction: exact inversion of the synchronous detection model,
// flux_i = -ln(1 - counts_i / (cycles - sum_{j<i} counts_j)).
TransientHistogram correct_pileup_coates(const SpadHistogram& spad);

}  // namespace transient
