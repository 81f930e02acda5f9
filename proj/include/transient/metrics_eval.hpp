#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "transient/plane_estimation.hpp"
#include "transient/scene_model.hpp"

namespace transient {

// Depth-map error metrics over the valid mask (finite ground truth > 0).

// Mean of |pred - gt| / gt.
double abs_rel(std::span<const double> pred, std::span<const double> gt);

// sqrt(mean of (pred - gt)^2).
double rmse(std::span<const double> pred, std::span<const double> gt);

// Mean of |log10(pred) - log10(gt)|.
double log10_err(std::span<const double> pred, std::span<const double> gt);

// Fraction of pixels with max(pred/gt, gt/pred) < thr (strict).
double threshold_accuracy(std::span<const double> pred, std::span<const double> gt, double thr);

// Reverse Huber loss: |x| below c, (x^2 + c^2) / (2c) above. Continuous at c.
double berhu(double x, double c);

struct SweepOptions {
    std::vector<double> z0_values;     // meters
    std::vector<double> theta_values;  // radians
    std::int64_t cycles = 0;           // laser cycles for SPAD noise; 0 = noiseless
    int n_seeds = 1;
    std::uint64_t base_seed = 1;
    // Noisy cells rescale the laser power so each scene returns this many
    // laser photons per cycle; a fixed power spans three orders of magnitude
    // over the z0 grid, starving one end or piling up the other. Both
    // estimators are invariant to the rescale.
    double photon_budget = 0.08;
    double threshold_frac = 0.1;
    int render_angular_resolution = 64;  // data-generation render
    AbsConfig abs_config;
};

// Per-cell mean absolute errors of both estimators and the fraction of cells
// where AbS is at least as good (ties count for AbS). Grids are z0-major:
// index iz * theta_count + it. Cells where both estimators fail (including
// planes that exit the unambiguous range) are excluded and counted.
struct SweepReport {
    std::vector<double> z0_values;
    std::vector<double> theta_values;
    std::vector<double> mae_z0_theoretical, mae_z0_abs;
    std::vector<double> mae_theta_theoretical, mae_theta_abs;
    double win_fraction_z0 = 0.0;
    double win_fraction_theta = 0.0;
    std::int64_t cycles = 0;
    double photon_budget = 0.0;
    std::vector<std::uint64_t> seeds;
    int valid_cells = 0;
    int invalid_cells = 0;
};

SweepReport run_sweep(const SweepOptions& options, const SensorConfig& config);

}  // namespace transient
