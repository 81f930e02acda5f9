#pragma once

#include <vector>

#include "transient/forward_render.hpp"
#include "transient/scene_model.hpp"

namespace transient {

enum class EstimateMethod { theoretical, abs };

struct EstimateDiagnostics {
    // For the AbS method, the minimized loss: squared Fourier distance over
    // the k retained coefficients, normalized by the measurement's retained
    // Fourier energy (scale-free). Zero for the theoretical method.
    double final_loss = 0.0;
    int iterations = 0;       // accepted gradient steps
    bool converged = false;
    double d1_m = 0.0;        // leading-edge distance
    double d2_m = 0.0;        // lagging-edge distance
    bool wraparound_warning = false;  // lagging edge hit the last bin
};

struct PlaneEstimate {
    double z0_m = 0.0;
    double theta_n_rad = 0.0;
    EstimateMethod method = EstimateMethod::theoretical;
    EstimateDiagnostics diagnostics;
};

struct EdgeTriple {
    int leading = 0;  // bins, 1-based
    int peak = 0;
    int lagging = 0;
};

// Distance to the plane at signed viewing angle gamma in the tilt plane:
// z0 * cos(theta_n) / cos(gamma + theta_n).
double plane_distance(double z0_m, double theta_n_rad, double gamma_rad);

// Subtracts the background floor (median of all bins), then returns the
// argmax bin and the first/last bins at or above threshold_frac of the peak.
EdgeTriple detect_edges(const TransientHistogram& hist, double threshold_frac = 0.1);

// Closed-form inversion of the plane-distance equation for the tilt:
// atan((D cos(gamma) - z0) / (D sin(gamma))), folded into [0, pi/2)
// (only the unsigned tilt is recoverable from a transient).
double invert_distance_for_angle(double distance_m, double gamma_rad, double z0_m);

// Peak/edge estimator: z0 from the peak bin (or the support center when
// z0_from_support_center is set), tilt from the signed inversions of the two
// edge distances at gamma = -/+ fov/2, averaged and then folded.
PlaneEstimate estimate_plane_theoretical(const TransientHistogram& hist,
                                         const SensorConfig& config,
                                         double threshold_frac = 0.1,
                                         bool z0_from_support_center = false);

// Squared L2 distance between the k lowest-frequency DFT coefficients
// (indices 0..k-1, DC included) of the two histograms.
double fourier_loss(const TransientHistogram& a, const TransientHistogram& b, int k);

struct AbsConfig {
    int k_coeffs = 64;            // clamped to N/2+1 for short histograms
    double step_size = 0.01;      // initial trial step of the line search
    int max_iters = 500;
    double grad_tol = 1e-8;
    double soft_sigma_bins = 0.5;
    double threshold_frac = 0.1;  // forwarded to the theoretical initializer
    int angular_resolution = 64;  // forwarded to the soft renderer
};

// Analysis-by-synthesis: gradient descent on (theta_n, z0) minimizing the
// low-pass Fourier loss between the soft forward render and the measurement,
// initialized by the theoretical estimator. Descent uses backtracking line
// search with per-parameter scaling (theta steps x0.1) and returns the best
// point visited, so the result never has a higher loss than the initializer.
PlaneEstimate estimate_plane_abs(const TransientHistogram& hist, const SensorConfig& config,
                                 const AbsConfig& abs_config);

// Same optimizer from an explicit starting point.
PlaneEstimate estimate_plane_abs_from(const TransientHistogram& hist, const SensorConfig& config,
                                      const AbsConfig& abs_config, const PlaneParams& init);

struct AlbedoEstimate {
    PlaneEstimate estimate;
    std::vector<double> albedo;  // per-bin albedo in [0.01, 1]
};

// Joint descent on (theta_n, z0, a_1..a_N) where bin i of the render is
// multiplied by a_i. The plane parameters are first descended alone from the
// theoretical initializer, then jointly with the albedo texture (initialized
// to all ones), so the final loss never exceeds the plain AbS loss.
AlbedoEstimate estimate_plane_abs_with_albedo(const TransientHistogram& hist,
                                              const SensorConfig& config,
                                              const AbsConfig& abs_config);

}  // namespace transient
