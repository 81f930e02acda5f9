#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "transient/scene_model.hpp"

namespace transient {

struct RenderSettings {
    int angular_resolution = 64;   // directional grid is angular_resolution^2
    double soft_sigma_bins = 0.5;  // soft-binning Gaussian width, in bins
    std::int64_t mc_rays = 100000; // rays for Monte-Carlo depth-map rendering
    std::uint64_t seed = 0;
};

// Differentiable render: soft-binned flux plus analytic per-bin gradients
// with respect to the plane tilt and intercept.
struct SoftRenderOutput {
    TransientHistogram flux;
    std::vector<double> grad_theta;
    std::vector<double> grad_z0;
};

struct McDiagnostics {
    std::int64_t rays_total = 0;
    std::int64_t rays_missed = 0;
};

// Nearest/farthest plane distance visible inside the illumination cone.
// The farthest point always sits at gamma = +fov/2; the nearest is the foot
// of the perpendicular when the plane tilt is smaller than the half cone.
double plane_min_distance(const PlaneParams& plane, double fov_rad);
double plane_max_distance(const PlaneParams& plane, double fov_rad);

// Deterministic integration of the radiometric model over the illumination
// cone, hard-binned by plane-intersection distance. Uniform albedo.
//
// The output is exactly independent of plane.phi_n_rad: azimuth is sampled
// relative to the plane's tilt azimuth, so phi_n never enters the arithmetic.
TransientHistogram render_plane(const PlaneParams& plane, const SensorConfig& config,
                                const RenderSettings& settings, double albedo = 1.0);

// Same integration with Gaussian soft binning (sigma = soft_sigma_bins bin
// depths, window truncated at 6 sigma and renormalized) plus analytic
// gradients of every bin w.r.t. theta_n and z0.
SoftRenderOutput render_plane_soft(const PlaneParams& plane, const SensorConfig& config,
                                   const RenderSettings& settings, double albedo = 1.0);

// Monte-Carlo estimate of the transient of a gridded depth+albedo scene.
// Rays are sampled uniformly over the sensor cone with a counter-based
// per-ray RNG, so the result is bit-identical for any thread count. Rays
// falling outside the scene grid (or beyond the unambiguous range) are
// discarded and tallied; more than 50% misses is an error.
TransientHistogram render_depth_map(const DepthMapScene& scene, const SensorConfig& config,
                                    const RenderSettings& settings,
                                    McDiagnostics* diagnostics = nullptr);

// Circular convolution over the N bins with a centered, unit-sum kernel
// (tap j has offset j - (len-1)/2 bins). Total flux is preserved.
TransientHistogram convolve_pulse(const TransientHistogram& hist, std::span<const double> kernel);

// Straightforward single-threaded implementations kept as references for the
// OpenMP kernels; they recompute all trigonometry and Gaussian weights
// directly instead of using the tabulated/recurrence fast paths.
namespace reference {

TransientHistogram render_plane(const PlaneParams& plane, const SensorConfig& config,
                                const RenderSettings& settings, double albedo = 1.0);

SoftRenderOutput render_plane_soft(const PlaneParams& plane, const SensorConfig& config,
                                   const RenderSettings& settings, double albedo = 1.0);

TransientHistogram render_depth_map(const DepthMapScene& scene, const SensorConfig& config,
                                    const RenderSettings& settings,
                                    McDiagnostics* diagnostics = nullptr);

}  // namespace reference

}  // namespace transient
