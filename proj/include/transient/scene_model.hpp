#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace transient {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Bad input: violated precondition, malformed file, out-of-range argument.
// CLI maps this to exit code 1.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Data-dependent numerical failure: no signal, saturation, divergence.
// CLI maps this to exit code 2.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Laser/sensor parameters. All times in seconds, distances in meters.
struct SensorConfig {
    double rep_rate_hz = 0.0;        // laser repetition frequency f
    double bin_time_s = 0.0;         // sensor time resolution per bin
    int n_bins = 0;                  // N = floor(1 / (f * bin_time))
    double fov_rad = 0.0;            // full illumination cone angle
    double photons_per_pulse = 0.0;  // photons deposited per laser pulse
    double bkg_flux = 0.0;           // ambient + dark counts, photons/bin/cycle
    // Optional discrete laser pulse kernel (unit sum, nonnegative). Absent
    // means an ideal Dirac pulse. Taps are centered: tap j is an offset of
    // j - (len-1)/2 bins.
    std::optional<std::vector<double>> pulse_kernel;

    double max_range_m() const { return 0.5 * kSpeedOfLight / rep_rate_hz; }
    double bin_depth_m() const { return 0.5 * kSpeedOfLight * bin_time_s; }
};

// 512 bins over a 10 m unambiguous range (130.2 ps bins at ~15 MHz) with a
// 20 degree cone, matching the prototype sensor this models.
SensorConfig default_config();

// Config with n_bins spanning range_m exactly.
SensorConfig make_config(int n_bins, double range_m, double fov_rad,
                         double photons_per_pulse, double bkg_flux);

// Discrete Gaussian pulse kernel, truncated at 4 sigma and renormalized.
std::vector<double> make_gaussian_pulse_kernel(double sigma_bins);

// Returns every violated invariant; empty means the config is valid.
std::vector<std::string> validate_config(const SensorConfig& config);

// Throws validation_error listing all violations.
void require_valid(const SensorConfig& config);

// Mean photon flux per time bin per laser cycle (the transient histogram).
struct TransientHistogram {
    std::vector<double> flux;
    double bin_time_s = 0.0;

    int n_bins() const { return static_cast<int>(flux.size()); }
    double total() const;
};

void require_valid(const TransientHistogram& hist);

// Planar scene hypothesis: plane normal (theta_n, phi_n) in spherical
// coordinates, intercepting the optical axis at z0.
struct PlaneParams {
    double z0_m = 1.0;
    double theta_n_rad = 0.0;
    double phi_n_rad = 0.0;
};

void require_valid(const PlaneParams& plane);

// Gridded depth + albedo viewed through a pinhole camera whose square pixel
// grid spans fov_rad corner to corner along each axis in tan space. Row-major,
// top-left origin.
struct DepthMapScene {
    int width = 0;
    int height = 0;
    std::vector<double> depth;   // meters, > 0
    std::vector<double> albedo;  // [0, 1]
    double fov_rad = 0.0;

    double& depth_at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
    double depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    double albedo_at(int x, int y) const { return albedo[static_cast<size_t>(y) * width + x]; }
};

void require_valid(const DepthMapScene& scene);

enum class SpadMode { synchronous, asynchronous };

// Photon counts accumulated over `cycles` laser cycles. Synchronous mode
// carries N+1 counts; bin N+1 holds the cycles with no detection.
struct SpadHistogram {
    std::vector<std::int64_t> counts;
    std::int64_t cycles = 0;
    SpadMode mode = SpadMode::synchronous;
    double bin_time_s = 0.0;

    int n_bins() const {
        int n = static_cast<int>(counts.size());
        return mode == SpadMode::synchronous ? n - 1 : n;
    }
};

void require_valid(const SpadHistogram& spad);

// Bin index in 1..N containing distance r: (i-1)*c*dt/2 <= r < i*c*dt/2.
// Distances in the floor slack between N*c*dt/2 and c/(2f) clamp to bin N.
int bin_of_distance(double r_m, const SensorConfig& config);

// Center distance of bin i: (i - 0.5)*c*dt/2.
double distance_of_bin(int bin, const SensorConfig& config);

}  // namespace transient
