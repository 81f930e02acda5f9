#include "transient/scene_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace transient {

SensorConfig make_config(int n_bins, double range_m, double fov_rad,
                         double photons_per_pulse, double bkg_flux) {
    SensorConfig config;
    config.n_bins = n_bins;
    config.rep_rate_hz = 0.5 * kSpeedOfLight / range_m;
    config.bin_time_s = 2.0 * range_m / (kSpeedOfLight * n_bins);
    config.fov_rad = fov_rad;
    config.photons_per_pulse = photons_per_pulse;
    config.bkg_flux = bkg_flux;
    return config;
}

SensorConfig default_config() {
    const double fov = 20.0 * M_PI / 180.0;
    return make_config(512, 10.0, fov, 1.0e5, 1.0e-5);
}

std::vector<double> make_gaussian_pulse_kernel(double sigma_bins) {
    if (!(sigma_bins > 0.0)) throw validation_error("pulse kernel sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_bins));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
        const double v = std::exp(-0.5 * (j / sigma_bins) * (j / sigma_bins));
        kernel[j + radius] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;
    return kernel;
}

std::vector<std::string> validate_config(const SensorConfig& config) {
    std::vector<std::string> violations;
    if (config.n_bins < 1) violations.push_back("n_bins must be >= 1");
    if (!(config.rep_rate_hz > 0.0)) violations.push_back("rep_rate_hz must be > 0");
    if (!(config.bin_time_s > 0.0)) violations.push_back("bin_time_s must be > 0");
    if (config.rep_rate_hz > 0.0 && config.bin_time_s > 0.0 && config.n_bins >= 1) {
        // floor(1/(f*dt)) with a small absolute slack for float dust in the
        // quotient; the paper's own 15 MHz / 130.2 ps / 512 triple needs it.
        const double quotient = 1.0 / (config.rep_rate_hz * config.bin_time_s);
        if (config.n_bins != static_cast<int>(std::floor(quotient + 1e-9)))
            violations.push_back("n_bins must equal floor(1 / (rep_rate_hz * bin_time_s))");
        if (!(config.max_range_m() > 0.0))
            violations.push_back("unambiguous range c/(2f) must be > 0");
    }
    if (!(config.fov_rad > 0.0 && config.fov_rad < M_PI))
        violations.push_back("fov_rad must be in (0, pi)");
    if (!(config.photons_per_pulse > 0.0))
        violations.push_back("photons_per_pulse must be > 0");
    if (!(config.bkg_flux >= 0.0)) violations.push_back("bkg_flux must be >= 0");
    if (config.pulse_kernel) {
        double sum = 0.0;
        bool negative = false;
        for (double v : *config.pulse_kernel) {
            if (!(v >= 0.0)) negative = true;
            sum += v;
        }
        if (config.pulse_kernel->empty()) violations.push_back("pulse_kernel must be non-empty");
        if (negative) violations.push_back("pulse_kernel entries must be >= 0");
        else if (!config.pulse_kernel->empty() && std::abs(sum - 1.0) > 1e-9)
            violations.push_back("pulse_kernel must sum to 1 within 1e-9");
    }
    return violations;
}

namespace {

[[noreturn]] void throw_violations(const char* what, const std::vector<std::string>& violations) {
    std::ostringstream msg;
    msg << what << ":";
    for (const auto& v : violations) msg << " [" << v << "]";
    throw validation_error(msg.str());
}

}  // namespace

void require_valid(const SensorConfig& config) {
    const auto violations = validate_config(config);
    if (!violations.empty()) throw_violations("invalid sensor config", violations);
}

double TransientHistogram::total() const {
    return std::accumulate(flux.begin(), flux.end(), 0.0);
}

void require_valid(const TransientHistogram& hist) {
    if (hist.flux.empty()) throw validation_error("transient histogram has no bins");
    if (!(hist.bin_time_s > 0.0)) throw validation_error("transient histogram bin_time_s must be > 0");
    for (size_t i = 0; i < hist.flux.size(); ++i) {
        if (!std::isfinite(hist.flux[i]) || hist.flux[i] < 0.0) {
            throw validation_error("transient flux at bin " + std::to_string(i + 1) +
                                   " must be finite and >= 0");
        }
    }
}

void require_valid(const PlaneParams& plane) {
    std::vector<std::string> violations;
    if (!(plane.z0_m > 0.0)) violations.push_back("z0_m must be > 0");
    if (!(plane.theta_n_rad >= 0.0 && plane.theta_n_rad < M_PI / 2.0))
        violations.push_back("theta_n_rad must be in [0, pi/2)");
    if (!(plane.phi_n_rad >= 0.0 && plane.phi_n_rad < 2.0 * M_PI))
        violations.push_back("phi_n_rad must be in [0, 2*pi)");
    if (!violations.empty()) throw_violations("invalid plane", violations);
}

void require_valid(const DepthMapScene& scene) {
    std::vector<std::string> violations;
    if (scene.width < 1 || scene.height < 1) violations.push_back("grid must be at least 1x1");
    const size_t n = static_cast<size_t>(scene.width) * scene.height;
    if (scene.depth.size() != n) violations.push_back("depth grid size must match width*height");
    if (scene.albedo.size() != n) violations.push_back("albedo grid size must match width*height");
    if (!(scene.fov_rad > 0.0 && scene.fov_rad < M_PI))
        violations.push_back("fov_rad must be in (0, pi)");
    if (scene.depth.size() == n) {
        for (double d : scene.depth) {
            if (!(d > 0.0) || !std::isfinite(d)) {
                violations.push_back("all depths must be finite and > 0");
                break;
            }
        }
    }
    if (scene.albedo.size() == n) {
        for (double a : scene.albedo) {
            if (!(a >= 0.0 && a <= 1.0)) {
                violations.push_back("all albedos must be in [0, 1]");
                break;
            }
        }
    }
    if (!violations.empty()) throw_violations("invalid depth map scene", violations);
}

void require_valid(const SpadHistogram& spad) {
    std::vector<std::string> violations;
    if (spad.cycles < 1) violations.push_back("cycles must be >= 1");
    if (spad.counts.empty()) violations.push_back("spad histogram has no bins");
    std::int64_t sum = 0;
    for (std::int64_t c : spad.counts) {
        if (c < 0) {
            violations.push_back("all counts must be >= 0");
            break;
        }
        sum += c;
    }
    if (spad.mode == SpadMode::synchronous && !spad.counts.empty() && sum != spad.cycles)
        violations.push_back("synchronous counts must sum to cycles");
    if (!violations.empty()) throw_violations("invalid spad histogram", violations);
}

int bin_of_distance(double r_m, const SensorConfig& config) {
    const double r_max = config.max_range_m();
    if (!(r_m >= 0.0) || !(r_m < r_max)) {
        throw validation_error("distance " + std::to_string(r_m) +
                               " m outside the unambiguous range [0, " +
                               std::to_string(r_max) + ")");
    }
    const int bin = static_cast<int>(std::floor(r_m / config.bin_depth_m())) + 1;
    return bin > config.n_bins ? config.n_bins : bin;
}

double distance_of_bin(int bin, const SensorConfig& config) {
    if (bin < 1 || bin > config.n_bins) {
        throw validation_error("bin index " + std::to_string(bin) + " outside 1.." +
                               std::to_string(config.n_bins));
    }
    return (bin - 0.5) * config.bin_depth_m();
}

}  // namespace transient
