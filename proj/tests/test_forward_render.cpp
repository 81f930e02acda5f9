#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "transient/forward_render.hpp"
#include "transient/rng.hpp"

using namespace transient;
using test_support::l1_distance;
using test_support::laser_total;
using test_support::planar_scene;

namespace {

const double kDeg = M_PI / 180.0;

// Eq-3 distance scan over the signed cone slice; the 3D minimum/maximum
// always lie in the tilt plane.
double min_distance_by_scan(double z0, double theta, double fov) {
    double best = 1e30;
    for (int i = 0; i <= 100000; ++i) {
        const double gamma = -0.5 * fov + fov * i / 100000.0;
        best = std::min(best, z0 * std::cos(theta) / std::cos(gamma + theta));
    }
    return best;
}

}  // namespace

TEST_CASE("fronto-parallel plane at 1 m: support confined to bins 52..53") {
    const SensorConfig config = default_config();
    const TransientHistogram hist = render_plane(PlaneParams{1.0, 0.0, 0.0}, config, {});
    // Oracle: support spans [1, 1/cos(10 deg)] ~ [1, 1.0154] m.
    const int lo = bin_of_distance(1.0, config);
    const int hi = bin_of_distance(1.0 / std::cos(10.0 * kDeg), config);
    CHECK(lo == 52);
    CHECK(hi >= 52);
    CHECK(hi <= 53);
    for (int i = 0; i < config.n_bins; ++i) {
        if (i + 1 < lo || i + 1 > hi) CHECK(hist.flux[i] == config.bkg_flux);
        else CHECK(hist.flux[i] > config.bkg_flux);
    }
}

TEST_CASE("total flux is invariant under (albedo*a, photons/a) for power-of-two a") {
    const SensorConfig config = default_config();
    const PlaneParams plane{2.0, 25.0 * kDeg, 0.0};
    SplitMix64 rng(42);
    for (int draw = 0; draw < 10; ++draw) {
        const double alpha = std::ldexp(1.0, static_cast<int>(rng.next() % 13) - 6);
        SensorConfig scaled = config;
        scaled.photons_per_pulse = config.photons_per_pulse / alpha;
        const TransientHistogram a = render_plane(plane, config, {}, 1.0);
        const TransientHistogram b = render_plane(plane, scaled, {}, alpha);
        REQUIRE(a.flux.size() == b.flux.size());
        for (size_t i = 0; i < a.flux.size(); ++i) CHECK(a.flux[i] == b.flux[i]);
    }
}

TEST_CASE("render_plane is bit-identical for any phi_n") {
    const SensorConfig config = default_config();
    const TransientHistogram base = render_plane(PlaneParams{2.0, 25.0 * kDeg, 0.0}, config, {});
    for (double phi : {0.7, M_PI, 5.5}) {
        const TransientHistogram other =
            render_plane(PlaneParams{2.0, 25.0 * kDeg, phi}, config, {});
        for (size_t i = 0; i < base.flux.size(); ++i) CHECK(base.flux[i] == other.flux[i]);
    }
}

TEST_CASE("radiometric fall-off: doubling z0 scales total laser flux by 1/16") {
    SensorConfig config = default_config();
    config.bkg_flux = 0.0;
    const TransientHistogram near = render_plane(PlaneParams{1.5, 0.0, 0.0}, config, {});
    const TransientHistogram far = render_plane(PlaneParams{3.0, 0.0, 0.0}, config, {});
    CHECK(near.total() == doctest::Approx(16.0 * far.total()).epsilon(1e-12));
}

TEST_CASE("fronto-parallel per-bin flux matches the closed-form integral") {
    SensorConfig config = default_config();
    config.bkg_flux = 0.0;
    const double z0 = 2.0;
    RenderSettings settings;
    settings.angular_resolution = 512;
    const TransientHistogram hist = render_plane(PlaneParams{z0, 0.0, 0.0}, config, settings);

    // For theta_n = 0: flux over gamma in [g0, g1] integrates to
    // 2 pi coeff / (5 z0^4) * (cos^5 g0 - cos^5 g1), with gamma(r) = acos(z0/r).
    const double half_fov = 0.5 * config.fov_rad;
    const double coeff = config.photons_per_pulse /
                         (4.0 * M_PI * M_PI * (1.0 - std::cos(half_fov)));
    const double r_min = z0, r_max_plane = z0 / std::cos(half_fov);
    auto analytic_bin = [&](int bin) {
        const double lo = std::max(r_min, (bin - 1) * config.bin_depth_m());
        const double hi = std::min(r_max_plane, bin * config.bin_depth_m());
        if (hi <= lo) return 0.0;
        const double c0 = z0 / lo, c1 = z0 / hi;  // cos(gamma) at the bounds
        return 2.0 * M_PI * coeff / (5.0 * z0 * z0 * z0 * z0) *
               (std::pow(c0, 5) - std::pow(c1, 5));
    };
    const double total = hist.total();
    double analytic_total = 0.0;
    for (int bin = 1; bin <= config.n_bins; ++bin) {
        const double expected = analytic_bin(bin);
        analytic_total += expected;
        CHECK(std::abs(hist.flux[bin - 1] - expected) <= 0.01 * total);
    }
    CHECK(total == doctest::Approx(analytic_total).epsilon(1e-4));
}

TEST_CASE("albedo-depth ambiguity: constructed pair yields equal peaks") {
    SensorConfig config = default_config();
    config.bkg_flux = 0.0;
    // Both supports are single-bin: [1, 1.0154] in bin 52; [0.845, 0.858] in 44.
    const double z  = 1.0;
    const double zp = 0.845;
    const double rho_p = std::pow(zp / z, 4.0);
    const TransientHistogram a = render_plane(PlaneParams{z, 0.0, 0.0}, config, {}, 1.0);
    const TransientHistogram b = render_plane(PlaneParams{zp, 0.0, 0.0}, config, {}, rho_p);
    const int peak_a = static_cast<int>(std::max_element(a.flux.begin(), a.flux.end()) -
                                        a.flux.begin()) + 1;
    const int peak_b = static_cast<int>(std::max_element(b.flux.begin(), b.flux.end()) -
                                        b.flux.begin()) + 1;
    CHECK(peak_a == 52);
    CHECK(peak_b == 44);
    CHECK(a.flux[peak_a - 1] == doctest::Approx(b.flux[peak_b - 1]).epsilon(1e-12));
}

TEST_CASE("leading edge equals the bin of the minimum cone distance") {
    const SensorConfig config = default_config();
    for (auto [z0, theta_deg] : {std::pair{1.0, 30.0}, {2.5, 12.0}, {4.0, 5.0}, {3.0, 45.0}}) {
        const PlaneParams plane{z0, theta_deg * kDeg, 0.0};
        const TransientHistogram hist = render_plane(plane, config, {});
        int leading = 0;
        for (int i = 0; i < config.n_bins; ++i) {
            if (hist.flux[i] > config.bkg_flux + 1e-15) {
                leading = i + 1;
                break;
            }
        }
        const double r_min = min_distance_by_scan(z0, plane.theta_n_rad, config.fov_rad);
        CHECK(leading == bin_of_distance(r_min, config));
        CHECK(plane_min_distance(plane, config.fov_rad) == doctest::Approx(r_min).epsilon(1e-6));
    }
}

TEST_CASE("render errors name the first offending direction") {
    const SensorConfig config = default_config();
    // Far edge beyond the unambiguous range.
    CHECK_THROWS_AS(render_plane(PlaneParams{9.8, 30.0 * kDeg, 0.0}, config, {}), numeric_error);
    try {
        render_plane(PlaneParams{9.8, 30.0 * kDeg, 0.0}, config, {});
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("gamma=") != std::string::npos);
    }
    // Grazing plane.
    CHECK_THROWS_AS(render_plane(PlaneParams{1.0, 87.0 * kDeg, 0.0}, config, {}), numeric_error);
    // Invalid plane parameters are validation errors.
    CHECK_THROWS_AS(render_plane(PlaneParams{-1.0, 0.0, 0.0}, config, {}), validation_error);
}

TEST_CASE("convolve_pulse: identity, mass conservation, 3-tap spread") {
    const SensorConfig config = default_config();
    TransientHistogram spike;
    spike.bin_time_s = config.bin_time_s;
    spike.flux.assign(config.n_bins, 0.0);
    spike.flux[99] = 2.0;

    const std::vector<double> delta{1.0};
    const TransientHistogram same = convolve_pulse(spike, delta);
    for (int i = 0; i < config.n_bins; ++i) CHECK(same.flux[i] == spike.flux[i]);

    const std::vector<double> taps{0.25, 0.5, 0.25};
    const TransientHistogram spread = convolve_pulse(spike, taps);
    CHECK(spread.flux[98] == doctest::Approx(0.5));
    CHECK(spread.flux[99] == doctest::Approx(1.0));
    CHECK(spread.flux[100] == doctest::Approx(0.5));
    CHECK(spread.total() == doctest::Approx(spike.total()).epsilon(1e-9));

    const TransientHistogram smooth = convolve_pulse(spike, make_gaussian_pulse_kernel(1.5));
    CHECK(smooth.total() == doctest::Approx(spike.total()).epsilon(1e-9));

    CHECK_THROWS_AS(convolve_pulse(spike, std::vector<double>(513, 1.0 / 513)),
                    validation_error);
    CHECK_THROWS_AS(convolve_pulse(spike, std::vector<double>{0.7, 0.7}), validation_error);
}

TEST_CASE("configs with a pulse kernel convolve the laser component") {
    SensorConfig config = default_config();
    const PlaneParams plane{2.0, 20.0 * kDeg, 0.0};
    const TransientHistogram plain = render_plane(plane, config, {});
    config.pulse_kernel = make_gaussian_pulse_kernel(2.0);
    const TransientHistogram convolved = render_plane(plane, config, {});

    TransientHistogram laser = plain;
    for (double& v : laser.flux) v -= default_config().bkg_flux;
    TransientHistogram expected = convolve_pulse(laser, *config.pulse_kernel);
    for (double& v : expected.flux) v += config.bkg_flux;
    for (int i = 0; i < config.n_bins; ++i)
        CHECK(convolved.flux[i] == doctest::Approx(expected.flux[i]).epsilon(1e-12));
}

TEST_CASE("soft render approaches the hard render as sigma shrinks") {
    const SensorConfig config = default_config();
    const PlaneParams plane{2.0, 25.0 * kDeg, 0.0};
    RenderSettings settings;
    settings.soft_sigma_bins = 0.25;
    const TransientHistogram hard = render_plane(plane, config, settings);
    const SoftRenderOutput soft = render_plane_soft(plane, config, settings);
    const double total = laser_total(hard, config.bkg_flux);
    CHECK(l1_distance(hard.flux, soft.flux.flux) < 0.02 * total);
    // Soft binning redistributes but conserves the deposited mass.
    CHECK(laser_total(soft.flux, config.bkg_flux) == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("soft-render analytic gradients match central finite differences") {
    const SensorConfig config = default_config();
    RenderSettings settings;
    SplitMix64 rng(7);
    for (int draw = 0; draw < 5; ++draw) {
        const double z0 = 0.8 + 6.0 * rng.uniform();
        const double theta = (2.0 + 40.0 * rng.uniform()) * kDeg;
        const SoftRenderOutput out = render_plane_soft(PlaneParams{z0, theta, 0.0}, config, settings);
        const double h = 1e-4;
        const auto fp_z = render_plane_soft(PlaneParams{z0 + h, theta, 0.0}, config, settings);
        const auto fm_z = render_plane_soft(PlaneParams{z0 - h, theta, 0.0}, config, settings);
        const auto fp_t = render_plane_soft(PlaneParams{z0, theta + h, 0.0}, config, settings);
        const auto fm_t = render_plane_soft(PlaneParams{z0, theta - h, 0.0}, config, settings);
        for (int i = 0; i < config.n_bins; ++i) {
            const double fd_z = (fp_z.flux.flux[i] - fm_z.flux.flux[i]) / (2.0 * h);
            const double fd_t = (fp_t.flux.flux[i] - fm_t.flux.flux[i]) / (2.0 * h);
            if (std::abs(out.grad_z0[i]) > 1e-9)
                CHECK(std::abs(fd_z - out.grad_z0[i]) / std::abs(out.grad_z0[i]) < 1e-3);
            if (std::abs(out.grad_theta[i]) > 1e-9)
                CHECK(std::abs(fd_t - out.grad_theta[i]) / std::abs(out.grad_theta[i]) < 1e-3);
        }
    }
}

TEST_CASE("fronto-parallel render is first-order stationary in theta") {
    const SensorConfig config = default_config();
    const SoftRenderOutput out = render_plane_soft(PlaneParams{2.0, 0.0, 0.0}, config, {});
    double sum_gt = 0.0, sum_gz = 0.0;
    for (int i = 0; i < config.n_bins; ++i) {
        sum_gt += std::abs(out.grad_theta[i]);
        sum_gz += std::abs(out.grad_z0[i]);
    }
    CHECK(sum_gt <= 1e-9 * (sum_gz + 1.0));
}

TEST_CASE("depth-map render: fronto-parallel wall lands in bins 103..104") {
    SensorConfig config = default_config();
    config.fov_rad = 10.0 * kDeg;
    const DepthMapScene scene = planar_scene(128, 2.0, 0.0, config.fov_rad);
    RenderSettings settings;
    settings.mc_rays = 200000;
    settings.seed = 3;
    McDiagnostics diag;
    const TransientHistogram hist = render_depth_map(scene, config, settings, &diag);
    CHECK(diag.rays_total == settings.mc_rays);
    CHECK(diag.rays_missed == 0);
    for (int i = 0; i < config.n_bins; ++i) {
        const double laser = hist.flux[i] - config.bkg_flux;
        if (i + 1 == 103) CHECK(laser > 0.0);
        else if (i + 1 == 104) CHECK(laser >= 0.0);
        else CHECK(laser == 0.0);
    }
    CHECK(hist.flux[102] > hist.flux[103]);
}

TEST_CASE("depth-map render: zero albedo leaves only background") {
    const SensorConfig config = default_config();
    DepthMapScene scene = planar_scene(32, 2.0, 0.0, config.fov_rad);
    scene.albedo.assign(scene.albedo.size(), 0.0);
    RenderSettings settings;
    settings.mc_rays = 20000;
    settings.seed = 5;
    const TransientHistogram hist = render_depth_map(scene, config, settings);
    for (double v : hist.flux) CHECK(v == config.bkg_flux);
}

TEST_CASE("depth-map render: rays outside the scene grid are tallied; >50% errors") {
    SensorConfig config = default_config();
    DepthMapScene scene = planar_scene(32, 2.0, 0.0, config.fov_rad);
    scene.fov_rad = 0.5 * config.fov_rad;  // scene covers only part of the cone
    RenderSettings settings;
    settings.mc_rays = 50000;
    settings.seed = 5;
    CHECK_THROWS_AS(render_depth_map(scene, config, settings), numeric_error);

    scene.fov_rad = 0.95 * config.fov_rad;
    McDiagnostics diag;
    render_depth_map(scene, config, settings, &diag);
    CHECK(diag.rays_missed > 0);
    CHECK(2 * diag.rays_missed < diag.rays_total);
}

TEST_CASE("depth-map render: doubling rays halves the variance of a fixed bin") {
    SensorConfig config = default_config();
    config.fov_rad = 10.0 * kDeg;
    const DepthMapScene scene = planar_scene(64, 2.0, 8.0 * kDeg, config.fov_rad);
    const int probe_bin = 103;
    auto variance_at = [&](std::int64_t rays) {
        RenderSettings settings;
        settings.mc_rays = rays;
        double sum = 0.0, sum2 = 0.0;
        const int n_seeds = 150;
        for (int s = 0; s < n_seeds; ++s) {
            settings.seed = 1000 + s;
            const double v = render_depth_map(scene, config, settings).flux[probe_bin - 1];
            sum += v;
            sum2 += v * v;
        }
        return (sum2 - sum * sum / n_seeds) / (n_seeds - 1);
    };
    const double ratio = variance_at(20000) / variance_at(40000);
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.8);
}

TEST_CASE("depth-map render converges to the analytic plane render") {
    const SensorConfig config = default_config();
    const PlaneParams plane{2.0, 20.0 * kDeg, 0.0};
    const DepthMapScene scene = planar_scene(256, plane.z0_m, plane.theta_n_rad, config.fov_rad);
    RenderSettings settings;
    settings.mc_rays = 400000;
    settings.seed = 11;
    const TransientHistogram mc = render_depth_map(scene, config, settings);
    const TransientHistogram analytic = render_plane(plane, config, settings);
    CHECK(l1_distance(mc.flux, analytic.flux) < 0.05 * laser_total(analytic, config.bkg_flux));
}
