#include "transient/metrics_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "transient/forward_render.hpp"
#include "transient/rng.hpp"
#include "transient/spad_sim.hpp"

namespace transient {

namespace {

void check_shapes(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size())
        throw validation_error("depth grids have different sizes (" +
                               std::to_string(pred.size()) + " vs " + std::to_string(gt.size()) +
                               ")");
    if (gt.empty()) throw validation_error("depth grids are empty");
}

bool valid_pixel(double gt) { return std::isfinite(gt) && gt > 0.0; }

}  // namespace

double abs_rel(std::span<const double> pred, std::span<const double> gt) {
    check_shapes(pred, gt);
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (!valid_pixel(gt[i])) continue;
        sum += std::abs(pred[i] - gt[i]) / gt[i];
        ++n;
    }
    if (n == 0) throw validation_error("empty valid mask");
    return sum / static_cast<double>(n);
}

double rmse(std::span<const double> pred, std::span<const double> gt) {
    check_shapes(pred, gt);
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (!valid_pixel(gt[i])) continue;
        const double d = pred[i] - gt[i];
        sum += d * d;
        ++n;
    }
    if (n == 0) throw validation_error("empty valid mask");
    return std::sqrt(sum / static_cast<double>(n));
}

double log10_err(std::span<const double> pred, std::span<const double> gt) {
    check_shapes(pred, gt);
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (!valid_pixel(gt[i])) continue;
        if (!(pred[i] > 0.0))
            throw validation_error("log10 error requires positive predictions on the valid mask");
        sum += std::abs(std::log10(pred[i]) - std::log10(gt[i]));
        ++n;
    }
    if (n == 0) throw validation_error("empty valid mask");
    return sum / static_cast<double>(n);
}

double threshold_accuracy(std::span<const double> pred, std::span<const double> gt, double thr) {
    check_shapes(pred, gt);
    if (!(thr > 1.0)) throw validation_error("threshold must be > 1");
    size_t hits = 0, n = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (!valid_pixel(gt[i])) continue;
        if (!(pred[i] > 0.0))
            throw validation_error("threshold accuracy requires positive predictions on the valid mask");
        const double delta = std::max(pred[i] / gt[i], gt[i] / pred[i]);
        if (delta < thr) ++hits;
        ++n;
    }
    if (n == 0) throw validation_error("empty valid mask");
    return static_cast<double>(hits) / static_cast<double>(n);
}

double berhu(double x, double c) {
    if (!(c > 0.0)) throw validation_error("berhu threshold c must be > 0");
    const double ax = std::abs(x);
    return ax <= c ? ax : (x * x + c * c) / (2.0 * c);
}

namespace {

struct CellResult {
    // Mean absolute errors over the seeds where each method produced an
    // estimate; NaN if a method failed on every seed.
    double mae_z0_theo, mae_theta_theo, mae_z0_abs, mae_theta_abs;
};

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

CellResult evaluate_cell(const SweepOptions& options, const SensorConfig& config, double z0,
                         double theta, const std::vector<std::uint64_t>& seeds) {
    const PlaneParams truth{z0, theta, 0.0};
    RenderSettings settings;
    settings.angular_resolution = options.render_angular_resolution;

    double sz_t = 0, st_t = 0, sz_a = 0, st_a = 0;
    int n_t = 0, n_a = 0;
    for (size_t s = 0; s < seeds.size(); ++s) {
        TransientHistogram measured;
        SensorConfig cell_config = config;
        try {
            const TransientHistogram clean = render_plane(truth, config, settings);
            if (options.cycles > 0) {
                // Laser power rescaled to the photon budget; background stays.
                const double laser_total =
                    clean.total() - config.bkg_flux * config.n_bins;
                if (!(laser_total > 0.0)) throw numeric_error("no laser flux returned");
                const double scale = options.photon_budget / laser_total;
                cell_config.photons_per_pulse = config.photons_per_pulse * scale;
                TransientHistogram scaled = clean;
                for (double& v : scaled.flux)
                    v = (v - config.bkg_flux) * scale + config.bkg_flux;
                const SpadHistogram spad =
                    simulate_synchronous_spad(scaled, options.cycles, seeds[s]);
                measured = estimate_transient_lowflux(spad);
            } else {
                measured = clean;
            }
        } catch (const std::exception&) {
            continue;  // cell unrenderable for this seed: both methods fail
        }

        try {
            const PlaneEstimate theo =
                estimate_plane_theoretical(measured, cell_config, options.threshold_frac);
            sz_t += std::abs(theo.z0_m - z0);
            st_t += std::abs(theo.theta_n_rad - theta);
            ++n_t;
        } catch (const std::exception&) {
        }
        try {
            const PlaneEstimate abs_est =
                estimate_plane_abs(measured, cell_config, options.abs_config);
            sz_a += std::abs(abs_est.z0_m - z0);
            st_a += std::abs(abs_est.theta_n_rad - theta);
            ++n_a;
        } catch (const std::exception&) {
        }
    }
    CellResult result;
    result.mae_z0_theo = n_t > 0 ? sz_t / n_t : kNan;
    result.mae_theta_theo = n_t > 0 ? st_t / n_t : kNan;
    result.mae_z0_abs = n_a > 0 ? sz_a / n_a : kNan;
    result.mae_theta_abs = n_a > 0 ? st_a / n_a : kNan;
    return result;
}

}  // namespace

SweepReport run_sweep(const SweepOptions& options, const SensorConfig& config) {
    require_valid(config);
    if (options.z0_values.empty() || options.theta_values.empty())
        throw validation_error("sweep grids must be non-empty");
    if (options.n_seeds < 1) throw validation_error("n_seeds must be >= 1");
    if (options.cycles < 0) throw validation_error("cycles must be >= 0");
    if (options.cycles > 0 && !(options.photon_budget > 0.0))
        throw validation_error("photon_budget must be > 0");
    for (double z : options.z0_values)
        if (!(z > 0.0)) throw validation_error("z0 grid values must be > 0");
    for (double t : options.theta_values)
        if (!(t >= 0.0 && t < M_PI / 2.0))
            throw validation_error("theta grid values must be in [0, pi/2)");

    const int nz = static_cast<int>(options.z0_values.size());
    const int nt = static_cast<int>(options.theta_values.size());
    const int n_cells = nz * nt;

    SweepReport report;
    report.z0_values = options.z0_values;
    report.theta_values = options.theta_values;
    report.cycles = options.cycles;
    report.photon_budget = options.cycles > 0 ? options.photon_budget : 0.0;
    report.seeds.resize(options.n_seeds);
    for (int s = 0; s < options.n_seeds; ++s)
        report.seeds[s] = seed_stream(options.base_seed, static_cast<std::uint64_t>(s));

    std::vector<CellResult> cells(n_cells);
#pragma omp parallel for schedule(dynamic)
    for (int idx = 0; idx < n_cells; ++idx) {
        const int iz = idx / nt;
        const int it = idx % nt;
        std::vector<std::uint64_t> seeds(options.n_seeds);
        for (int s = 0; s < options.n_seeds; ++s)
            seeds[s] = seed_stream(report.seeds[s], static_cast<std::uint64_t>(idx));
        cells[idx] = evaluate_cell(options, config, options.z0_values[iz],
                                   options.theta_values[it], seeds);
    }

    report.mae_z0_theoretical.resize(n_cells);
    report.mae_z0_abs.resize(n_cells);
    report.mae_theta_theoretical.resize(n_cells);
    report.mae_theta_abs.resize(n_cells);
    int wins_z0 = 0, wins_theta = 0;
    for (int idx = 0; idx < n_cells; ++idx) {
        const CellResult& c = cells[idx];
        report.mae_z0_theoretical[idx] = c.mae_z0_theo;
        report.mae_z0_abs[idx] = c.mae_z0_abs;
        report.mae_theta_theoretical[idx] = c.mae_theta_theo;
        report.mae_theta_abs[idx] = c.mae_theta_abs;
        const bool theo_ok = !std::isnan(c.mae_z0_theo);
        const bool abs_ok = !std::isnan(c.mae_z0_abs);
        if (!theo_ok && !abs_ok) {
            ++report.invalid_cells;
            continue;
        }
        ++report.valid_cells;
        if (abs_ok && (!theo_ok || c.mae_z0_abs <= c.mae_z0_theo)) ++wins_z0;
        if (abs_ok && (!theo_ok || c.mae_theta_abs <= c.mae_theta_theo)) ++wins_theta;
    }
    if (report.valid_cells > 0) {
        report.win_fraction_z0 = static_cast<double>(wins_z0) / report.valid_cells;
        report.win_fraction_theta = static_cast<double>(wins_theta) / report.valid_cells;
    }
    return report;
}

}  // namespace transient
