#include "transient/forward_render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "transient/rng.hpp"

namespace transient {

namespace {

constexpr double kSoftWindowSigmas = 6.0;

void validate_settings(const RenderSettings& settings) {
    std::vector<std::string> violations;
    if (settings.angular_resolution < 16) violations.push_back("angular_resolution must be >= 16");
    if (!(settings.soft_sigma_bins > 0.0)) violations.push_back("soft_sigma_bins must be > 0");
    if (settings.mc_rays < 1) violations.push_back("mc_rays must be >= 1");
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid render settings:";
        for (const auto& v : violations) msg << " [" << v << "]";
        throw validation_error(msg.str());
    }
}

void validate_albedo(double albedo) {
    if (!(albedo >= 0.0) || !std::isfinite(albedo))
        throw validation_error("albedo must be finite and >= 0");
}

// Fixed geometric/radiometric quantities of one plane render.
struct PlaneRenderCtx {
    int n;             // angular grid resolution per axis
    int n_bins;
    double dgamma, dbeta;
    double bin_depth, r_max;
    double z0, cos_th, sin_th, tan_th;
    double coeff;      // albedo * photons * cos(theta_n) / (4 pi^2 (1 - cos(fov/2)))
};

PlaneRenderCtx make_plane_ctx(const PlaneParams& plane, const SensorConfig& config,
                              const RenderSettings& settings, double albedo) {
    require_valid(config);
    require_valid(plane);
    validate_settings(settings);
    validate_albedo(albedo);
    PlaneRenderCtx ctx;
    ctx.n = settings.angular_resolution;
    ctx.n_bins = config.n_bins;
    ctx.dgamma = 0.5 * config.fov_rad / ctx.n;
    ctx.dbeta = 2.0 * M_PI / ctx.n;
    ctx.bin_depth = config.bin_depth_m();
    ctx.r_max = config.max_range_m();
    ctx.z0 = plane.z0_m;
    ctx.cos_th = std::cos(plane.theta_n_rad);
    ctx.sin_th = std::sin(plane.theta_n_rad);
    ctx.tan_th = ctx.sin_th / ctx.cos_th;
    ctx.coeff = albedo * config.photons_per_pulse * ctx.cos_th /
                (4.0 * M_PI * M_PI * (1.0 - std::cos(0.5 * config.fov_rad)));
    return ctx;
}

// First invalid direction found in a row, for error reporting.
struct RowFault {
    int beta_index = -1;
    double gamma = 0.0, beta = 0.0, r = 0.0;
    bool grazing = false;
};

[[noreturn]] void throw_fault(const RowFault& fault, double r_max) {
    std::ostringstream msg;
    if (fault.grazing) {
        msg << "plane grazing at direction (gamma=" << fault.gamma * 180.0 / M_PI
            << " deg, beta=" << fault.beta * 180.0 / M_PI << " deg)";
    } else {
        msg << "plane exits the unambiguous range at direction (gamma="
            << fault.gamma * 180.0 / M_PI << " deg, beta=" << fault.beta * 180.0 / M_PI
            << " deg): r=" << fault.r << " m >= " << r_max << " m";
    }
    throw numeric_error(msg.str());
}

inline int hard_bin(double r, double bin_depth, int n_bins) {
    const int bin = static_cast<int>(r / bin_depth) + 1;
    return bin > n_bins ? n_bins : bin;
}

// One gamma row of the hard-binned integration. Azimuth is measured relative
// to the plane's tilt azimuth, which cancels phi_n exactly.
bool accumulate_row_hard(const PlaneRenderCtx& ctx, int row, const std::vector<double>& cos_beta,
                         double* out, RowFault* fault) {
    const double gamma = (row + 0.5) * ctx.dgamma;
    const double sg = std::sin(gamma), cg = std::cos(gamma);
    const double w_row = sg * ctx.dgamma * ctx.dbeta;
    for (int k = 0; k < ctx.n; ++k) {
        const double denom = ctx.cos_th * cg + ctx.sin_th * sg * cos_beta[k];
        if (denom <= 1e-12) {
            *fault = {k, gamma, (k + 0.5) * ctx.dbeta, 0.0, true};
            return false;
        }
        const double r = ctx.z0 * ctx.cos_th / denom;
        if (r >= ctx.r_max) {
            *fault = {k, gamma, (k + 0.5) * ctx.dbeta, r, false};
            return false;
        }
        const double r2 = r * r;
        out[hard_bin(r, ctx.bin_depth, ctx.n_bins) - 1] += w_row * ctx.coeff / (r2 * r2);
    }
    return true;
}

// One gamma row of the soft-binned integration with analytic gradients.
// Gaussians over the window are evaluated by the exp recurrence
// G_{i+1} = G_i * A * B^(i-lo), checked against direct evaluation by the
// serial reference.
bool accumulate_row_soft(const PlaneRenderCtx& ctx, int row, const std::vector<double>& cos_beta,
                         double sigma_d, double exp_b, double* out_flux, double* out_gth,
                         double* out_gz0, double* g_scratch, RowFault* fault) {
    const double gamma = (row + 0.5) * ctx.dgamma;
    const double sg = std::sin(gamma), cg = std::cos(gamma);
    const double w_row = sg * ctx.dgamma * ctx.dbeta;
    const double h = ctx.bin_depth / sigma_d;
    const double window = kSoftWindowSigmas * sigma_d;
    for (int k = 0; k < ctx.n; ++k) {
        const double denom = ctx.cos_th * cg + ctx.sin_th * sg * cos_beta[k];
        if (denom <= 1e-12) {
            *fault = {k, gamma, (k + 0.5) * ctx.dbeta, 0.0, true};
            return false;
        }
        const double r = ctx.z0 * ctx.cos_th / denom;
        if (r >= ctx.r_max) {
            *fault = {k, gamma, (k + 0.5) * ctx.dbeta, r, false};
            return false;
        }
        const double r2 = r * r;
        const double flux_s = w_row * ctx.coeff / (r2 * r2);
        const double dr_dz0 = r / ctx.z0;
        const double dr_dth = -ctx.z0 * sg * cos_beta[k] / (denom * denom);
        const double dflux_dz0 = -4.0 * flux_s / r * dr_dz0;
        const double dflux_dth = -ctx.tan_th * flux_s - 4.0 * flux_s / r * dr_dth;

        int lo = static_cast<int>(std::ceil((r - window) / ctx.bin_depth + 0.5));
        int hi = static_cast<int>(std::floor((r + window) / ctx.bin_depth + 0.5));
        lo = std::max(lo, 1);
        hi = std::min(hi, ctx.n_bins);
        if (lo > hi) {
            // Window too narrow to cover a bin center: hard-binning limit.
            out_flux[hard_bin(r, ctx.bin_depth, ctx.n_bins) - 1] += flux_s;
            continue;
        }
        const double t_lo = ((lo - 0.5) * ctx.bin_depth - r) / sigma_d;
        double g = std::exp(-0.5 * t_lo * t_lo);
        double ratio = std::exp(-h * t_lo - 0.5 * h * h);
        double sum_g = 0.0, sum_gt = 0.0;
        double t = t_lo;
        for (int i = lo; i <= hi; ++i) {
            g_scratch[i - lo] = g;
            sum_g += g;
            sum_gt += g * t;
            g *= ratio;
            ratio *= exp_b;
            t += h;
        }
        const double inv_sum = 1.0 / sum_g;
        const double t_mean = sum_gt * inv_sum;
        t = t_lo;
        for (int i = lo; i <= hi; ++i) {
            const double gi = g_scratch[i - lo] * inv_sum;
            const double dgi_dr = gi * (t - t_mean) / sigma_d;
            out_flux[i - 1] += flux_s * gi;
            out_gz0[i - 1] += dflux_dz0 * gi + flux_s * dgi_dr * dr_dz0;
            out_gth[i - 1] += dflux_dth * gi + flux_s * dgi_dr * dr_dth;
            t += h;
        }
    }
    return true;
}

std::vector<double> beta_cosines(int n) {
    std::vector<double> cos_beta(n);
    const double dbeta = 2.0 * M_PI / n;
    for (int k = 0; k < n; ++k) cos_beta[k] = std::cos((k + 0.5) * dbeta);
    return cos_beta;
}

void check_faults(const std::vector<char>& row_ok, const std::vector<RowFault>& faults,
                  double r_max) {
    for (size_t j = 0; j < row_ok.size(); ++j)
        if (!row_ok[j]) throw_fault(faults[j], r_max);
}

void apply_kernel_and_background(const SensorConfig& config, std::vector<double>& flux) {
    if (config.pulse_kernel) {
        TransientHistogram laser{flux, config.bin_time_s};
        flux = convolve_pulse(laser, *config.pulse_kernel).flux;
    }
    for (double& v : flux) v += config.bkg_flux;
}

}  // namespace

double plane_min_distance(const PlaneParams& plane, double fov_rad) {
    const double inner = std::max(0.0, plane.theta_n_rad - 0.5 * fov_rad);
    return plane.z0_m * std::cos(plane.theta_n_rad) / std::cos(inner);
}

double plane_max_distance(const PlaneParams& plane, double fov_rad) {
    return plane.z0_m * std::cos(plane.theta_n_rad) / std::cos(plane.theta_n_rad + 0.5 * fov_rad);
}

TransientHistogram render_plane(const PlaneParams& plane, const SensorConfig& config,
                                const RenderSettings& settings, double albedo) {
    const PlaneRenderCtx ctx = make_plane_ctx(plane, config, settings, albedo);
    const auto cos_beta = beta_cosines(ctx.n);

    std::vector<double> rows(static_cast<size_t>(ctx.n) * ctx.n_bins, 0.0);
    std::vector<char> row_ok(ctx.n, 1);
    std::vector<RowFault> faults(ctx.n);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ctx.n; ++j) {
        row_ok[j] = accumulate_row_hard(ctx, j, cos_beta, rows.data() + static_cast<size_t>(j) * ctx.n_bins,
                                        &faults[j]);
    }
    check_faults(row_ok, faults, ctx.r_max);

    TransientHistogram hist;
    hist.bin_time_s = config.bin_time_s;
    hist.flux.assign(ctx.n_bins, 0.0);
    for (int j = 0; j < ctx.n; ++j) {
        const double* row = rows.data() + static_cast<size_t>(j) * ctx.n_bins;
        for (int i = 0; i < ctx.n_bins; ++i) hist.flux[i] += row[i];
    }
    apply_kernel_and_background(config, hist.flux);
    return hist;
}

SoftRenderOutput render_plane_soft(const PlaneParams& plane, const SensorConfig& config,
                                   const RenderSettings& settings, double albedo) {
    const PlaneRenderCtx ctx = make_plane_ctx(plane, config, settings, albedo);
    const auto cos_beta = beta_cosines(ctx.n);
    const double sigma_d = settings.soft_sigma_bins * ctx.bin_depth;
    const double h = ctx.bin_depth / sigma_d;
    const double exp_b = std::exp(-h * h);
    const int max_window = static_cast<int>(2.0 * kSoftWindowSigmas * settings.soft_sigma_bins) + 3;

    const size_t stride = static_cast<size_t>(ctx.n_bins);
    std::vector<double> rows(static_cast<size_t>(ctx.n) * stride * 3, 0.0);
    std::vector<char> row_ok(ctx.n, 1);
    std::vector<RowFault> faults(ctx.n);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < ctx.n; ++j) {
        std::vector<double> scratch(std::min(max_window, ctx.n_bins));
        double* base = rows.data() + static_cast<size_t>(j) * stride * 3;
        row_ok[j] = accumulate_row_soft(ctx, j, cos_beta, sigma_d, exp_b, base, base + stride,
                                        base + 2 * stride, scratch.data(), &faults[j]);
    }
    check_faults(row_ok, faults, ctx.r_max);

    SoftRenderOutput out;
    out.flux.bin_time_s = config.bin_time_s;
    out.flux.flux.assign(ctx.n_bins, 0.0);
    out.grad_theta.assign(ctx.n_bins, 0.0);
    out.grad_z0.assign(ctx.n_bins, 0.0);
    for (int j = 0; j < ctx.n; ++j) {
        const double* base = rows.data() + static_cast<size_t>(j) * stride * 3;
        for (int i = 0; i < ctx.n_bins; ++i) {
            out.flux.flux[i] += base[i];
            out.grad_theta[i] += base[stride + i];
            out.grad_z0[i] += base[2 * stride + i];
        }
    }
    if (config.pulse_kernel) {
        const auto& kernel = *config.pulse_kernel;
        TransientHistogram tmp{out.grad_theta, config.bin_time_s};
        out.grad_theta = convolve_pulse(tmp, kernel).flux;
        tmp.flux = out.grad_z0;
        out.grad_z0 = convolve_pulse(tmp, kernel).flux;
    }
    apply_kernel_and_background(config, out.flux.flux);
    return out;
}

namespace {

// Cosine-adjusted albedo per pixel: albedo times the z component of the
// surface normal, from central differences of the 3D point grid (one-sided
// at borders), clamped at zero.
std::vector<double> cosine_adjusted_albedo(const DepthMapScene& scene) {
    const int w = scene.width, h = scene.height;
    const double tan_h = std::tan(0.5 * scene.fov_rad);
    auto tan_x = [&](int x) { return (2.0 * (x + 0.5) / w - 1.0) * tan_h; };
    auto tan_y = [&](int y) { return (2.0 * (y + 0.5) / h - 1.0) * tan_h; };
    auto point = [&](int x, int y, double* p) {
        const double z = scene.depth_at(x, y);
        p[0] = z * tan_x(x);
        p[1] = z * tan_y(y);
        p[2] = z;
    };
    std::vector<double> rho_hat(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double px0[3], px1[3], py0[3], py1[3];
            point(std::max(x - 1, 0), y, px0);
            point(std::min(x + 1, w - 1), y, px1);
            point(x, std::max(y - 1, 0), py0);
            point(x, std::min(y + 1, h - 1), py1);
            double dx[3], dy[3];
            for (int c = 0; c < 3; ++c) {
                dx[c] = px1[c] - px0[c];
                dy[c] = py1[c] - py0[c];
            }
            double nx = dx[1] * dy[2] - dx[2] * dy[1];
            double ny = dx[2] * dy[0] - dx[0] * dy[2];
            double nz = dx[0] * dy[1] - dx[1] * dy[0];
            const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
            double cos_s = 0.0;
            if (norm > 0.0) cos_s = std::abs(nz) / norm;  // orient toward the sensor
            if (w == 1 || h == 1) cos_s = 1.0;            // degenerate grid: fronto-parallel
            rho_hat[static_cast<size_t>(y) * w + x] = scene.albedo_at(x, y) * std::max(cos_s, 0.0);
        }
    }
    return rho_hat;
}

struct McCtx {
    double cos_cone;      // cos(config fov / 2)
    double tan_scene;     // tan(scene fov / 2)
    double geom;          // photons * solid angle / (4 pi^2 (1 - cos) * rays)
    double r_max, bin_depth;
    int n_bins, w, h;
};

// One ray of the Monte-Carlo estimator. Returns false on a miss.
inline bool trace_ray(const McCtx& ctx, const DepthMapScene& scene,
                      const std::vector<double>& rho_hat, std::uint64_t seed, std::int64_t ray,
                      int* bin, double* value) {
    SplitMix64 rng(seed_stream(seed, static_cast<std::uint64_t>(ray)));
    const double u = rng.uniform();
    const double v = rng.uniform();
    const double cos_g = 1.0 - u * (1.0 - ctx.cos_cone);
    const double sin_g = std::sqrt(std::max(0.0, 1.0 - cos_g * cos_g));
    const double beta = 2.0 * M_PI * v;
    const double tan_dx = sin_g * std::cos(beta) / cos_g;
    const double tan_dy = sin_g * std::sin(beta) / cos_g;
    const double u_img = tan_dx / ctx.tan_scene;
    const double v_img = tan_dy / ctx.tan_scene;
    if (u_img < -1.0 || u_img > 1.0 || v_img < -1.0 || v_img > 1.0) return false;
    const int px = std::min(ctx.w - 1, static_cast<int>((u_img + 1.0) * 0.5 * ctx.w));
    const int py = std::min(ctx.h - 1, static_cast<int>((v_img + 1.0) * 0.5 * ctx.h));
    const double r = scene.depth_at(px, py) / cos_g;
    if (r >= ctx.r_max) return false;  // beyond the unambiguous range
    const double r2 = r * r;
    *bin = hard_bin(r, ctx.bin_depth, ctx.n_bins);
    *value = ctx.geom * rho_hat[static_cast<size_t>(py) * ctx.w + px] / (r2 * r2);
    return true;
}

McCtx make_mc_ctx(const DepthMapScene& scene, const SensorConfig& config,
                  const RenderSettings& settings) {
    require_valid(config);
    require_valid(scene);
    validate_settings(settings);
    McCtx ctx;
    ctx.cos_cone = std::cos(0.5 * config.fov_rad);
    ctx.tan_scene = std::tan(0.5 * scene.fov_rad);
    const double solid_angle = 2.0 * M_PI * (1.0 - ctx.cos_cone);
    ctx.geom = config.photons_per_pulse * solid_angle /
               (4.0 * M_PI * M_PI * (1.0 - ctx.cos_cone) * static_cast<double>(settings.mc_rays));
    ctx.r_max = config.max_range_m();
    ctx.bin_depth = config.bin_depth_m();
    ctx.n_bins = config.n_bins;
    ctx.w = scene.width;
    ctx.h = scene.height;
    return ctx;
}

TransientHistogram finish_mc(const SensorConfig& config, std::vector<double> flux,
                             std::int64_t total, std::int64_t missed, McDiagnostics* diagnostics) {
    if (diagnostics) {
        diagnostics->rays_total = total;
        diagnostics->rays_missed = missed;
    }
    if (2 * missed > total) {
        std::ostringstream msg;
        msg << missed << " of " << total << " rays missed the scene grid (>50%)";
        throw numeric_error(msg.str());
    }
    apply_kernel_and_background(config, flux);
    TransientHistogram hist;
    hist.flux = std::move(flux);
    hist.bin_time_s = config.bin_time_s;
    return hist;
}

constexpr std::int64_t kRayChunk = 8192;

}  // namespace

TransientHistogram render_depth_map(const DepthMapScene& scene, const SensorConfig& config,
                                    const RenderSettings& settings, McDiagnostics* diagnostics) {
    const McCtx ctx = make_mc_ctx(scene, config, settings);
    const auto rho_hat = cosine_adjusted_albedo(scene);
    const std::int64_t n_chunks = (settings.mc_rays + kRayChunk - 1) / kRayChunk;

    std::vector<double> chunks(static_cast<size_t>(n_chunks) * ctx.n_bins, 0.0);
    std::vector<std::int64_t> chunk_misses(n_chunks, 0);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        double* out = chunks.data() + static_cast<size_t>(c) * ctx.n_bins;
        const std::int64_t begin = c * kRayChunk;
        const std::int64_t end = std::min(begin + kRayChunk, settings.mc_rays);
        for (std::int64_t ray = begin; ray < end; ++ray) {
            int bin;
            double value;
            if (trace_ray(ctx, scene, rho_hat, settings.seed, ray, &bin, &value))
                out[bin - 1] += value;
            else
                ++chunk_misses[c];
        }
    }

    std::vector<double> flux(ctx.n_bins, 0.0);
    std::int64_t missed = 0;
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        const double* out = chunks.data() + static_cast<size_t>(c) * ctx.n_bins;
        for (int i = 0; i < ctx.n_bins; ++i) flux[i] += out[i];
        missed += chunk_misses[c];
    }
    return finish_mc(config, std::move(flux), settings.mc_rays, missed, diagnostics);
}

TransientHistogram convolve_pulse(const TransientHistogram& hist, std::span<const double> kernel) {
    require_valid(hist);
    const int n = hist.n_bins();
    const int len = static_cast<int>(kernel.size());
    if (len < 1) throw validation_error("pulse kernel must be non-empty");
    if (len > n) {
        throw validation_error("pulse kernel length " + std::to_string(len) +
                               " exceeds histogram length " + std::to_string(n));
    }
    double sum = 0.0;
    for (double v : kernel) {
        if (!(v >= 0.0)) throw validation_error("pulse kernel entries must be >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw validation_error("pulse kernel must sum to 1 within 1e-9");

    const int center = (len - 1) / 2;
    TransientHistogram out;
    out.bin_time_s = hist.bin_time_s;
    out.flux.assign(n, 0.0);
    for (int s = 0; s < n; ++s) {
        const double v = hist.flux[s];
        if (v == 0.0) continue;
        for (int j = 0; j < len; ++j) {
            int i = s + j - center;
            i %= n;
            if (i < 0) i += n;
            out.flux[i] += kernel[j] * v;
        }
    }
    return out;
}

namespace reference {

TransientHistogram render_plane(const PlaneParams& plane, const SensorConfig& config,
                                const RenderSettings& settings, double albedo) {
    const PlaneRenderCtx ctx = make_plane_ctx(plane, config, settings, albedo);
    TransientHistogram hist;
    hist.bin_time_s = config.bin_time_s;
    hist.flux.assign(ctx.n_bins, 0.0);
    for (int j = 0; j < ctx.n; ++j) {
        const double gamma = (j + 0.5) * ctx.dgamma;
        for (int k = 0; k < ctx.n; ++k) {
            const double beta = (k + 0.5) * ctx.dbeta;
            const double denom =
                ctx.cos_th * std::cos(gamma) + ctx.sin_th * std::sin(gamma) * std::cos(beta);
            if (denom <= 1e-12) throw_fault({k, gamma, beta, 0.0, true}, ctx.r_max);
            const double r = ctx.z0 * ctx.cos_th / denom;
            if (r >= ctx.r_max) throw_fault({k, gamma, beta, r, false}, ctx.r_max);
            const double w = std::sin(gamma) * ctx.dgamma * ctx.dbeta;
            hist.flux[hard_bin(r, ctx.bin_depth, ctx.n_bins) - 1] +=
                w * ctx.coeff / (r * r * r * r);
        }
    }
    apply_kernel_and_background(config, hist.flux);
    return hist;
}

SoftRenderOutput render_plane_soft(const PlaneParams& plane, const SensorConfig& config,
                                   const RenderSettings& settings, double albedo) {
    const PlaneRenderCtx ctx = make_plane_ctx(plane, config, settings, albedo);
    const double sigma_d = settings.soft_sigma_bins * ctx.bin_depth;
    const double window = kSoftWindowSigmas * sigma_d;
    SoftRenderOutput out;
    out.flux.bin_time_s = config.bin_time_s;
    out.flux.flux.assign(ctx.n_bins, 0.0);
    out.grad_theta.assign(ctx.n_bins, 0.0);
    out.grad_z0.assign(ctx.n_bins, 0.0);
    std::vector<double> g(ctx.n_bins);
    for (int j = 0; j < ctx.n; ++j) {
        const double gamma = (j + 0.5) * ctx.dgamma;
        for (int k = 0; k < ctx.n; ++k) {
            const double beta = (k + 0.5) * ctx.dbeta;
            const double cb = std::cos(beta);
            const double denom =
                ctx.cos_th * std::cos(gamma) + ctx.sin_th * std::sin(gamma) * cb;
            if (denom <= 1e-12) throw_fault({k, gamma, beta, 0.0, true}, ctx.r_max);
            const double r = ctx.z0 * ctx.cos_th / denom;
            if (r >= ctx.r_max) throw_fault({k, gamma, beta, r, false}, ctx.r_max);
            const double w = std::sin(gamma) * ctx.dgamma * ctx.dbeta;
            const double flux_s = w * ctx.coeff / (r * r * r * r);
            const double dr_dz0 = r / ctx.z0;
            const double dr_dth = -ctx.z0 * std::sin(gamma) * cb / (denom * denom);
            const double dflux_dz0 = -4.0 * flux_s / r * dr_dz0;
            const double dflux_dth = -ctx.tan_th * flux_s - 4.0 * flux_s / r * dr_dth;

            int lo = std::max(1, static_cast<int>(std::ceil((r - window) / ctx.bin_depth + 0.5)));
            int hi = std::min(ctx.n_bins,
                              static_cast<int>(std::floor((r + window) / ctx.bin_depth + 0.5)));
            if (lo > hi) {
                out.flux.flux[hard_bin(r, ctx.bin_depth, ctx.n_bins) - 1] += flux_s;
                continue;
            }
            double sum_g = 0.0, sum_gt = 0.0;
            for (int i = lo; i <= hi; ++i) {
                const double t = ((i - 0.5) * ctx.bin_depth - r) / sigma_d;
                g[i - lo] = std::exp(-0.5 * t * t);
                sum_g += g[i - lo];
                sum_gt += g[i - lo] * t;
            }
            const double t_mean = sum_gt / sum_g;
            for (int i = lo; i <= hi; ++i) {
                const double t = ((i - 0.5) * ctx.bin_depth - r) / sigma_d;
                const double gi = g[i - lo] / sum_g;
                const double dgi_dr = gi * (t - t_mean) / sigma_d;
                out.flux.flux[i - 1] += flux_s * gi;
                out.grad_z0[i - 1] += dflux_dz0 * gi + flux_s * dgi_dr * dr_dz0;
                out.grad_theta[i - 1] += dflux_dth * gi + flux_s * dgi_dr * dr_dth;
            }
        }
    }
    if (config.pulse_kernel) {
        const auto& kernel = *config.pulse_kernel;
        TransientHistogram tmp{out.grad_theta, config.bin_time_s};
        out.grad_theta = convolve_pulse(tmp, kernel).flux;
        tmp.flux = out.grad_z0;
        out.grad_z0 = convolve_pulse(tmp, kernel).flux;
    }
    apply_kernel_and_background(config, out.flux.flux);
    return out;
}

TransientHistogram render_depth_map(const DepthMapScene& scene, const SensorConfig& config,
                                    const RenderSettings& settings, McDiagnostics* diagnostics) {
    const McCtx ctx = make_mc_ctx(scene, config, settings);
    const auto rho_hat = cosine_adjusted_albedo(scene);
    std::vector<double> flux(ctx.n_bins, 0.0);
    std::int64_t missed = 0;
    for (std::int64_t ray = 0; ray < settings.mc_rays; ++ray) {
        int bin;
        double value;
        if (trace_ray(ctx, scene, rho_hat, settings.seed, ray, &bin, &value))
            flux[bin - 1] += value;
        else
            ++missed;
    }
    return finish_mc(config, std::move(flux), settings.mc_rays, missed, diagnostics);
}

}  // namespace reference

}  // namespace transient
