#include "transient/plane_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace transient {

double plane_distance(double z0_m, double theta_n_rad, double gamma_rad) {
    if (!(z0_m > 0.0)) throw validation_error("z0 must be > 0");
    const double denom = std::cos(gamma_rad + theta_n_rad);
    if (!(denom > 0.0)) throw validation_error("viewing angle at or beyond grazing");
    return z0_m * std::cos(theta_n_rad) / denom;
}

EdgeTriple detect_edges(const TransientHistogram& hist, double threshold_frac) {
    require_valid(hist);
    if (!(threshold_frac > 0.0 && threshold_frac <= 1.0))
        throw validation_error("threshold_frac must be in (0, 1]");
    const int n = hist.n_bins();

    std::vector<double> sorted = hist.flux;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double floor_level = sorted[n / 2];

    int peak = 0;
    for (int i = 1; i < n; ++i)
        if (hist.flux[i] > hist.flux[peak]) peak = i;
    const double peak_sig = hist.flux[peak] - floor_level;
    if (!(peak_sig > 0.0))
        throw numeric_error("no signal: no bin rises above the background floor");

    const double threshold = threshold_frac * peak_sig;
    int leading = peak, lagging = peak;
    for (int i = 0; i < n; ++i) {
        if (hist.flux[i] - floor_level >= threshold) {
            leading = i;
            break;
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        if (hist.flux[i] - floor_level >= threshold) {
            lagging = i;
            break;
        }
    }
    return {leading + 1, peak + 1, lagging + 1};
}

namespace {

// Signed inversion; the public operation folds, the theoretical estimator
// averages the signed pair first so the two "+/- fov/4" branches of a
// degenerate single-bin support cancel instead of both folding positive.
double invert_signed(double distance_m, double gamma_rad, double z0_m) {
    if (!(distance_m > 0.0)) throw validation_error("edge distance must be > 0");
    if (!(z0_m > 0.0)) throw validation_error("z0 must be > 0");
    if (gamma_rad == 0.0) throw validation_error("gamma must be nonzero");
    return std::atan((distance_m * std::cos(gamma_rad) - z0_m) /
                     (distance_m * std::sin(gamma_rad)));
}

}  // namespace

double invert_distance_for_angle(double distance_m, double gamma_rad, double z0_m) {
    return std::abs(invert_signed(distance_m, gamma_rad, z0_m));
}

PlaneEstimate estimate_plane_theoretical(const TransientHistogram& hist,
                                         const SensorConfig& config, double threshold_frac,
                                         bool z0_from_support_center) {
    require_valid(config);
    const EdgeTriple edges = detect_edges(hist, threshold_frac);
    const double gamma_half = 0.5 * config.fov_rad;

    PlaneEstimate est;
    est.method = EstimateMethod::theoretical;
    est.diagnostics.d1_m = distance_of_bin(edges.leading, config);
    est.diagnostics.d2_m = distance_of_bin(edges.lagging, config);
    est.diagnostics.wraparound_warning = edges.lagging == config.n_bins;
    est.z0_m = z0_from_support_center ? 0.5 * (est.diagnostics.d1_m + est.diagnostics.d2_m)
                                      : distance_of_bin(edges.peak, config);
    const double t1 = invert_signed(est.diagnostics.d1_m, -gamma_half, est.z0_m);
    const double t2 = invert_signed(est.diagnostics.d2_m, +gamma_half, est.z0_m);
    est.theta_n_rad = std::abs(0.5 * (t1 + t2));
    est.diagnostics.converged = true;
    return est;
}

namespace {

// DFT twiddle table for the k lowest frequencies of an N-point transform.
struct FourierBasis {
    int n = 0, k = 0;
    std::vector<double> cos_t, sin_t;  // [m * n + j] = cos/sin(2 pi m j / n)

    FourierBasis(int n_, int k_) : n(n_), k(k_), cos_t(static_cast<size_t>(k_) * n_),
                                   sin_t(static_cast<size_t>(k_) * n_) {
        for (int m = 0; m < k; ++m) {
            for (int j = 0; j < n; ++j) {
                const double angle = 2.0 * M_PI * m * j / n;
                cos_t[static_cast<size_t>(m) * n + j] = std::cos(angle);
                sin_t[static_cast<size_t>(m) * n + j] = std::sin(angle);
            }
        }
    }

    // X_m = sum_j x_j exp(-2 pi i m j / n) for m < k.
    void transform(const std::vector<double>& x, std::vector<double>& re,
                   std::vector<double>& im) const {
        re.assign(k, 0.0);
        im.assign(k, 0.0);
        for (int m = 0; m < k; ++m) {
            const double* c = cos_t.data() + static_cast<size_t>(m) * n;
            const double* s = sin_t.data() + static_cast<size_t>(m) * n;
            double sum_re = 0.0, sum_im = 0.0;
            for (int j = 0; j < n; ++j) {
                sum_re += x[j] * c[j];
                sum_im -= x[j] * s[j];
            }
            re[m] = sum_re;
            im[m] = sum_im;
        }
    }
};

int clamp_k(int k, int n) {
    if (k < 1) throw validation_error("k_coeffs must be >= 1");
    return std::min(k, n / 2 + 1);
}

void validate_abs_config(const AbsConfig& cfg) {
    std::vector<std::string> violations;
    if (cfg.k_coeffs < 1) violations.push_back("k_coeffs must be >= 1");
    if (!(cfg.step_size > 0.0)) violations.push_back("step_size must be > 0");
    if (cfg.max_iters < 1) violations.push_back("max_iters must be >= 1");
    if (!(cfg.grad_tol >= 0.0)) violations.push_back("grad_tol must be >= 0");
    if (!(cfg.soft_sigma_bins > 0.0)) violations.push_back("soft_sigma_bins must be > 0");
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid abs config:";
        for (const auto& v : violations) msg << " [" << v << "]";
        throw validation_error(msg.str());
    }
}

struct FeasibleBox {
    double theta_max, z_lo;
    double r_cap;  // renders must stay strictly inside the unambiguous range
    double fov_half;

    explicit FeasibleBox(const SensorConfig& config) {
        fov_half = 0.5 * config.fov_rad;
        theta_max = M_PI / 2.0 - fov_half - 1e-3;
        z_lo = 0.5 * config.bin_depth_m();
        r_cap = config.max_range_m() - 0.25 * config.bin_depth_m();
    }

    void clamp(double& z0, double& theta) const {
        theta = std::clamp(theta, 0.0, theta_max);
        const double z_hi = r_cap * std::cos(theta + fov_half) / std::cos(theta);
        z0 = std::clamp(z0, z_lo, z_hi);
    }
};

struct AbsProblem {
    const TransientHistogram& measured;
    const SensorConfig& config;
    const FourierBasis& basis;
    RenderSettings settings;
    double norm;  // retained Fourier energy of the measurement
    std::vector<double> target_re, target_im;
    bool with_albedo = false;

    // Loss and its gradients at (z0, theta) with the per-bin albedo texture
    // applied. Gradients may be skipped during line search.
    double eval(double z0, double theta, const std::vector<double>& albedo, double* g_z0,
                double* g_theta, std::vector<double>* g_albedo) const {
        const SoftRenderOutput render =
            render_plane_soft(PlaneParams{z0, theta, 0.0}, config, settings);
        const int n = basis.n;
        std::vector<double> flux(n);
        for (int j = 0; j < n; ++j)
            flux[j] = with_albedo ? albedo[j] * render.flux.flux[j] : render.flux.flux[j];

        std::vector<double> re, im;
        basis.transform(flux, re, im);
        double loss = 0.0;
        for (int m = 0; m < basis.k; ++m) {
            re[m] -= target_re[m];
            im[m] -= target_im[m];
            loss += re[m] * re[m] + im[m] * im[m];
        }
        loss /= norm;
        if (g_z0 == nullptr) return loss;

        // dJ/dflux_j = (2/norm) sum_m Re[conj(D_m) exp(-2 pi i m j / n)]
        std::vector<double> d_flux(n, 0.0);
        for (int m = 0; m < basis.k; ++m) {
            const double* c = basis.cos_t.data() + static_cast<size_t>(m) * n;
            const double* s = basis.sin_t.data() + static_cast<size_t>(m) * n;
            for (int j = 0; j < n; ++j) d_flux[j] += re[m] * c[j] - im[m] * s[j];
        }
        double gz = 0.0, gt = 0.0;
        for (int j = 0; j < n; ++j) {
            const double scale = 2.0 / norm * d_flux[j];
            const double a = with_albedo ? albedo[j] : 1.0;
            gz += scale * a * render.grad_z0[j];
            gt += scale * a * render.grad_theta[j];
            if (g_albedo) (*g_albedo)[j] = scale * render.flux.flux[j];
        }
        *g_z0 = gz;
        *g_theta = gt;
        return loss;
    }
};

constexpr double kAlbedoLo = 0.01;
constexpr double kAlbedoHi = 1.0;
constexpr double kThetaStepScale = 0.1;
constexpr double kAlbedoStepScale = 25.0;

struct DescentResult {
    double z0, theta, loss;
    std::vector<double> albedo;
    int iterations;
    bool converged;
};

DescentResult descend(const AbsProblem& problem, const FeasibleBox& box, const AbsConfig& cfg,
                      double z0, double theta, std::vector<double> albedo) {
    box.clamp(z0, theta);
    std::vector<double> g_albedo(problem.with_albedo ? albedo.size() : 0);
    std::vector<double>* ga = problem.with_albedo ? &g_albedo : nullptr;

    double gz, gt;
    double loss = problem.eval(z0, theta, albedo, &gz, &gt, ga);
    if (!std::isfinite(loss)) throw numeric_error("AbS loss is not finite at the initial point");

    DescentResult best{z0, theta, loss, albedo, 0, false};
    double trial_scale = 1.0;
    int small_steps = 0;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        double gnorm2 = gz * gz + gt * gt;
        if (problem.with_albedo)
            for (double g : g_albedo) gnorm2 += g * g;
        if (std::sqrt(gnorm2) < cfg.grad_tol) {
            best.converged = true;
            break;
        }

        // Descent direction with per-parameter step scaling.
        const double dz = -cfg.step_size * gz;
        const double dt = -cfg.step_size * kThetaStepScale * gt;
        double dir_dot_grad = dz * gz + dt * gt;
        std::vector<double> da;
        if (problem.with_albedo) {
            da.resize(albedo.size());
            for (size_t j = 0; j < albedo.size(); ++j) {
                da[j] = -cfg.step_size * kAlbedoStepScale * g_albedo[j];
                dir_dot_grad += da[j] * g_albedo[j];
            }
        }

        // Backtracking line search (Armijo), trial step grows on easy accepts.
        bool accepted = false;
        double z_new = z0, t_new = theta, loss_new = loss;
        std::vector<double> a_new;
        for (int half = 0; half < 30; ++half) {
            z_new = z0 + trial_scale * dz;
            t_new = theta + trial_scale * dt;
            box.clamp(z_new, t_new);
            if (problem.with_albedo) {
                a_new = albedo;
                for (size_t j = 0; j < a_new.size(); ++j)
                    a_new[j] = std::clamp(a_new[j] + trial_scale * da[j], kAlbedoLo, kAlbedoHi);
            }
            loss_new = problem.eval(z_new, t_new, problem.with_albedo ? a_new : albedo, nullptr,
                                    nullptr, nullptr);
            if (loss_new <= loss + 1e-4 * trial_scale * dir_dot_grad) {
                accepted = true;
                if (half == 0) trial_scale = std::min(trial_scale * 1.5, 1e6);
                break;
            }
            trial_scale *= 0.5;
        }
        if (!accepted) {
            // No descent direction at working precision: stationary point.
            best.converged = true;
            break;
        }

        const double step_z = std::abs(z_new - z0);
        const double step_t = std::abs(t_new - theta);
        z0 = z_new;
        theta = t_new;
        if (problem.with_albedo) albedo = std::move(a_new);
        loss = problem.eval(z0, theta, albedo, &gz, &gt, ga);
        if (!std::isfinite(loss)) throw numeric_error("AbS loss diverged to a non-finite value");
        best.iterations = iter + 1;
        if (loss < best.loss) {
            best.loss = loss;
            best.z0 = z0;
            best.theta = theta;
            if (problem.with_albedo) best.albedo = albedo;
        }
        if (step_z < 1e-7 && step_t < 1e-7) {
            if (++small_steps >= 2) {
                best.converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    if (!problem.with_albedo) best.albedo = std::move(albedo);
    return best;
}

AbsProblem make_problem(const TransientHistogram& hist, const SensorConfig& config,
                        const AbsConfig& cfg, const FourierBasis& basis, bool with_albedo) {
    AbsProblem problem{hist, config, basis, RenderSettings{}, 0.0, {}, {}, with_albedo};
    problem.settings.angular_resolution = cfg.angular_resolution;
    problem.settings.soft_sigma_bins = cfg.soft_sigma_bins;
    basis.transform(hist.flux, problem.target_re, problem.target_im);
    for (int m = 0; m < basis.k; ++m) {
        problem.norm +=
            problem.target_re[m] * problem.target_re[m] + problem.target_im[m] * problem.target_im[m];
    }
    if (!(problem.norm > 0.0))
        throw numeric_error("measured histogram has no Fourier energy in the retained band");
    return problem;
}

}  // namespace

double fourier_loss(const TransientHistogram& a, const TransientHistogram& b, int k) {
    require_valid(a);
    require_valid(b);
    const int n = a.n_bins();
    if (b.n_bins() != n)
        throw validation_error("fourier_loss: histogram lengths differ (" + std::to_string(n) +
                               " vs " + std::to_string(b.n_bins()) + ")");
    if (k < 1 || k > n / 2 + 1)
        throw validation_error("fourier_loss: k must be in 1..N/2+1");

    std::vector<double> diff(n);
    for (int j = 0; j < n; ++j) diff[j] = a.flux[j] - b.flux[j];
    double loss = 0.0;
    for (int m = 0; m < k; ++m) {
        double re = 0.0, im = 0.0;
        for (int j = 0; j < n; ++j) {
            const double angle = 2.0 * M_PI * m * j / n;
            re += diff[j] * std::cos(angle);
            im -= diff[j] * std::sin(angle);
        }
        loss += re * re + im * im;
    }
    return loss;
}

PlaneEstimate estimate_plane_abs_from(const TransientHistogram& hist, const SensorConfig& config,
                                      const AbsConfig& abs_config, const PlaneParams& init) {
    require_valid(config);
    require_valid(hist);
    validate_abs_config(abs_config);
    const int n = hist.n_bins();
    const int k = clamp_k(abs_config.k_coeffs, n);
    const FourierBasis basis(n, k);
    const AbsProblem problem = make_problem(hist, config, abs_config, basis, false);
    const FeasibleBox box(config);

    const DescentResult result =
        descend(problem, box, abs_config, init.z0_m, init.theta_n_rad, {});

    PlaneEstimate est;
    est.method = EstimateMethod::abs;
    est.z0_m = result.z0;
    est.theta_n_rad = result.theta;
    est.diagnostics.final_loss = result.loss;
    est.diagnostics.iterations = result.iterations;
    est.diagnostics.converged = result.converged;
    return est;
}

PlaneEstimate estimate_plane_abs(const TransientHistogram& hist, const SensorConfig& config,
                                 const AbsConfig& abs_config) {
    const PlaneEstimate init =
        estimate_plane_theoretical(hist, config, abs_config.threshold_frac);
    PlaneEstimate est = estimate_plane_abs_from(
        hist, config, abs_config, PlaneParams{init.z0_m, init.theta_n_rad, 0.0});
    est.diagnostics.d1_m = init.diagnostics.d1_m;
    est.diagnostics.d2_m = init.diagnostics.d2_m;
    est.diagnostics.wraparound_warning = init.diagnostics.wraparound_warning;
    return est;
}

AlbedoEstimate estimate_plane_abs_with_albedo(const TransientHistogram& hist,
                                              const SensorConfig& config,
                                              const AbsConfig& abs_config) {
    require_valid(config);
    require_valid(hist);
    validate_abs_config(abs_config);
    const PlaneEstimate init =
        estimate_plane_theoretical(hist, config, abs_config.threshold_frac);
    const int n = hist.n_bins();
    const int k = clamp_k(abs_config.k_coeffs, n);
    const FourierBasis basis(n, k);
    const FeasibleBox box(config);

    // Plane parameters first, then joint descent with the albedo texture.
    const AbsProblem plain = make_problem(hist, config, abs_config, basis, false);
    const DescentResult stage1 =
        descend(plain, box, abs_config, init.z0_m, init.theta_n_rad, {});

    const AbsProblem joint = make_problem(hist, config, abs_config, basis, true);
    const DescentResult stage2 = descend(joint, box, abs_config, stage1.z0, stage1.theta,
                                         std::vector<double>(n, 1.0));

    AlbedoEstimate out;
    out.estimate.method = EstimateMethod::abs;
    out.estimate.z0_m = stage2.z0;
    out.estimate.theta_n_rad = stage2.theta;
    out.estimate.diagnostics.final_loss = stage2.loss;
    out.estimate.diagnostics.iterations = stage1.iterations + stage2.iterations;
    out.estimate.diagnostics.converged = stage2.converged;
    out.estimate.diagnostics.d1_m = init.diagnostics.d1_m;
    out.estimate.diagnostics.d2_m = init.diagnostics.d2_m;
    out.estimate.diagnostics.wraparound_warning = init.diagnostics.wraparound_warning;
    out.albedo = stage2.albedo;
    return out;
}

}  // namespace transient
