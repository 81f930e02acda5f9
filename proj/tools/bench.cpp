// Benchmark comparing the OpenMP kernels against the serial references.
#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "transient/forward_render.hpp"
#include "transient/metrics_eval.hpp"

using namespace transient;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn();  // warm up
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-24s serial %9.2f ms   parallel %9.2f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

DepthMapScene planar_scene(int size, double z0, double theta, double fov) {
    DepthMapScene scene;
    scene.width = scene.height = size;
    scene.fov_rad = fov;
    scene.depth.resize(static_cast<size_t>(size) * size);
    scene.albedo.assign(scene.depth.size(), 0.8);
    const double tan_h = std::tan(0.5 * fov);
    const double nx = std::sin(theta), nz = std::cos(theta);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double tx = (2.0 * (x + 0.5) / size - 1.0) * tan_h;
            const double ty = (2.0 * (y + 0.5) / size - 1.0) * tan_h;
            const double denom = nx * tx + nz;  // unnormalized ray (tx, ty, 1)
            scene.depth_at(x, y) = z0 * nz / denom;
            (void)ty;
        }
    }
    return scene;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns are serial\n");
#endif
    const SensorConfig config = default_config();
    const PlaneParams plane{2.0, 25.0 * M_PI / 180.0, 0.0};

    RenderSettings settings;
    settings.angular_resolution = 256;
    report("render_plane",
           time_ms([&] { reference::render_plane(plane, config, settings); }, 5),
           time_ms([&] { render_plane(plane, config, settings); }, 5));
    report("render_plane_soft",
           time_ms([&] { reference::render_plane_soft(plane, config, settings); }, 5),
           time_ms([&] { render_plane_soft(plane, config, settings); }, 5));

    const DepthMapScene scene = planar_scene(256, 2.0, plane.theta_n_rad, config.fov_rad);
    RenderSettings mc;
    mc.mc_rays = 2000000;
    mc.seed = 7;
    report("render_depth_map",
           time_ms([&] { reference::render_depth_map(scene, config, mc); }, 3),
           time_ms([&] { render_depth_map(scene, config, mc); }, 3));

    SweepOptions sweep;
    sweep.z0_values = {1.0, 2.5, 4.0, 5.5};
    sweep.theta_values = {10 * M_PI / 180, 25 * M_PI / 180, 40 * M_PI / 180};
    sweep.cycles = 20000;
    sweep.n_seeds = 2;
    sweep.abs_config.max_iters = 60;
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const double sweep_serial = time_ms([&] { run_sweep(sweep, config); }, 1);
    omp_set_num_threads(max_threads);
    const double sweep_parallel = time_ms([&] { run_sweep(sweep, config); }, 1);
    report("run_sweep", sweep_serial, sweep_parallel);
#else
    report("run_sweep", time_ms([&] { run_sweep(sweep, config); }, 1),
           time_ms([&] { run_sweep(sweep, config); }, 1));
#endif
    return 0;
}
