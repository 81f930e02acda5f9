#include "transient/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "transient/forward_render.hpp"
#include "transient/spad_sim.hpp"

namespace transient {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr double kDegree = M_PI / 180.0;

json config_to_json_obj(const SensorConfig& config) {
    json j{{"schema_version", kSchemaVersion},
           {"kind", "sensor_config"},
           {"rep_rate_hz", config.rep_rate_hz},
           {"bin_time_s", config.bin_time_s},
           {"n_bins", config.n_bins},
           {"fov_rad", config.fov_rad},
           {"photons_per_pulse", config.photons_per_pulse},
           {"bkg_flux", config.bkg_flux}};
    if (config.pulse_kernel) j["pulse_kernel"] = *config.pulse_kernel;
    return j;
}

[[noreturn]] void schema_error(const std::string& what) {
    throw validation_error("schema error: " + what);
}

void check_header(const json& j, const char* kind) {
    if (!j.is_object()) schema_error("document is not a JSON object");
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        schema_error("missing integer field 'schema_version'");
    if (j["schema_version"].get<int>() != kSchemaVersion)
        schema_error("unsupported schema_version " + j["schema_version"].dump());
    if (kind != nullptr) {
        if (!j.contains("kind") || !j["kind"].is_string())
            schema_error("missing string field 'kind'");
        if (j["kind"].get<std::string>() != kind)
            schema_error("expected kind '" + std::string(kind) + "', got " + j["kind"].dump());
    }
}

double require_number(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_number())
        schema_error("missing numeric field '" + std::string(field) + "'");
    return j[field].get<double>();
}

std::int64_t require_integer(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_number_integer())
        schema_error("missing integer field '" + std::string(field) + "'");
    return j[field].get<std::int64_t>();
}

SensorConfig config_from_json_obj(const json& j) {
    check_header(j, "sensor_config");
    SensorConfig config;
    config.rep_rate_hz = require_number(j, "rep_rate_hz");
    config.bin_time_s = require_number(j, "bin_time_s");
    config.n_bins = static_cast<int>(require_integer(j, "n_bins"));
    config.fov_rad = require_number(j, "fov_rad");
    config.photons_per_pulse = require_number(j, "photons_per_pulse");
    config.bkg_flux = require_number(j, "bkg_flux");
    if (j.contains("pulse_kernel") && !j["pulse_kernel"].is_null()) {
        if (!j["pulse_kernel"].is_array()) schema_error("'pulse_kernel' must be an array");
        config.pulse_kernel = j["pulse_kernel"].get<std::vector<double>>();
    }
    require_valid(config);
    return config;
}

json parse_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) schema_error("malformed JSON");
    return j;
}

}  // namespace

std::string config_to_json(const SensorConfig& config) {
    return config_to_json_obj(config).dump(2) + "\n";
}

SensorConfig config_from_json(const std::string& text) {
    return config_from_json_obj(parse_json(text));
}

std::string histogram_to_json(const HistogramFile& file) {
    json j{{"schema_version", kSchemaVersion}};
    if (file.is_transient()) {
        const TransientHistogram& hist = file.transient();
        j["kind"] = "transient";
        j["n_bins"] = hist.n_bins();
        j["bin_time_s"] = hist.bin_time_s;
        j["values"] = hist.flux;
    } else {
        const SpadHistogram& spad = file.spad();
        j["kind"] = "spad";
        j["n_bins"] = spad.n_bins();
        j["bin_time_s"] = spad.bin_time_s;
        j["cycles"] = spad.cycles;
        j["mode"] = spad.mode == SpadMode::synchronous ? "synchronous" : "asynchronous";
        j["values"] = spad.counts;
    }
    if (file.config) j["config"] = config_to_json_obj(*file.config);
    if (file.dead_time_bins) j["dead_time_bins"] = *file.dead_time_bins;
    if (file.seed) j["seed"] = *file.seed;
    return j.dump(2) + "\n";
}

HistogramFile histogram_from_json(const std::string& text) {
    const json j = parse_json(text);
    check_header(j, nullptr);
    if (!j.contains("kind") || !j["kind"].is_string()) schema_error("missing string field 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    const int n_bins = static_cast<int>(require_integer(j, "n_bins"));
    if (n_bins < 1) schema_error("n_bins must be >= 1");
    if (!j.contains("values") || !j["values"].is_array())
        schema_error("missing array field 'values'");

    HistogramFile file;
    if (kind == "transient") {
        TransientHistogram hist;
        hist.bin_time_s = require_number(j, "bin_time_s");
        hist.flux = j["values"].get<std::vector<double>>();
        if (hist.n_bins() != n_bins)
            schema_error("'values' length " + std::to_string(hist.n_bins()) +
                         " does not match n_bins " + std::to_string(n_bins));
        require_valid(hist);
        file.data = std::move(hist);
    } else if (kind == "spad") {
        SpadHistogram spad;
        spad.bin_time_s = require_number(j, "bin_time_s");
        spad.cycles = require_integer(j, "cycles");
        if (!j.contains("mode") || !j["mode"].is_string())
            schema_error("missing string field 'mode'");
        const std::string mode = j["mode"].get<std::string>();
        if (mode == "synchronous") spad.mode = SpadMode::synchronous;
        else if (mode == "asynchronous") spad.mode = SpadMode::asynchronous;
        else schema_error("mode must be 'synchronous' or 'asynchronous'");
        spad.counts = j["values"].get<std::vector<std::int64_t>>();
        const int expected = spad.mode == SpadMode::synchronous ? n_bins + 1 : n_bins;
        if (static_cast<int>(spad.counts.size()) != expected)
            schema_error("'values' length " + std::to_string(spad.counts.size()) +
                         " does not match expected " + std::to_string(expected));
        require_valid(spad);
        file.data = std::move(spad);
    } else {
        schema_error("kind must be 'transient' or 'spad'");
    }
    if (j.contains("config") && !j["config"].is_null())
        file.config = config_from_json_obj(j["config"]);
    if (j.contains("dead_time_bins"))
        file.dead_time_bins = static_cast<int>(require_integer(j, "dead_time_bins"));
    if (j.contains("seed")) file.seed = static_cast<std::uint64_t>(require_integer(j, "seed"));
    return file;
}

std::string estimate_to_json(const PlaneEstimate& estimate) {
    json j{{"schema_version", kSchemaVersion},
           {"kind", "plane_estimate"},
           {"method", estimate.method == EstimateMethod::abs ? "abs" : "theoretical"},
           {"z0_m", estimate.z0_m},
           {"theta_n_rad", estimate.theta_n_rad},
           {"theta_n_deg", estimate.theta_n_rad / kDegree},
           {"diagnostics",
            json{{"final_loss", estimate.diagnostics.final_loss},
                 {"iterations", estimate.diagnostics.iterations},
                 {"converged", estimate.diagnostics.converged},
                 {"d1_m", estimate.diagnostics.d1_m},
                 {"d2_m", estimate.diagnostics.d2_m},
                 {"wraparound_warning", estimate.diagnostics.wraparound_warning}}}};
    return j.dump(2) + "\n";
}

namespace {

json grid_to_json(const std::vector<double>& values, int nz, int nt) {
    json rows = json::array();
    for (int iz = 0; iz < nz; ++iz) {
        json row = json::array();
        for (int it = 0; it < nt; ++it) {
            const double v = values[static_cast<size_t>(iz) * nt + it];
            if (std::isnan(v)) row.push_back(nullptr);
            else row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string sweep_report_to_json(const SweepReport& report) {
    const int nz = static_cast<int>(report.z0_values.size());
    const int nt = static_cast<int>(report.theta_values.size());
    json j{{"schema_version", kSchemaVersion},
           {"kind", "sweep_report"},
           {"z0_values_m", report.z0_values},
           {"theta_values_rad", report.theta_values},
           {"cycles", report.cycles},
           {"photon_budget", report.photon_budget},
           {"seeds", report.seeds},
           {"valid_cells", report.valid_cells},
           {"invalid_cells", report.invalid_cells},
           {"win_fraction_z0", report.win_fraction_z0},
           {"win_fraction_theta", report.win_fraction_theta},
           {"mae_z0_theoretical", grid_to_json(report.mae_z0_theoretical, nz, nt)},
           {"mae_z0_abs", grid_to_json(report.mae_z0_abs, nz, nt)},
           {"mae_theta_theoretical", grid_to_json(report.mae_theta_theoretical, nz, nt)},
           {"mae_theta_abs", grid_to_json(report.mae_theta_abs, nz, nt)}};
    return j.dump(2) + "\n";
}

std::string sweep_report_to_csv(const SweepReport& report) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "z0_m,theta_n_rad,mae_z0_theoretical,mae_z0_abs,mae_theta_theoretical,mae_theta_abs\n";
    const int nt = static_cast<int>(report.theta_values.size());
    for (size_t iz = 0; iz < report.z0_values.size(); ++iz) {
        for (int it = 0; it < nt; ++it) {
            const size_t idx = iz * nt + it;
            out << report.z0_values[iz] << ',' << report.theta_values[it];
            for (const auto* grid : {&report.mae_z0_theoretical, &report.mae_z0_abs,
                                     &report.mae_theta_theoretical, &report.mae_theta_abs}) {
                out << ',';
                if (!std::isnan((*grid)[idx])) out << (*grid)[idx];
            }
            out << '\n';
        }
    }
    return out.str();
}

namespace {

// Whitespace tokenizer that remembers line numbers for error messages.
struct LineTokenizer {
    std::istream& in;
    std::istringstream line_stream;
    int line_number = 0;

    explicit LineTokenizer(std::istream& stream) : in(stream) {}

    bool next(std::string* token) {
        while (true) {
            if (line_stream >> *token) return true;
            std::string line;
            if (!std::getline(in, line)) return false;
            ++line_number;
            line_stream = std::istringstream(line);
        }
    }
};

[[noreturn]] void depth_map_error(int line, const std::string& what) {
    throw validation_error("depth map line " + std::to_string(line) + ": " + what);
}

double parse_double(const LineTokenizer& tok, const std::string& token, const char* what) {
    try {
        size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (pos != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        depth_map_error(tok.line_number, std::string("expected ") + what + ", got '" + token + "'");
    }
}

}  // namespace

DepthMapScene read_depth_map(std::istream& in) {
    LineTokenizer tok(in);
    std::string token;
    if (!tok.next(&token) || token != "TKDM")
        depth_map_error(tok.line_number, "expected magic 'TKDM'");
    if (!tok.next(&token) || token != "1")
        depth_map_error(tok.line_number, "unsupported depth map version");

    DepthMapScene scene;
    for (auto [field, value] : {std::pair<const char*, int*>{"width", &scene.width},
                                std::pair<const char*, int*>{"height", &scene.height}}) {
        if (!tok.next(&token)) depth_map_error(tok.line_number, std::string("missing ") + field);
        *value = static_cast<int>(parse_double(tok, token, field));
        if (*value < 1) depth_map_error(tok.line_number, std::string(field) + " must be >= 1");
    }
    if (!tok.next(&token)) depth_map_error(tok.line_number, "missing fov_rad");
    scene.fov_rad = parse_double(tok, token, "fov_rad");

    const size_t n = static_cast<size_t>(scene.width) * scene.height;
    scene.depth.reserve(n);
    scene.albedo.reserve(n);
    size_t count = 0;
    while (tok.next(&token)) {
        const double v = parse_double(tok, token, "grid value");
        if (count < n) scene.depth.push_back(v);
        else if (count < 2 * n) scene.albedo.push_back(v);
        else depth_map_error(tok.line_number, "trailing data: grid dimensions do not match header");
        ++count;
    }
    if (count != 2 * n) {
        depth_map_error(tok.line_number, "dimension mismatch: expected " + std::to_string(2 * n) +
                                             " grid values, got " + std::to_string(count));
    }
    require_valid(scene);
    return scene;
}

void write_depth_map(std::ostream& out, const DepthMapScene& scene) {
    require_valid(scene);
    out << "TKDM 1 " << scene.width << ' ' << scene.height << ' ' << std::setprecision(17)
        << scene.fov_rad << '\n';
    for (const auto* grid : {&scene.depth, &scene.albedo}) {
        for (int y = 0; y < scene.height; ++y) {
            for (int x = 0; x < scene.width; ++x) {
                if (x > 0) out << ' ';
                out << (*grid)[static_cast<size_t>(y) * scene.width + x];
            }
            out << '\n';
        }
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file: " + path);
    out << content;
    if (!out) throw validation_error("failed writing file: " + path);
}

DepthMapScene load_depth_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open file: " + path);
    try {
        return read_depth_map(in);
    } catch (const validation_error& e) {
        throw validation_error(path + ": " + e.what());
    }
}

namespace {

SensorConfig resolve_config(const std::string& config_path,
                            const std::optional<SensorConfig>& embedded) {
    if (!config_path.empty()) return config_from_json(read_text_file(config_path));
    if (embedded) return *embedded;
    return default_config();
}

void emit(const std::string& out_path, const std::string& content, std::ostream& out) {
    if (out_path.empty()) out << content;
    else write_text_file(out_path, content);
}

TransientHistogram require_transient(const HistogramFile& file, const std::string& path) {
    if (!file.is_transient())
        throw validation_error(path + ": expected a transient histogram, got a spad histogram");
    return file.transient();
}

std::vector<double> parse_grid_spec(const std::string& spec) {
    // "a:b:n" -> n values linearly spaced over [a, b].
    double a = 0.0, b = 0.0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || !in.eof() || n < 1)
        throw validation_error("bad grid spec '" + spec + "', expected a:b:n with n >= 1");
    std::vector<double> values(n);
    for (int i = 0; i < n; ++i)
        values[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return values;
}

struct CommonEstimateOpts {
    int k_coeffs = 64;
    double step_size = 0.01;
    int max_iters = 500;
    double grad_tol = 1e-8;
    double soft_sigma = 0.5;
    double threshold_frac = 0.1;
    int angular_resolution = 64;

    void attach(CLI::App* cmd) {
        cmd->add_option("--k", k_coeffs, "Fourier coefficients kept by the AbS loss");
        cmd->add_option("--step", step_size, "initial gradient step");
        cmd->add_option("--max-iters", max_iters, "iteration cap");
        cmd->add_option("--grad-tol", grad_tol, "gradient norm stopping tolerance");
        cmd->add_option("--sigma", soft_sigma, "soft-binning width in bins");
        cmd->add_option("--threshold-frac", threshold_frac, "edge detection threshold fraction");
        cmd->add_option("--angular-resolution", angular_resolution, "render grid per axis");
    }

    AbsConfig abs_config() const {
        AbsConfig cfg;
        cfg.k_coeffs = k_coeffs;
        cfg.step_size = step_size;
        cfg.max_iters = max_iters;
        cfg.grad_tol = grad_tol;
        cfg.soft_sigma_bins = soft_sigma;
        cfg.threshold_frac = threshold_frac;
        cfg.angular_resolution = angular_resolution;
        return cfg;
    }
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"transient histogram simulation and plane estimation"};
    app.require_subcommand(1);

    // render-plane
    auto* render_plane_cmd =
        app.add_subcommand("render-plane", "render the transient of a parametric plane");
    double z0 = 1.0, theta_deg = 0.0, phi_deg = 0.0, albedo = 1.0, sigma = 0.5;
    int angular_resolution = 64;
    bool soft = false;
    std::string config_path, out_path;
    render_plane_cmd->add_option("--z0", z0, "plane intercept distance (m)")->required();
    render_plane_cmd->add_option("--theta-n", theta_deg, "plane tilt (degrees)")->required();
    render_plane_cmd->add_option("--phi-n", phi_deg, "plane azimuth (degrees)");
    render_plane_cmd->add_option("--albedo", albedo, "uniform albedo");
    render_plane_cmd->add_option("--config", config_path, "sensor config JSON");
    render_plane_cmd->add_option("--angular-resolution", angular_resolution,
                                 "directional grid per axis");
    render_plane_cmd->add_flag("--soft", soft, "use the differentiable soft-binned renderer");
    render_plane_cmd->add_option("--sigma", sigma, "soft-binning width in bins");
    render_plane_cmd->add_option("--out", out_path, "output histogram JSON path");

    // render-depth
    auto* render_depth_cmd =
        app.add_subcommand("render-depth", "Monte-Carlo render of a depth-map scene");
    std::string scene_path;
    std::int64_t rays = 100000;
    std::uint64_t seed = 0;
    std::string rd_config_path, rd_out_path;
    render_depth_cmd->add_option("--scene", scene_path, "TKDM depth map")->required();
    render_depth_cmd->add_option("--config", rd_config_path, "sensor config JSON");
    render_depth_cmd->add_option("--rays", rays, "Monte-Carlo ray count");
    render_depth_cmd->add_option("--seed", seed, "RNG seed")->required();
    render_depth_cmd->add_option("--out", rd_out_path, "output histogram JSON path");

    // spad-sim
    auto* spad_cmd = app.add_subcommand("spad-sim", "simulate SPAD acquisition of a transient");
    std::string spad_in, spad_mode, spad_estimate, spad_out;
    std::int64_t cycles = 0;
    int dead_time_bins = 1;
    std::uint64_t spad_seed = 0;
    spad_cmd->add_option("--in", spad_in, "input transient histogram JSON")->required();
    spad_cmd->add_option("--cycles", cycles, "number of laser cycles")->required();
    spad_cmd->add_option("--mode", spad_mode, "sync | async")
        ->required()
        ->check(CLI::IsMember({"sync", "async"}));
    spad_cmd->add_option("--dead-time-bins", dead_time_bins, "dead time in bins (async)");
    spad_cmd->add_option("--seed", spad_seed, "RNG seed")->required();
    spad_cmd->add_option("--estimate", spad_estimate, "also estimate the transient back")
        ->check(CLI::IsMember({"lowflux", "coates"}));
    spad_cmd->add_option("--out", spad_out, "output JSON path");

    // estimate-plane
    auto* estimate_cmd =
        app.add_subcommand("estimate-plane", "recover plane parameters from a transient");
    std::string est_in, est_method, est_config_path, est_out;
    bool z0_support_center = false;
    CommonEstimateOpts est_opts;
    estimate_cmd->add_option("--in", est_in, "input transient histogram JSON")->required();
    estimate_cmd->add_option("--config", est_config_path, "sensor config JSON");
    estimate_cmd->add_option("--method", est_method, "theoretical | abs")
        ->required()
        ->check(CLI::IsMember({"theoretical", "abs"}));
    estimate_cmd->add_flag("--z0-from-support-center", z0_support_center,
                           "estimate z0 from the support center instead of the peak");
    est_opts.attach(estimate_cmd);
    estimate_cmd->add_option("--out", est_out, "output estimate JSON path");

    // sweep
    auto* sweep_cmd =
        app.add_subcommand("sweep", "compare both estimators over a (z0, theta) grid");
    std::string z0_grid_spec, theta_grid_spec, sweep_config_path, sweep_out, plot_path;
    std::int64_t sweep_cycles = 0;
    int n_seeds = 1;
    std::uint64_t sweep_seed = 1;
    double budget = 0.08;
    CommonEstimateOpts sweep_opts;
    sweep_cmd->add_option("--z0-grid", z0_grid_spec, "z0 grid a:b:n (meters)")->required();
    sweep_cmd->add_option("--theta-grid", theta_grid_spec, "theta grid a:b:n (degrees)")
        ->required();
    sweep_cmd->add_option("--cycles", sweep_cycles, "SPAD cycles; 0 = noiseless");
    sweep_cmd->add_option("--seeds", n_seeds, "number of noise seeds per cell");
    sweep_cmd->add_option("--seed", sweep_seed, "base seed (recorded in the report)");
    sweep_cmd->add_option("--budget", budget, "laser photons per cycle after rescaling");
    sweep_cmd->add_option("--config", sweep_config_path, "sensor config JSON");
    sweep_opts.attach(sweep_cmd);
    sweep_cmd->add_option("--out", sweep_out, "output report JSON path");
    sweep_cmd->add_option("--emit-plot-data", plot_path, "also write per-cell MAEs as CSV");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "depth-map error metrics");
    std::string pred_path, gt_path, metrics_out;
    metrics_cmd->add_option("--pred", pred_path, "predicted depth map (TKDM)")->required();
    metrics_cmd->add_option("--gt", gt_path, "ground-truth depth map (TKDM)")->required();
    metrics_cmd->add_option("--out", metrics_out, "output metrics JSON path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    if (render_plane_cmd->parsed()) {
        const SensorConfig config = resolve_config(config_path, std::nullopt);
        const PlaneParams plane{z0, theta_deg * kDegree, phi_deg * kDegree};
        RenderSettings settings;
        settings.angular_resolution = angular_resolution;
        settings.soft_sigma_bins = sigma;
        HistogramFile file;
        file.config = config;
        file.data = soft ? render_plane_soft(plane, config, settings, albedo).flux
                         : render_plane(plane, config, settings, albedo);
        emit(out_path, histogram_to_json(file), out);
        return 0;
    }

    if (render_depth_cmd->parsed()) {
        const SensorConfig config = resolve_config(rd_config_path, std::nullopt);
        const DepthMapScene scene = load_depth_map(scene_path);
        RenderSettings settings;
        settings.mc_rays = rays;
        settings.seed = seed;
        HistogramFile file;
        file.config = config;
        file.seed = seed;
        file.data = render_depth_map(scene, config, settings);
        emit(rd_out_path, histogram_to_json(file), out);
        return 0;
    }

    if (spad_cmd->parsed()) {
        const HistogramFile input = histogram_from_json(read_text_file(spad_in));
        const TransientHistogram hist = require_transient(input, spad_in);
        SpadHistogram spad;
        HistogramFile file;
        if (spad_mode == "sync") {
            spad = simulate_synchronous_spad(hist, cycles, spad_seed);
        } else {
            spad = simulate_asynchronous_spad(hist, cycles, dead_time_bins, spad_seed);
            file.dead_time_bins = dead_time_bins;
        }
        file.config = input.config;
        file.seed = spad_seed;
        if (spad_estimate.empty()) {
            file.data = std::move(spad);
        } else if (spad_estimate == "lowflux") {
            file.data = estimate_transient_lowflux(spad);
        } else {
            file.data = correct_pileup_coates(spad);
        }
        emit(spad_out, histogram_to_json(file), out);
        return 0;
    }

    if (estimate_cmd->parsed()) {
        const HistogramFile input = histogram_from_json(read_text_file(est_in));
        const TransientHistogram hist = require_transient(input, est_in);
        const SensorConfig config = resolve_config(est_config_path, input.config);
        PlaneEstimate estimate;
        if (est_method == "theoretical") {
            estimate = estimate_plane_theoretical(hist, config, est_opts.threshold_frac,
                                                  z0_support_center);
        } else {
            estimate = estimate_plane_abs(hist, config, est_opts.abs_config());
        }
        emit(est_out, estimate_to_json(estimate), out);
        return 0;
    }

    if (sweep_cmd->parsed()) {
        const SensorConfig config = resolve_config(sweep_config_path, std::nullopt);
        SweepOptions options;
        options.z0_values = parse_grid_spec(z0_grid_spec);
        options.theta_values = parse_grid_spec(theta_grid_spec);
        for (double& t : options.theta_values) t *= kDegree;
        options.cycles = sweep_cycles;
        options.n_seeds = n_seeds;
        options.base_seed = sweep_seed;
        options.photon_budget = budget;
        options.threshold_frac = sweep_opts.threshold_frac;
        options.render_angular_resolution = sweep_opts.angular_resolution;
        options.abs_config = sweep_opts.abs_config();
        const SweepReport report = run_sweep(options, config);
        if (!plot_path.empty()) write_text_file(plot_path, sweep_report_to_csv(report));
        emit(sweep_out, sweep_report_to_json(report), out);
        return 0;
    }

    // metrics
    const DepthMapScene pred = load_depth_map(pred_path);
    const DepthMapScene gt = load_depth_map(gt_path);
    json deltas = json::array();
    for (double base : {1.05, 1.25}) {
        double thr = 1.0;
        for (int i = 1; i <= 3; ++i) {
            thr *= base;
            deltas.push_back(json{{"threshold", thr},
                                  {"accuracy", threshold_accuracy(pred.depth, gt.depth, thr)}});
        }
    }
    json j{{"schema_version", kSchemaVersion},
           {"kind", "depth_metrics"},
           {"abs_rel", abs_rel(pred.depth, gt.depth)},
           {"rmse", rmse(pred.depth, gt.depth)},
           {"log10", log10_err(pred.depth, gt.depth)},
           {"delta", std::move(deltas)}};
    emit(metrics_out, j.dump(2) + "\n", out);
    return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run_cli(args, out, err);
    } catch (const validation_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace transient
