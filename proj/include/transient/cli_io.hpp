#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "transient/metrics_eval.hpp"
#include "transient/plane_estimation.hpp"
#include "transient/scene_model.hpp"

namespace transient {

// JSON schemas are versioned; schema_version 1 throughout.

std::string config_to_json(const SensorConfig& config);
SensorConfig config_from_json(const std::string& text);

// Histogram files hold either a transient (real flux) or a SPAD histogram
// (integer counts + cycles + mode), plus an optional config snapshot and
// acquisition metadata.
struct HistogramFile {
    std::variant<TransientHistogram, SpadHistogram> data;
    std::optional<SensorConfig> config;
    std::optional<int> dead_time_bins;
    std::optional<std::uint64_t> seed;

    bool is_transient() const { return std::holds_alternative<TransientHistogram>(data); }
    const TransientHistogram& transient() const { return std::get<TransientHistogram>(data); }
    const SpadHistogram& spad() const { return std::get<SpadHistogram>(data); }
};

std::string histogram_to_json(const HistogramFile& file);
HistogramFile histogram_from_json(const std::string& text);

std::string estimate_to_json(const PlaneEstimate& estimate);
std::string sweep_report_to_json(const SweepReport& report);

// One CSV row per (z0, theta) cell with both methods' MAEs.
std::string sweep_report_to_csv(const SweepReport& report);

// Depth-map text format:
//   TKDM 1 <width> <height> <fov_rad>
// followed by height rows of width depth values (meters), then height rows
// of width albedo values in [0, 1]; row-major, top-left origin.
DepthMapScene read_depth_map(std::istream& in);
void write_depth_map(std::ostream& out, const DepthMapScene& scene);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
DepthMapScene load_depth_map(const std::string& path);

// Command-line surface. `args` excludes the program name. Returns the exit
// code: 0 success, 1 validation/usage error, 2 numerical failure. Results go
// to `out` as JSON when no --out file is given; diagnostics go to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transient
