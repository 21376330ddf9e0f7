#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vdpu/cifar.hpp"
#include "vdpu/compiler.hpp"
#include "vdpu/dpusim.hpp"
#include "vdpu/model_io.hpp"
#include "vdpu/target.hpp"

namespace vdpu {

// ---- metrics and comparison tables ----

struct MetricRow {
    std::string platform;
    double fps = 0.0;
    double power_w = 0.0;
    std::int64_t images = 0;
    std::int64_t ops_per_frame = 0;  // 0 when unknown (external baselines)
    double latency_s = 0.0;          // images / fps
    double efficiency = 0.0;         // fps / power_w
    double achieved_gops = 0.0;      // ops_per_frame * fps / 1e9
    std::optional<double> accuracy;
    /// Efficiency as printed by the source of an external row, if it differs from fps / power.
    std::optional<double> reported_efficiency;
};

MetricRow compute_metrics(double fps, double power_w, std::int64_t images, std::int64_t ops_per_frame = 0);

struct ComparisonRow {
    MetricRow metrics;
    double throughput_ratio = 1.0;
    double efficiency_ratio = 1.0;
    std::optional<double> reported_efficiency_ratio;
    std::optional<int> footnote;
};

struct ComparisonReport {
    std::string baseline;
    std::vector<ComparisonRow> rows;
    std::vector<std::string> footnotes;

    const ComparisonRow& row(const std::string& platform) const;
    std::string to_text() const;
    std::string to_csv() const;
};

/// Ratios are value / baseline value. A row whose reported efficiency does
/// not round to its computed one keeps the computed value and gets a footnote.
ComparisonReport compare_report(const std::vector<MetricRow>& rows, const std::string& baseline);

/// CSV with a header row. Columns: platform, fps, power_w, images (default
/// 10000), optional accuracy, reported_efficiency, ops_per_frame.
std::vector<MetricRow> parse_metric_rows(const std::string& csv);
std::vector<MetricRow> load_metric_rows(const std::filesystem::path& path);

// ---- throughput model ----

/// Simulated time for `images` frames split round-robin over `threads`
/// streams. Streams advance in lockstep, one frame each per step; a step with
/// s live streams costs frame_trace(..., s).total_cycles.
std::int64_t makespan_cycles(const std::vector<LayerTotals>& layers, const TargetConfig& target, int threads,
                             std::int64_t images, const StreamModel& model = {});

double predict_fps(const std::vector<LayerTotals>& layers, const TargetConfig& target, int threads,
                   std::int64_t images, const StreamModel& model = {});

struct Observation {
    int threads = 1;
    double fps = 0.0;
};

struct FitResult {
    double core_time_s = 0.0;
    double kappa = 0.0;
    std::vector<Observation> observed;
    std::vector<double> predicted_fps;
    std::vector<double> residuals;  // (predicted - observed) / observed
    double rms_residual = 0.0;

    json to_json() const;
};

/// Least-squares fit of (per-frame core time, kappa) to observed fps. Core
/// time is identified by the observations with threads <= cores, kappa by
/// the ones beyond; the two are then refined jointly.
FitResult fit_scenario(const std::vector<Observation>& observations, const TargetConfig& target,
                       const std::vector<LayerTotals>& layers, std::int64_t images = 10000);

/// CSV "threads,fps" with a header row.
std::vector<Observation> parse_observations(const std::string& csv);
std::vector<Observation> load_observations(const std::filesystem::path& path);

// ---- benchmark ----

struct Scenario {
    std::string name = "scenario";
    std::filesystem::path target;
    std::filesystem::path model;  // compiled model manifest
    std::vector<int> threads{1, 2, 3};
    std::int64_t images = 10000;
    double kappa = 0.0;
    std::optional<double> core_time_s;
    std::vector<MetricRow> baselines;
    std::string baseline = "cpu";
    /// Remaining document fields (fit provenance and the like), kept on save.
    json extra = json::object();

    StreamModel stream_model() const { return {kappa, core_time_s}; }
};

/// Relative paths resolve against the scenario file's directory.
Scenario load_scenario(const std::filesystem::path& path);
json scenario_to_json(const Scenario& s);

struct BenchmarkOptions {
    std::vector<int> threads{1, 2, 3};
    std::int64_t images = 10000;
    StreamModel stream;
    /// Host worker threads per run; 0 means one per simulated stream.
    unsigned host_threads = 0;
    /// Run every frame through simulate_frame (needs image data).
    bool execute = false;
};

struct ThreadRow {
    int threads = 1;
    std::int64_t images = 0;
    std::int64_t makespan_cycles = 0;
    double seconds = 0.0;
    double fps = 0.0;
    double latency_s = 0.0;
    double achieved_gops = 0.0;
    double bandwidth_mbps_used = 0.0;
    double fps_per_watt = 0.0;
    std::optional<double> accuracy;
    /// How many times each image went through a stream (all ones).
    std::vector<int> visits;
};

struct RunReport {
    std::string model;
    std::string target;
    double power_w = 0.0;
    double bandwidth_mbps = 0.0;
    std::int64_t ops_per_frame = 0;
    std::int64_t bytes_per_frame = 0;
    std::vector<ThreadRow> rows;
    std::optional<ComparisonReport> comparison;

    std::string to_text() const;
    std::string to_csv() const;
};

/// `data` supplies images (and labels for accuracy) when options.execute is
/// set; otherwise only the simulated timing is produced.
RunReport run_benchmark(const LoadedModel& handle, const BenchmarkOptions& options,
                        const Cifar10Batch* data = nullptr);

/// Loads target and compiled model from the scenario and appends the
/// simulated rows to the scenario's baselines for the comparison table.
RunReport run_benchmark(const Scenario& scenario, const Cifar10Batch* data = nullptr, unsigned host_threads = 0);

}  // namespace vdpu
