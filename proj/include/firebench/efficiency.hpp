#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace firebench
{

struct PowerSample
{
    double t = 0.0;  ///< seconds since trace start
    double mw = 0.0; ///< milliwatts
};

struct PowerTrace
{
    std::vector<PowerSample> samples;
    std::string source;
};

enum class PowerSchema
{
    Auto,              ///< pick from the header row
    TimePower,         ///< time,power_mw
    TimeVoltageCurrent ///< time,voltage_v,current_ma
};

/// Parse a power-meter CSV export. Timestamps are rebased so the first sample
/// sits at t = 0; the voltage/current schema yields P = V * I (V x mA = mW).
PowerTrace ingest_power_trace(std::string_view csv_text, PowerSchema schema = PowerSchema::Auto,
                              std::string source = {});

enum class PowerAveraging
{
    SampleMean,   ///< unweighted mean of the samples
    TimeWeighted, ///< trapezoid integral divided by duration
};

double average_power(const PowerTrace& trace, PowerAveraging mode = PowerAveraging::SampleMean);

/// Trapezoidal integral of power over the trace timestamps, in joules.
double energy(const PowerTrace& trace);

/// Sample-mean power times trace duration, in joules. Diagnostic counterpart to energy().
double energy_from_mean_power(const PowerTrace& trace);

double trace_duration(const PowerTrace& trace);

double fps(std::size_t n_images, double runtime_s);

enum class EnergyMethod
{
    Trapezoid,
    MeanPowerTimesRuntime,
};

const char* to_string(EnergyMethod method) noexcept;

struct RunMetrics
{
    std::string run_id;
    std::size_t n_images = 0;
    double runtime_s = 0.0;
    double avg_power_mw = 0.0;
    double energy_j = 0.0;
    double fps = 0.0;
    /// Free-form description of what the runtime window covered.
    std::string window;
    EnergyMethod energy_method = EnergyMethod::Trapezoid;
    /// |trapezoid energy - mean power x runtime| when a trace was used.
    std::optional<double> energy_discrepancy_j;
};

/// Timing log: either start/end timestamps or a measured runtime.
struct TimingLog
{
    std::string run_id;
    std::size_t n_images = 0;
    double runtime_s = 0.0;
    std::string window;
};

TimingLog parse_timing_log(std::string_view json_text);

struct BenchOptions
{
    PowerAveraging averaging = PowerAveraging::SampleMean;
    EnergyMethod energy = EnergyMethod::Trapezoid;
};

/// Combine a timing log with the power trace covering the same window.
RunMetrics make_run_metrics(const TimingLog& timing, const PowerTrace& trace, const BenchOptions& options = {});

/// Build metrics from already-known values; checks the fps identity holds.
RunMetrics make_run_metrics(std::string run_id, std::size_t n_images, double runtime_s, double avg_power_mw,
                            double energy_j);

/// Normalized energy times normalized runtime against the group maxima.
double edp(const RunMetrics& run, double max_energy_j, double max_runtime_s);

struct EdpEntry
{
    std::string run_id;
    double normalized_energy = 0.0;
    double normalized_runtime = 0.0;
    double edp = 0.0;
};

struct EdpGroup
{
    std::string name;
    std::vector<RunMetrics> members;
    double max_energy_j = 0.0;
    double max_runtime_s = 0.0;
    std::vector<EdpEntry> entries; ///< parallel to members

    /// Index of the member with the lowest EDP (first on ties).
    std::size_t best() const;
};

EdpGroup edp_group(std::span<const RunMetrics> runs, std::string name = {});

/// Real-time bar from the low end of the 25-30 FPS band.
inline constexpr double realtime_fps_threshold = 25.0;

} // namespace firebench
