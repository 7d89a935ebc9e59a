#include "firebench/efficiency.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <json.hpp>

#include "firebench/error.hpp"

namespace firebench
{

namespace
{

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

int find_column(const std::vector<std::string>& header, std::initializer_list<const char*> names)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        for (const char* n : names)
            if (header[i] == n)
                return static_cast<int>(i);
    return -1;
}

double parse_number(std::string_view field, const char* column, std::size_t row)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
        throw Error(ErrorKind::Parse, std::string("invalid ") + column + " value '" + std::string(field) + "'", {}, row);
    return v;
}

void require_samples(const PowerTrace& trace, std::size_t n, const char* what)
{
    if (trace.samples.size() < n)
        throw Error(ErrorKind::InsufficientData, std::string(what) + " needs at least " + std::to_string(n) +
                                                     " power samples, trace has " +
                                                     std::to_string(trace.samples.size()));
}

} // namespace

PowerTrace ingest_power_trace(std::string_view csv_text, PowerSchema schema, std::string source)
{
    PowerTrace trace;
    trace.source = std::move(source);

    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos < csv_text.size()) {
        std::size_t end = csv_text.find('\n', pos);
        if (end == std::string_view::npos)
            end = csv_text.size();
        ++number;
        std::string_view line = trim(csv_text.substr(pos, end - pos));
        if (!line.empty())
            lines.emplace_back(number, line);
        pos = end + 1;
    }
    if (lines.empty())
        throw Error(ErrorKind::InsufficientData, "power CSV is empty");

    std::vector<std::string> header;
    for (auto f : split_csv(lines.front().second))
        header.push_back(lower(f));

    const int t_col = find_column(header, {"time", "time_s", "t", "timestamp"});
    const int p_col = find_column(header, {"power_mw", "power"});
    const int v_col = find_column(header, {"voltage_v", "voltage"});
    const int i_col = find_column(header, {"current_ma", "current"});
    if (t_col < 0)
        throw Error(ErrorKind::Parse, "header lacks a time column", {}, lines.front().first);

    if (schema == PowerSchema::Auto)
        schema = p_col >= 0 ? PowerSchema::TimePower : PowerSchema::TimeVoltageCurrent;
    if (schema == PowerSchema::TimePower && p_col < 0)
        throw Error(ErrorKind::Parse, "header lacks power_mw column", {}, lines.front().first);
    if (schema == PowerSchema::TimeVoltageCurrent && (v_col < 0 || i_col < 0))
        throw Error(ErrorKind::Parse, "header lacks voltage_v/current_ma columns", {}, lines.front().first);

    const std::size_t needed =
        static_cast<std::size_t>(std::max({t_col, schema == PowerSchema::TimePower ? p_col : std::max(v_col, i_col)})) + 1;

    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto [row, text] = lines[k];
        auto fields = split_csv(text);
        if (fields.size() < needed)
            throw Error(ErrorKind::Parse, "row has " + std::to_string(fields.size()) + " columns", {}, row);

        PowerSample s;
        s.t = parse_number(fields[t_col], "time", row);
        if (schema == PowerSchema::TimePower) {
            s.mw = parse_number(fields[p_col], "power", row);
        } else {
            s.mw = parse_number(fields[v_col], "voltage", row) * parse_number(fields[i_col], "current", row);
        }
        if (s.mw < 0.0)
            throw Error(ErrorKind::Range, "negative power " + std::to_string(s.mw) + " mW", {}, row);
        if (!trace.samples.empty() && !(s.t > trace.samples.back().t))
            throw Error(ErrorKind::Ordering, "timestamp not strictly increasing", {}, row);
        trace.samples.push_back(s);
    }
    require_samples(trace, 2, "a power trace");

    const double t0 = trace.samples.front().t;
    for (auto& s : trace.samples)
        s.t -= t0;
    return trace;
}

double trace_duration(const PowerTrace& trace)
{
    require_samples(trace, 1, "trace duration");
    return trace.samples.back().t - trace.samples.front().t;
}

double energy(const PowerTrace& trace)
{
    require_samples(trace, 2, "energy");
    double mws = 0.0;
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const auto& a = trace.samples[i - 1];
        const auto& b = trace.samples[i];
        mws += 0.5 * (a.mw + b.mw) * (b.t - a.t);
    }
    return mws / 1000.0;
}

double average_power(const PowerTrace& trace, PowerAveraging mode)
{
    require_samples(trace, 1, "average power");
    if (mode == PowerAveraging::TimeWeighted) {
        require_samples(trace, 2, "time-weighted average power");
        return energy(trace) * 1000.0 / trace_duration(trace);
    }
    double sum = 0.0;
    for (const auto& s : trace.samples)
        sum += s.mw;
    const double mean = sum / static_cast<double>(trace.samples.size());
    // Guard against rounding pushing the mean outside the sample range.
    auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end(),
                                        [](const PowerSample& a, const PowerSample& b) { return a.mw < b.mw; });
    return std::clamp(mean, lo->mw, hi->mw);
}

double energy_from_mean_power(const PowerTrace& trace)
{
    require_samples(trace, 2, "energy");
    return average_power(trace) * trace_duration(trace) / 1000.0;
}

double fps(std::size_t n_images, double runtime_s)
{
    if (n_images == 0)
        throw Error(ErrorKind::Precondition, "fps needs at least one image");
    if (!(runtime_s > 0.0))
        throw Error(ErrorKind::Precondition, "fps needs a positive runtime");
    return static_cast<double>(n_images) / runtime_s;
}

const char* to_string(EnergyMethod method) noexcept
{
    return method == EnergyMethod::Trapezoid ? "trapezoid" : "mean_power_x_runtime";
}

TimingLog parse_timing_log(std::string_view json_text)
{
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    if (!doc.is_object())
        throw Error(ErrorKind::Parse, "timing log must be a JSON object");

    TimingLog log;
    if (!doc.contains("run_id") || !doc["run_id"].is_string())
        throw Error(ErrorKind::MissingField, "timing log lacks string 'run_id'");
    log.run_id = doc["run_id"].get<std::string>();
    if (!doc.contains("n_images") || !doc["n_images"].is_number_integer() || doc["n_images"].get<long long>() < 0)
        throw Error(ErrorKind::MissingField, "timing log lacks non-negative integer 'n_images'");
    log.n_images = doc["n_images"].get<std::size_t>();

    if (doc.contains("runtime_s")) {
        if (!doc["runtime_s"].is_number())
            throw Error(ErrorKind::Parse, "'runtime_s' must be a number");
        log.runtime_s = doc["runtime_s"].get<double>();
    } else if (doc.contains("start_ts") && doc.contains("end_ts")) {
        if (!doc["start_ts"].is_number() || !doc["end_ts"].is_number())
            throw Error(ErrorKind::Parse, "'start_ts' and 'end_ts' must be numbers");
        log.runtime_s = doc["end_ts"].get<double>() - doc["start_ts"].get<double>();
    } else {
        throw Error(ErrorKind::MissingField, "timing log needs 'runtime_s' or 'start_ts' + 'end_ts'");
    }
    if (!(log.runtime_s > 0.0))
        throw Error(ErrorKind::Range, "runtime must be positive");
    if (doc.contains("window") && doc["window"].is_string())
        log.window = doc["window"].get<std::string>();
    return log;
}

RunMetrics make_run_metrics(const TimingLog& timing, const PowerTrace& trace, const BenchOptions& options)
{
    RunMetrics m;
    m.run_id = timing.run_id;
    m.n_images = timing.n_images;
    m.runtime_s = timing.runtime_s;
    m.fps = fps(timing.n_images, timing.runtime_s);
    m.window = timing.window;
    m.avg_power_mw = average_power(trace, options.averaging);
    m.energy_method = options.energy;
    m.energy_j = options.energy == EnergyMethod::Trapezoid ? energy(trace)
                                                           : m.avg_power_mw * timing.runtime_s / 1000.0;
    m.energy_discrepancy_j = std::abs(energy(trace) - energy_from_mean_power(trace));
    return m;
}

RunMetrics make_run_metrics(std::string run_id, std::size_t n_images, double runtime_s, double avg_power_mw,
                            double energy_j)
{
    if (energy_j < 0.0)
        throw Error(ErrorKind::Range, "energy must be non-negative");
    RunMetrics m;
    m.run_id = std::move(run_id);
    m.n_images = n_images;
    m.runtime_s = runtime_s;
    m.fps = fps(n_images, runtime_s);
    m.avg_power_mw = avg_power_mw;
    m.energy_j = energy_j;
    return m;
}

double edp(const RunMetrics& run, double max_energy_j, double max_runtime_s)
{
    if (!(run.energy_j > 0.0) || !(run.runtime_s > 0.0))
        throw Error(ErrorKind::Precondition, "run '" + run.run_id + "' needs positive energy and runtime for EDP");
    if (run.energy_j > max_energy_j || run.runtime_s > max_runtime_s)
        throw Error(ErrorKind::Precondition, "run '" + run.run_id + "' exceeds the group maxima; form the group first");
    return (run.energy_j / max_energy_j) * (run.runtime_s / max_runtime_s);
}

std::size_t EdpGroup::best() const
{
    if (entries.empty())
        throw Error(ErrorKind::Precondition, "empty EDP group");
    std::size_t idx = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].edp < entries[idx].edp)
            idx = i;
    return idx;
}

EdpGroup edp_group(std::span<const RunMetrics> runs, std::string name)
{
    if (runs.size() < 2)
        throw Error(ErrorKind::Precondition, "an EDP group needs at least two runs to normalize against");
    EdpGroup group;
    group.name = std::move(name);
    group.members.assign(runs.begin(), runs.end());
    for (const auto& r : runs) {
        if (!(r.energy_j > 0.0) || !(r.runtime_s > 0.0))
            throw Error(ErrorKind::Precondition, "run '" + r.run_id + "' needs positive energy and runtime for EDP");
        group.max_energy_j = std::max(group.max_energy_j, r.energy_j);
        group.max_runtime_s = std::max(group.max_runtime_s, r.runtime_s);
    }
    for (const auto& r : runs) {
        group.entries.push_back({r.run_id, r.energy_j / group.max_energy_j, r.runtime_s / group.max_runtime_s,
                                 edp(r, group.max_energy_j, group.max_runtime_s)});
    }
    return group;
}

} // namespace firebench
