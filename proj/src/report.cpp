#include "firebench/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "firebench/error.hpp"

namespace firebench
{

std::string format_fixed(double value, int decimals)
{
    if (!std::isfinite(value))
        return "nan";
    const double scale = std::pow(10.0, decimals);
    const double scaled = value * scale;
    const double lo = std::floor(scaled);
    const double tol = 1e-9 * std::max(1.0, std::abs(scaled));
    double rounded;
    if (std::abs(scaled - lo - 0.5) <= tol)
        rounded = std::fmod(lo, 2.0) == 0.0 ? lo : lo + 1.0;
    else
        rounded = std::round(scaled);

    long long r = static_cast<long long>(rounded);
    const bool negative = r < 0;
    unsigned long long mag = static_cast<unsigned long long>(negative ? -r : r);
    const auto unit = static_cast<unsigned long long>(std::llround(scale));

    std::string out = negative ? "-" : "";
    out += std::to_string(mag / unit);
    if (decimals > 0) {
        std::string frac = std::to_string(mag % unit);
        out += '.';
        out += std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
    }
    return out;
}

std::string format_shortest(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ec == std::errc() ? ptr : buf);
}

TableFormat parse_table_format(const std::string& text)
{
    if (text == "md" || text == "markdown")
        return TableFormat::Markdown;
    if (text == "csv")
        return TableFormat::Csv;
    throw Error(ErrorKind::Parse, "unknown table format '" + text + "' (expected md or csv)");
}

const char* to_string(TableLayout layout) noexcept
{
    switch (layout) {
    case TableLayout::Accuracy: return "accuracy";
    case TableLayout::Cascaded: return "cascaded";
    case TableLayout::Efficiency: return "efficiency";
    }
    return "?";
}

TableLayout parse_table_layout(const std::string& text)
{
    if (text == "accuracy")
        return TableLayout::Accuracy;
    if (text == "cascaded")
        return TableLayout::Cascaded;
    if (text == "efficiency")
        return TableLayout::Efficiency;
    throw Error(ErrorKind::Parse, "unknown layout '" + text + "' (expected accuracy, cascaded or efficiency)");
}

std::string Table::to_markdown() const
{
    auto line = [](const std::vector<std::string>& cells) {
        std::string out = "|";
        for (const auto& c : cells)
            out += " " + c + " |";
        return out + "\n";
    };
    std::string out = line(header);
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i)
        out += "---|";
    out += "\n";
    for (const auto& r : rows)
        out += line(r);
    return out;
}

std::string Table::to_csv() const
{
    auto quote = [](const std::string& cell) {
        if (cell.find_first_of(",\"\n") == std::string::npos)
            return cell;
        std::string out = "\"";
        for (char c : cell) {
            if (c == '"')
                out += '"';
            out += c;
        }
        return out + "\"";
    };
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out += ',';
            out += quote(cells[i]);
        }
        return out + "\n";
    };
    std::string out = line(header);
    for (const auto& r : rows)
        out += line(r);
    return out;
}

std::string Table::render(TableFormat format) const
{
    return format == TableFormat::Csv ? to_csv() : to_markdown();
}

namespace
{

std::string percent(double fraction)
{
    return format_fixed(fraction * 100.0, 1);
}

std::string map_header(double iou)
{
    return "mAP@" + format_shortest(iou) + " (%)";
}

std::string hours(const std::optional<double>& h)
{
    return h ? format_fixed(*h, 3) : "-";
}

bool is_scratch(const std::string& weights)
{
    std::string s;
    for (char c : weights)
        s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s.empty() || s == "scratch" || s == "-" || s == "none";
}

[[noreturn]] void missing(const ExperimentRecord& r, const std::string& field)
{
    throw Error(ErrorKind::MissingField, "record '" + r.run_id + "' lacks required field '" + field + "'");
}

const EvalReport& require_report(const ExperimentRecord& r, const std::optional<EvalReport>& rep, const char* name)
{
    if (!rep)
        missing(r, name);
    return *rep;
}

// Class columns and IoU threshold come from the first record that has the
// given report; all other records must carry the same classes.
struct ClassColumns
{
    std::vector<std::string> names;
    double iou = 0.5;
};

ClassColumns class_columns(std::span<const ExperimentRecord> records,
                           std::optional<EvalReport> ExperimentRecord::*which, const RenderOptions& options)
{
    for (const auto& r : records) {
        if (const auto& rep = r.*which) {
            ClassColumns cols;
            cols.iou = rep->iou_threshold;
            for (const auto& c : rep->per_class)
                cols.names.push_back(c.class_name);
            return cols;
        }
    }
    return {options.fallback_classes, options.fallback_iou};
}

void append_header(std::vector<std::string>& header, const std::string& prefix, const ClassColumns& cols)
{
    for (const auto& n : cols.names)
        header.push_back(prefix + "AP_" + n + " (%)");
    header.push_back(prefix + map_header(cols.iou));
}

void append_accuracy(std::vector<std::string>& row, const ExperimentRecord& r, const EvalReport& rep,
                     const ClassColumns& cols, const char* field)
{
    std::vector<double> aps;
    for (const auto& name : cols.names) {
        const APResult* ap = rep.find(name);
        if (!ap)
            missing(r, std::string(field) + ".AP_" + name);
        aps.push_back(ap->ap);
        row.push_back(percent(ap->ap));
    }
    if (rep.per_class.size() != cols.names.size())
        throw Error(ErrorKind::MissingField, "record '" + r.run_id + "' " + field + " has a different class set");
    row.push_back(percent(mean_ap(std::span<const double>(aps))));
}

std::string weights_cell(const ExperimentRecord& r)
{
    return is_scratch(r.stages.front().source_weights) ? "-" : r.stages.front().source_weights;
}

Table accuracy_table(std::span<const ExperimentRecord> records, const RenderOptions& options)
{
    const auto val_cols = class_columns(records, &ExperimentRecord::validation, options);
    const auto test_cols = class_columns(records, &ExperimentRecord::testing, options);

    Table t;
    t.header = {"Pre-trained Weights", "Training Time for Weights (Hours)", "Training Description", "Frozen Layers",
                "Epochs", "Training Time (Hours)"};
    append_header(t.header, "Val ", val_cols);
    append_header(t.header, "Test ", test_cols);

    for (const auto& r : records) {
        validate(r);
        const TLStage& last = r.stages.back();
        const bool scratch = is_scratch(r.stages.front().source_weights);
        std::vector<std::string> row{weights_cell(r),
                                     hours(r.weights_training_time_hours),
                                     scratch ? "Train from scratch" : "Fine Tune",
                                     scratch ? "-" : std::to_string(last.frozen_layers),
                                     std::to_string(last.epochs),
                                     hours(last.training_time_hours)};
        append_accuracy(row, r, require_report(r, r.validation, "validation"), val_cols, "validation");
        append_accuracy(row, r, require_report(r, r.testing, "testing"), test_cols, "testing");
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table cascaded_table(std::span<const ExperimentRecord> records, const RenderOptions& options)
{
    const auto val_cols = class_columns(records, &ExperimentRecord::validation, options);
    const auto test_cols = class_columns(records, &ExperimentRecord::testing, options);

    Table t;
    t.header = {"Pre-trained Weights",        "Weights Train Time (Hours)", "Stage 1 Train Dataset",
                "Layers Frozen Stage 1",      "Stage 1 Train Time (Hours)", "Stage 2 Train Dataset",
                "Layers Frozen Stage 2",      "Stage 2 Train Time (Hours)", "Total Train Time (Hours)"};
    append_header(t.header, "Val ", val_cols);
    append_header(t.header, "Test ", test_cols);

    for (const auto& r : records) {
        validate(r);
        if (r.stages.size() > 2)
            throw Error(ErrorKind::Precondition, "record '" + r.run_id + "' has more than two stages");
        const TLStage& s1 = r.stages[0];
        std::vector<std::string> row{weights_cell(r), hours(r.weights_training_time_hours), s1.dataset,
                                     std::to_string(s1.frozen_layers), hours(s1.training_time_hours)};
        if (r.stages.size() == 2) {
            const TLStage& s2 = r.stages[1];
            row.insert(row.end(), {s2.dataset, std::to_string(s2.frozen_layers), hours(s2.training_time_hours)});
        } else {
            row.insert(row.end(), {"-", "-", "-"});
        }
        row.push_back(hours(r.total_training_time_hours()));
        append_accuracy(row, r, require_report(r, r.validation, "validation"), val_cols, "validation");
        append_accuracy(row, r, require_report(r, r.testing, "testing"), test_cols, "testing");
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table efficiency_table(std::span<const ExperimentRecord> records, const RenderOptions& options)
{
    // Testing accuracy when every record has it, validation otherwise.
    const bool use_testing = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.testing; });
    auto which = use_testing ? &ExperimentRecord::testing : &ExperimentRecord::validation;
    const char* field = use_testing ? "testing" : "validation";
    const auto cols = class_columns(records, which, options);

    Table t;
    t.header = {"Pre-trained Weights", "Model", "Avg. FPS", "Avg. Power During Inference (mW)"};
    append_header(t.header, use_testing ? "Test " : "Val ", cols);

    for (const auto& r : records) {
        validate(r);
        if (!r.metrics)
            missing(r, "metrics");
        if (r.model.empty())
            missing(r, "model");
        std::vector<std::string> row{weights_cell(r), r.model, format_fixed(r.metrics->fps, 1),
                                     format_fixed(r.metrics->avg_power_mw, 2)};
        append_accuracy(row, r, require_report(r, r.*which, field), cols, field);
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace

Table build_table(std::span<const ExperimentRecord> records, TableLayout layout, const RenderOptions& options)
{
    switch (layout) {
    case TableLayout::Accuracy: return accuracy_table(records, options);
    case TableLayout::Cascaded: return cascaded_table(records, options);
    case TableLayout::Efficiency: return efficiency_table(records, options);
    }
    throw Error(ErrorKind::Parse, "unknown layout");
}

std::string render_table(std::span<const ExperimentRecord> records, TableLayout layout, TableFormat format,
                         const RenderOptions& options)
{
    return build_table(records, layout, options).render(format);
}

Table eval_table(const EvalReport& report)
{
    Table t;
    std::vector<std::string> row;
    for (const auto& c : report.per_class) {
        t.header.push_back("AP_" + c.class_name + " (%)");
        row.push_back(percent(c.ap));
    }
    t.header.push_back(map_header(report.iou_threshold));
    row.push_back(percent(report.map));
    t.rows.push_back(std::move(row));
    return t;
}

std::string edp_csv(const EdpGroup& group)
{
    std::string out = "run_id,normalized_energy,normalized_runtime,edp\n";
    for (const auto& e : group.entries) {
        out += e.run_id + "," + format_shortest(e.normalized_energy) + "," + format_shortest(e.normalized_runtime) +
               "," + format_shortest(e.edp) + "\n";
    }
    return out;
}

} // namespace firebench
