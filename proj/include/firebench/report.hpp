#pragma once

#include <span>
#include <string>
#include <vector>

#include "firebench/experiments.hpp"
#include "firebench/metrics.hpp"

namespace firebench
{

/// Round to `decimals` places, ties to even, and print. Values within 1e-9
/// (relative) of a tie are treated as exact ties so that decimal inputs such
/// as 79.25 round the same way regardless of binary representation error.
std::string format_fixed(double value, int decimals);

/// Shortest decimal that reads back to the same double.
std::string format_shortest(double value);

enum class TableFormat
{
    Markdown,
    Csv
};

TableFormat parse_table_format(const std::string& text);

enum class TableLayout
{
    Accuracy,  ///< single-stage scratch / fine-tune comparison
    Cascaded,  ///< two-stage transfer lineage
    Efficiency ///< FPS, power and accuracy per model
};

const char* to_string(TableLayout layout) noexcept;
TableLayout parse_table_layout(const std::string& text);

/// Simple grid of already-formatted cells.
struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_markdown() const;
    std::string to_csv() const;
    std::string render(TableFormat format) const;
};

struct RenderOptions
{
    /// Class columns used when there are no records to take them from.
    std::vector<std::string> fallback_classes{"fire", "smoke"};
    double fallback_iou = 0.5;
};

/// Comparative table over experiment records. The mAP cell of each row is
/// recomputed from that row's AP cells with mean_ap.
Table build_table(std::span<const ExperimentRecord> records, TableLayout layout, const RenderOptions& options = {});

std::string render_table(std::span<const ExperimentRecord> records, TableLayout layout, TableFormat format,
                         const RenderOptions& options = {});

/// One-row table: AP per class and mAP, percentages with one decimal.
Table eval_table(const EvalReport& report);

/// run_id,normalized_energy,normalized_runtime,edp
std::string edp_csv(const EdpGroup& group);

} // namespace firebench
