#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "firebench/efficiency.hpp"
#include "firebench/experiments.hpp"
#include "firebench/metrics.hpp"

namespace firebench
{

using json = nlohmann::json;

json to_json(const EvalReport& report, bool include_curves = true);
EvalReport eval_report_from_json(const json& j);

json to_json(const RunMetrics& metrics);
RunMetrics run_metrics_from_json(const json& j);

json to_json(const EdpGroup& group);

json to_json(const SplitAssignment& split, const ClassTable& classes, std::span<const ImageRecord> images);
json to_json(const FoldAssignment& folds, const ClassTable& classes, std::span<const ImageRecord> images);

json to_json(const ExperimentRecord& record);
ExperimentRecord experiment_record_from_json(const json& j);

/// Every `*.json` file in `dir`, ordered by file name.
std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir);

/// Write through a temporary sibling file and rename it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace firebench
