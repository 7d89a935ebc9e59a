#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "firebench/experiments.hpp"
#include "firebench/metrics.hpp"

namespace firebench::cli
{

enum ExitCode : int
{
    Success = 0,
    InternalError = 1,
    InputError = 2,
};

enum class OutputFormat
{
    Markdown,
    Csv,
    Json
};

/// Defaults reproduce the reference protocol: IoU 0.5, envelope AP,
/// 70/15/15 split, 5 folds.
struct Config
{
    double iou_threshold = 0.5;
    ApMethod ap_method = ApMethod::Envelope;
    std::uint64_t seed = 0;
    SplitRatios ratios{};
    std::size_t k = 5;
    OutputFormat format = OutputFormat::Markdown;
    std::filesystem::path out = ".";
    bool stratify = true;
    unsigned threads = 0; ///< 0 = hardware concurrency
};

/// Seed from the FIREBENCH_SEED environment variable, if set and numeric.
std::optional<std::uint64_t> seed_from_env();

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace firebench::cli
