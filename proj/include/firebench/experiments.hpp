#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "firebench/annotations.hpp"
#include "firebench/efficiency.hpp"
#include "firebench/metrics.hpp"

namespace firebench
{

/// Image-level label combination: sorted distinct class ids present in the
/// image's ground truth. Empty for background-only images.
using StratumKey = std::vector<int>;

StratumKey stratum_of(const ImageRecord& image);

/// "{fire,smoke}" style label for a stratum, using class names when known.
std::string stratum_label(const StratumKey& key, const ClassTable& classes);

/// Image ids grouped by stratum; ids within a stratum keep dataset order.
std::map<StratumKey, std::vector<std::string>> stratify(std::span<const ImageRecord> images);

enum class Subset
{
    Train,
    Val,
    Test
};

const char* to_string(Subset s) noexcept;

struct SplitRatios
{
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

SplitRatios parse_ratios(const std::string& text);

struct SplitAssignment
{
    std::uint64_t seed = 0;
    SplitRatios ratios;
    bool stratified = true;
    /// (image_id, subset) in dataset order.
    std::vector<std::pair<std::string, Subset>> assignment;

    std::vector<std::string> ids_in(Subset s) const;
    std::size_t count(Subset s) const;
};

/// Largest-remainder apportionment of n items over three ratios. Ties in the
/// fractional part go to train, then val.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios);

SplitAssignment split(std::span<const ImageRecord> images, const SplitRatios& ratios, std::uint64_t seed,
                      bool stratified = true);

struct FoldAssignment
{
    std::size_t k = 5;
    std::uint64_t seed = 0;
    /// (image_id, fold index) in dataset order.
    std::vector<std::pair<std::string, std::size_t>> assignment;

    std::vector<std::string> ids_in(std::size_t fold) const;
};

FoldAssignment stratified_kfold(std::span<const ImageRecord> images, std::size_t k, std::uint64_t seed);

struct CvIteration
{
    std::vector<std::string> train;
    std::vector<std::string> val;
};

std::vector<CvIteration> cv_iterations(const FoldAssignment& folds);

struct Dispersion
{
    double mean = 0.0;
    double stddev = 0.0; ///< sample standard deviation, n-1 denominator
};

Dispersion ap_dispersion(std::span<const double> per_fold_aps);

/// Deterministic Fisher-Yates shuffle driven by a 64-bit Mersenne Twister.
/// Both the engine and the index draw are fully specified, so results match
/// across standard libraries.
void seeded_shuffle(std::vector<std::string>& items, std::uint64_t seed);

struct TLStage
{
    int index = 1;
    std::string source_weights; ///< "scratch", "COCO", "FASDD", ...
    std::string dataset;
    int frozen_layers = 0;
    int epochs = 1;
    std::optional<double> initial_lr;
    std::optional<double> training_time_hours;
};

struct ExperimentRecord
{
    std::string run_id;
    std::string model;
    /// Time spent producing the starting weights, when they were trained in-house.
    std::optional<double> weights_training_time_hours;
    std::vector<TLStage> stages;
    std::optional<EvalReport> validation;
    std::optional<EvalReport> testing;
    std::optional<RunMetrics> metrics;
    std::vector<std::string> edp_groups;

    /// Sum of stage times plus the pre-trained-weights time.
    std::optional<double> total_training_time_hours() const;
};

/// Throws Precondition when stages are empty or not numbered 1..n.
void validate(const ExperimentRecord& record);

} // namespace firebench
