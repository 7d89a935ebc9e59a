#include "firebench/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "firebench/error.hpp"

namespace firebench
{

StratumKey stratum_of(const ImageRecord& image)
{
    std::set<int> ids;
    for (const auto& g : image.ground_truth)
        ids.insert(g.class_id);
    return StratumKey(ids.begin(), ids.end());
}

std::string stratum_label(const StratumKey& key, const ClassTable& classes)
{
    std::string out = "{";
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (i)
            out += ',';
        out += classes.name_of(key[i]);
    }
    return out + "}";
}

std::map<StratumKey, std::vector<std::string>> stratify(std::span<const ImageRecord> images)
{
    std::map<StratumKey, std::vector<std::string>> strata;
    for (const auto& img : images)
        strata[stratum_of(img)].push_back(img.image_id);
    return strata;
}

const char* to_string(Subset s) noexcept
{
    switch (s) {
    case Subset::Train: return "train";
    case Subset::Val: return "val";
    case Subset::Test: return "test";
    }
    return "?";
}

SplitRatios parse_ratios(const std::string& text)
{
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "invalid ratio '" + item + "'");
        }
    }
    if (parts.size() != 3)
        throw Error(ErrorKind::Parse, "ratios need three comma-separated values (train,val,test)");
    return {parts[0], parts[1], parts[2]};
}

namespace
{

void check_ratios(const SplitRatios& r)
{
    if (r.train < 0.0 || r.val < 0.0 || r.test < 0.0)
        throw Error(ErrorKind::Range, "split ratios must be non-negative");
    if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
        throw Error(ErrorKind::Range, "split ratios must sum to 1");
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream per stratum so adding a stratum leaves the others untouched.
std::uint64_t stratum_seed(std::uint64_t seed, const StratumKey& key)
{
    std::uint64_t h = splitmix64(seed);
    for (int id : key)
        h = splitmix64(h ^ static_cast<std::uint64_t>(id + 1));
    return h;
}

std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t n)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine();
    while (x >= limit)
        x = engine();
    return x % n;
}

template <class T>
std::vector<std::string> collect(const std::vector<std::pair<std::string, T>>& assignment, T value)
{
    std::vector<std::string> out;
    for (const auto& [id, v] : assignment)
        if (v == value)
            out.push_back(id);
    return out;
}

} // namespace

void seeded_shuffle(std::vector<std::string>& items, std::uint64_t seed)
{
    std::mt19937_64 engine(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded(engine, i));
        std::swap(items[i - 1], items[j]);
    }
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios)
{
    check_ratios(ratios);
    const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double quota = static_cast<double>(n) * r[i];
        sizes[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
        frac[i] = quota - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned > n) {
        // Only reachable through rounding slack in the ratio sum.
        auto it = std::max_element(sizes.begin(), sizes.end());
        --*it;
        --assigned;
    }

    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(frac[a] - frac[b]) <= 1e-9)
            return false;
        return frac[a] > frac[b];
    });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
        if (r[order[k]] == 0.0)
            continue;
        ++sizes[order[k]];
        ++assigned;
    }
    return sizes;
}

std::vector<std::string> SplitAssignment::ids_in(Subset s) const
{
    return collect(assignment, s);
}

std::size_t SplitAssignment::count(Subset s) const
{
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [s](const auto& p) { return p.second == s; }));
}

SplitAssignment split(std::span<const ImageRecord> images, const SplitRatios& ratios, std::uint64_t seed,
                      bool stratified)
{
    check_ratios(ratios);
    if (images.empty())
        throw Error(ErrorKind::Precondition, "cannot split an empty dataset");

    std::map<StratumKey, std::vector<std::string>> strata;
    if (stratified) {
        strata = stratify(images);
    } else {
        auto& all = strata[StratumKey{}];
        for (const auto& img : images)
            all.push_back(img.image_id);
    }

    std::map<std::string, Subset> chosen;
    for (auto& [key, ids] : strata) {
        seeded_shuffle(ids, stratum_seed(seed, key));
        const auto sizes = apportion(ids.size(), ratios);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Subset s = i < sizes[0] ? Subset::Train : (i < sizes[0] + sizes[1] ? Subset::Val : Subset::Test);
            chosen.emplace(ids[i], s);
        }
    }

    SplitAssignment out;
    out.seed = seed;
    out.ratios = ratios;
    out.stratified = stratified;
    out.assignment.reserve(images.size());
    for (const auto& img : images)
        out.assignment.emplace_back(img.image_id, chosen.at(img.image_id));
    return out;
}

std::vector<std::string> FoldAssignment::ids_in(std::size_t fold) const
{
    return collect(assignment, fold);
}

FoldAssignment stratified_kfold(std::span<const ImageRecord> images, std::size_t k, std::uint64_t seed)
{
    if (k < 2)
        throw Error(ErrorKind::Precondition, "k-fold needs k >= 2");
    if (k > images.size())
        throw Error(ErrorKind::Precondition,
                    "k = " + std::to_string(k) + " exceeds dataset size " + std::to_string(images.size()));

    auto strata = stratify(images);
    std::map<std::string, std::size_t> chosen;
    // Round-robin continues across strata so the global fold sizes stay level too.
    std::size_t next = 0;
    for (auto& [key, ids] : strata) {
        seeded_shuffle(ids, stratum_seed(seed, key));
        for (const auto& id : ids) {
            chosen.emplace(id, next);
            next = (next + 1) % k;
        }
    }

    FoldAssignment out;
    out.k = k;
    out.seed = seed;
    out.assignment.reserve(images.size());
    for (const auto& img : images)
        out.assignment.emplace_back(img.image_id, chosen.at(img.image_id));
    return out;
}

std::vector<CvIteration> cv_iterations(const FoldAssignment& folds)
{
    std::vector<CvIteration> out(folds.k);
    for (const auto& [id, fold] : folds.assignment) {
        for (std::size_t i = 0; i < folds.k; ++i)
            (i == fold ? out[i].val : out[i].train).push_back(id);
    }
    return out;
}

Dispersion ap_dispersion(std::span<const double> values)
{
    if (values.size() < 2)
        throw Error(ErrorKind::InsufficientData, "AP dispersion needs at least two folds");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

std::optional<double> ExperimentRecord::total_training_time_hours() const
{
    std::optional<double> total;
    for (const auto& s : stages)
        if (s.training_time_hours)
            total = total.value_or(0.0) + *s.training_time_hours;
    if (total && weights_training_time_hours)
        *total += *weights_training_time_hours;
    return total;
}

void validate(const ExperimentRecord& record)
{
    if (record.stages.empty())
        throw Error(ErrorKind::MissingField, "record '" + record.run_id + "' has no training stages");
    for (std::size_t i = 0; i < record.stages.size(); ++i) {
        const auto& s = record.stages[i];
        if (s.index != static_cast<int>(i + 1))
            throw Error(ErrorKind::Precondition, "record '" + record.run_id + "' stage indices must run 1..n");
        if (s.frozen_layers < 0)
            throw Error(ErrorKind::Range, "record '" + record.run_id + "' has negative frozen layers");
        if (s.epochs < 1)
            throw Error(ErrorKind::Range, "record '" + record.run_id + "' stage needs at least one epoch");
    }
}

} // namespace firebench
