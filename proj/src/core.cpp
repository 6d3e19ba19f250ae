#include "stvs/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "stvs/error.hpp"
#include "stvs/rng.hpp"

namespace stvs {

std::string_view to_string(Class c) {
    return c == Class::Stable ? "stable" : "unstable";
}

Class class_from_string(std::string_view s) {
    if (s == "stable") return Class::Stable;
    if (s == "unstable") return Class::Unstable;
    throw FormatError("unknown class name '" + std::string(s) + "'");
}

namespace core {

void ScenarioParams::validate() const {
    if (!(load_level > 0.0)) throw ConfigError("load_level must be positive");
    if (!(motor_fraction >= 0.0 && motor_fraction <= 1.0))
        throw ConfigError("motor_fraction must lie in [0, 1]");
    if (fault_line < 0) throw ConfigError("fault_line must be non-negative");
    if (!(fault_position >= 0.0 && fault_position < 1.0))
        throw ConfigError("fault_position must lie in [0, 1)");
    if (!(clear_time_s > 0.0)) throw ConfigError("clear_time_s must be a positive delay");
    if (!std::isfinite(fault_time_s)) throw ConfigError("fault_time_s must be finite");
}

void NormStats::validate() const {
    if (min.size() != max.size()) throw ShapeError("norm stats min/max length mismatch");
    for (Eigen::Index c = 0; c < min.size(); ++c) {
        if (!(max[c] >= min[c]))
            throw RangeError("norm stats max < min in channel " + std::to_string(c));
    }
}

void Dataset::validate() const {
    if (meta.buses < 1 || meta.steps < 1) throw ShapeError("dataset needs L >= 1 and m >= 1");
    std::unordered_set<std::int64_t> ids;
    for (const auto& inst : instances) {
        if (inst.id < 0) throw FormatError("negative instance id");
        if (!ids.insert(inst.id).second)
            throw FormatError("duplicate instance id " + std::to_string(inst.id));
        if (inst.series.rows() != meta.steps || inst.series.cols() != meta.channels())
            throw ShapeError("instance " + std::to_string(inst.id) + " has shape " +
                             std::to_string(inst.series.rows()) + "x" +
                             std::to_string(inst.series.cols()) + ", expected " +
                             std::to_string(meta.steps) + "x" + std::to_string(meta.channels()));
        if (!inst.series.allFinite())
            throw NumericError("instance " + std::to_string(inst.id) + " has non-finite values");
    }
    if (meta.norm_stats) {
        meta.norm_stats->validate();
        if (meta.norm_stats->channels() != meta.channels())
            throw ShapeError("norm stats channel count does not match dataset");
    }
}

TimeSeriesInstance window(const TimeSeriesInstance& instance, int otw_steps) {
    if (otw_steps < 1 || otw_steps > instance.steps())
        throw RangeError("otw_steps " + std::to_string(otw_steps) + " outside [1, " +
                         std::to_string(instance.steps()) + "]");
    TimeSeriesInstance out = instance;
    out.series = instance.series.topRows(otw_steps);
    return out;
}

Dataset window(const Dataset& ds, int otw_steps) {
    if (otw_steps < 1 || otw_steps > ds.meta.steps)
        throw RangeError("otw_steps " + std::to_string(otw_steps) + " outside [1, " +
                         std::to_string(ds.meta.steps) + "]");
    Dataset out;
    out.meta = ds.meta;
    out.meta.steps = otw_steps;
    out.instances.reserve(ds.size());
    for (const auto& inst : ds.instances) out.instances.push_back(window(inst, otw_steps));
    return out;
}

NormStats fit_normalizer(const Dataset& train) {
    if (train.empty()) throw EmptyInputError("cannot fit a normalizer on an empty dataset");
    const Eigen::Index d = train.instances.front().channels();
    NormStats stats;
    stats.min = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    stats.max = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
    for (const auto& inst : train.instances) {
        if (inst.channels() != d) throw ShapeError("channel count differs across instances");
        stats.min = stats.min.cwiseMin(inst.series.colwise().minCoeff().transpose());
        stats.max = stats.max.cwiseMax(inst.series.colwise().maxCoeff().transpose());
    }
    return stats;
}

Series apply_normalizer(const Series& series, const NormStats& stats) {
    if (series.cols() != stats.channels())
        throw ShapeError("series has " + std::to_string(series.cols()) +
                         " channels, norm stats have " + std::to_string(stats.channels()));
    Series out(series.rows(), series.cols());
    for (Eigen::Index c = 0; c < series.cols(); ++c) {
        const double span = stats.max[c] - stats.min[c];
        if (span == 0.0) {
            out.col(c).setZero();
        } else {
            out.col(c) = (series.col(c).array() - stats.min[c]) / span;
        }
    }
    return out;
}

Dataset apply_normalizer(const Dataset& ds, const NormStats& stats) {
    if (ds.meta.channels() != stats.channels())
        throw ShapeError("dataset has " + std::to_string(ds.meta.channels()) +
                         " channels, norm stats have " + std::to_string(stats.channels()));
    Dataset out;
    out.meta = ds.meta;
    out.meta.norm_stats = stats;
    out.instances.reserve(ds.size());
    for (const auto& inst : ds.instances) {
        TimeSeriesInstance n = inst;
        n.series = apply_normalizer(inst.series, stats);
        out.instances.push_back(std::move(n));
    }
    return out;
}

Series invert_normalizer(const Series& normalized, const NormStats& stats) {
    if (normalized.cols() != stats.channels()) throw ShapeError("channel count mismatch");
    Series out(normalized.rows(), normalized.cols());
    for (Eigen::Index c = 0; c < normalized.cols(); ++c) {
        const double span = stats.max[c] - stats.min[c];
        out.col(c) = normalized.col(c).array() * span + stats.min[c];
    }
    return out;
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>>
split_ids(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw RangeError("train_fraction must lie in (0, 1)");
    std::vector<std::int64_t> ids;
    ids.reserve(ds.size());
    for (const auto& inst : ds.instances) ids.push_back(inst.id);
    Rng rng(seed);
    rng.shuffle(std::span(ids));
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(ids.size()) * train_fraction));
    std::vector<std::int64_t> first(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::int64_t> second(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    return {std::move(first), std::move(second)};
}

Dataset subset(const Dataset& ds, const std::vector<std::int64_t>& ids) {
    std::unordered_map<std::int64_t, std::size_t> index;
    index.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) index.emplace(ds.instances[i].id, i);
    Dataset out;
    out.meta = ds.meta;
    out.instances.reserve(ids.size());
    for (auto id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw RangeError("id " + std::to_string(id) + " not in dataset");
        out.instances.push_back(ds.instances[it->second]);
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
    auto [a, b] = split_ids(ds, train_fraction, seed);
    return {subset(ds, a), subset(ds, b)};
}

}  // namespace core
}  // namespace stvs
