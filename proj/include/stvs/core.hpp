#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stvs {

enum class Class : int { Stable = 0, Unstable = 1 };

std::string_view to_string(Class c);
Class class_from_string(std::string_view s);

/// m time steps by 3L channels. Each row holds U_1..U_L, P_1..P_L, Q_1..Q_L.
using Series = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace core {

struct ScenarioParams {
    double load_level = 1.0;
    double motor_fraction = 0.8;
    int fault_line = 0;
    double fault_position = 0.0;
    double fault_time_s = 0.1;
    double clear_time_s = 0.15;  // clearing delay after inception

    void validate() const;
    friend bool operator==(const ScenarioParams&, const ScenarioParams&) = default;
};

struct TimeSeriesInstance {
    std::int64_t id = 0;
    ScenarioParams scenario;
    Series series;
    std::optional<Class> label;
    // Generator ground truth. Learning code must never read this field.
    std::optional<Class> truth;

    Eigen::Index steps() const { return series.rows(); }
    Eigen::Index channels() const { return series.cols(); }
};

/// Per-channel min/max fitted on a training partition.
struct NormStats {
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    Eigen::Index channels() const { return min.size(); }
    void validate() const;
};

struct DatasetMeta {
    int buses = 0;          // L
    int steps = 0;          // m
    double dt_s = 0.01;
    std::optional<NormStats> norm_stats;

    int channels() const { return 3 * buses; }
};

struct Dataset {
    DatasetMeta meta;
    std::vector<TimeSeriesInstance> instances;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }

    /// Checks shared dimensions, unique ids and finiteness.
    void validate() const;
};

/// Keeps the first otw_steps rows of the series.
TimeSeriesInstance window(const TimeSeriesInstance& instance, int otw_steps);
Dataset window(const Dataset& ds, int otw_steps);

NormStats fit_normalizer(const Dataset& train);
Dataset apply_normalizer(const Dataset& ds, const NormStats& stats);
Series apply_normalizer(const Series& series, const NormStats& stats);
/// Inverse affine map for non-degenerate channels; degenerate channels map back to min.
Series invert_normalizer(const Series& normalized, const NormStats& stats);

/// Seeded shuffle then prefix/suffix split with floor(n * train_fraction) in the first part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Ids of each side of split_dataset, without copying series.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>>
split_ids(const Dataset& ds, double train_fraction, std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<std::int64_t>& ids);

}  // namespace core
}  // namespace stvs
