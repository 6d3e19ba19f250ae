#pragma once

#include <cstdint>
#include <vector>

#include "stvs/core.hpp"

namespace stvs::simgen {

/// Linear stress score and class threshold. The raw score is rescaled so the
/// reference corner scenarios map to 0 and 1.
struct SeverityModel {
    double w_load = 0.3;
    double w_motor = 0.4;
    double w_clear = 0.2;
    double w_draw = 0.1;
    double threshold = 0.55;
    double load_lo = 0.8, load_hi = 1.2;
    double motor_lo = 0.7, motor_hi = 0.9;
    double clear_base_s = 0.15, clear_span_s = 0.05;

    double raw_min() const { return w_load * load_lo + w_motor * motor_lo; }
    double raw_max() const { return w_load * load_hi + w_motor * motor_hi + w_clear + w_draw; }
    void validate() const;
};

struct GridConfig {
    int buses = 10;  // L
    int n_lines = 4;
    std::vector<double> load_levels{0.8, 1.0, 1.2};
    std::vector<double> motor_fractions{0.7, 0.8, 0.9};
    std::vector<double> fault_positions{0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<double> clear_times_s{0.15, 0.175, 0.2};
    double fault_time_s = 0.1;
    int steps = 100;  // m
    double dt_s = 0.01;
    double noise_sigma = 0.01;
    std::uint64_t seed = 7;
    // 0 means one instance per scenario.
    int samples = 1200;
    SeverityModel severity;

    std::size_t grid_size() const;
    void validate() const;
};

struct StabilityOutcome {
    Class cls = Class::Stable;
    double severity = 0.0;  // 0 = marginal, 1 = extreme
    double score = 0.0;     // rescaled stress sigma in [0, 1]
};

/// Cartesian product, nested as load, motor, line, position, clear time
/// (last list varies fastest).
std::vector<core::ScenarioParams> enumerate_scenarios(const GridConfig& cfg);

StabilityOutcome severity_score(const core::ScenarioParams& s, double rng_draw,
                                const SeverityModel& model = {});

/// Per-bus electrical distance coefficient in [0, 1]; 0 is next to the fault.
std::vector<double> electrical_distance(const core::ScenarioParams& s, const GridConfig& cfg);

/// Noise-free U/P/Q template for one scenario.
Series trajectory_template(const core::ScenarioParams& s, const StabilityOutcome& outcome,
                           const GridConfig& cfg);

core::TimeSeriesInstance simulate_trajectory(const core::ScenarioParams& s,
                                             const StabilityOutcome& outcome,
                                             const GridConfig& cfg, std::uint64_t instance_seed);

/// Seed used for instance `id`; the first uniform draw of its Rng feeds severity_score.
std::uint64_t instance_seed(const GridConfig& cfg, std::int64_t id);

core::Dataset generate_dataset(const GridConfig& cfg);

}  // namespace stvs::simgen
