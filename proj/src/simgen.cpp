#include "stvs/simgen.hpp"

#include <algorithm>
#include <cmath>

#include "stvs/error.hpp"
#include "stvs/rng.hpp"

namespace stvs::simgen {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double hash01(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    const std::uint64_t h = combine_seed(combine_seed(combine_seed(a, b), c), d);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void require_nonempty(const std::vector<double>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string(name) + " must not be empty");
}

}  // namespace

void SeverityModel::validate() const {
    if (!(raw_max() > raw_min())) throw ConfigError("severity weights give an empty score range");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("severity threshold must lie in (0, 1)");
    if (!(clear_span_s > 0.0)) throw ConfigError("clear_span_s must be positive");
    if (w_load < 0 || w_motor < 0 || w_clear < 0 || w_draw < 0)
        throw ConfigError("severity weights must be non-negative");
}

std::size_t GridConfig::grid_size() const {
    return load_levels.size() * motor_fractions.size() * static_cast<std::size_t>(std::max(n_lines, 0)) *
           fault_positions.size() * clear_times_s.size();
}

void GridConfig::validate() const {
    if (buses < 2) throw ConfigError("L (buses) must be at least 2");
    if (n_lines < 1) throw ConfigError("n_lines must be at least 1");
    if (steps < 12) throw ConfigError("m (steps) must be at least 12");
    if (!(dt_s > 0.0)) throw ConfigError("dt_s must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
    if (samples < 0) throw ConfigError("samples must be non-negative");
    require_nonempty(load_levels, "load_levels");
    require_nonempty(motor_fractions, "motor_fractions");
    require_nonempty(fault_positions, "fault_positions");
    require_nonempty(clear_times_s, "clear_times_s");
    severity.validate();
    for (const auto& s : enumerate_scenarios(*this)) s.validate();
}

std::vector<core::ScenarioParams> enumerate_scenarios(const GridConfig& cfg) {
    std::vector<core::ScenarioParams> out;
    out.reserve(cfg.grid_size());
    for (double load : cfg.load_levels)
        for (double motor : cfg.motor_fractions)
            for (int line = 0; line < cfg.n_lines; ++line)
                for (double pos : cfg.fault_positions)
                    for (double clear : cfg.clear_times_s) {
                        core::ScenarioParams s;
                        s.load_level = load;
                        s.motor_fraction = motor;
                        s.fault_line = line;
                        s.fault_position = pos;
                        s.fault_time_s = cfg.fault_time_s;
                        s.clear_time_s = clear;
                        out.push_back(s);
                    }
    return out;
}

StabilityOutcome severity_score(const core::ScenarioParams& s, double rng_draw,
                                const SeverityModel& model) {
    const double raw = model.w_load * s.load_level + model.w_motor * s.motor_fraction +
                       model.w_clear * (s.clear_time_s - model.clear_base_s) / model.clear_span_s +
                       model.w_draw * rng_draw;
    const double sigma = clamp01((raw - model.raw_min()) / (model.raw_max() - model.raw_min()));
    StabilityOutcome out;
    out.score = sigma;
    if (sigma > model.threshold) {
        out.cls = Class::Unstable;
        out.severity = (sigma - model.threshold) / (1.0 - model.threshold);
    } else {
        out.cls = Class::Stable;
        out.severity = (model.threshold - sigma) / model.threshold;
    }
    out.severity = clamp01(out.severity);
    return out;
}

std::vector<double> electrical_distance(const core::ScenarioParams& s, const GridConfig& cfg) {
    // Buses sit on a ring; the fault point walks around it line by line.
    const double ring = static_cast<double>(cfg.buses);
    const double x = (s.fault_line + s.fault_position) * ring / cfg.n_lines;
    const auto pos_key = static_cast<std::uint64_t>(std::llround(s.fault_position * 1e6));
    std::vector<double> e(static_cast<std::size_t>(cfg.buses));
    for (int b = 0; b < cfg.buses; ++b) {
        const double gap = std::abs(b - x);
        const double rd = std::min(gap, ring - gap) / (ring / 2.0);
        const double h = hash01(cfg.seed, static_cast<std::uint64_t>(b),
                                static_cast<std::uint64_t>(s.fault_line), pos_key);
        e[static_cast<std::size_t>(b)] = clamp01(0.7 * rd + 0.3 * h);
    }
    return e;
}

Series trajectory_template(const core::ScenarioParams& s, const StabilityOutcome& outcome,
                           const GridConfig& cfg) {
    const int L = cfg.buses;
    const int m = cfg.steps;
    const double span = (m - 1) * cfg.dt_s;
    const double c = s.clear_time_s;
    const double mf = s.motor_fraction;
    const double sev = outcome.severity;
    const double load_drop = 0.04 * clamp01((s.load_level - 0.8) / 0.4);
    const auto e = electrical_distance(s, cfg);

    Series out(m, 3 * L);
    for (int b = 0; b < L; ++b) {
        const double eb = e[static_cast<std::size_t>(b)];
        const double u_fault = 0.3 + 0.3 * eb;
        const double u_final = 1.0 - load_drop - 0.04 * (1.0 - eb);
        for (int k = 0; k < m; ++k) {
            // t counts from fault inception; sampling starts at clearing.
            const double t = c + k * cfg.dt_s;
            double u, pm, qm;
            if (outcome.cls == Class::Stable) {
                const double tau_max = span / 22.0;
                const double tau_min = tau_max / 5.0;
                const double tau = tau_min + (tau_max - tau_min) * (1.0 - sev);
                u = u_final - (u_final - u_fault) * std::exp(-t / tau);
                const double tq = (0.02 + 0.06 * (1.0 - sev)) * span / 0.99;
                qm = 1.0 + (1.5 + mf) * std::exp(-(t - c) / tq);
                pm = 1.0 - (1.0 - u_fault) * std::exp(-t / (1.5 * tau));
            } else {
                const double u_stall = 0.65 - 0.2 * sev - 0.05 * (1.0 - eb);
                const double u_peak = std::min(u_stall + 0.1 + 0.1 * (1.0 - sev), 0.8);
                const double tau_r = 0.03 * span;
                const double t_s = c + span * (0.05 + 0.15 * (1.0 - sev));
                const double tau_d = span * (0.05 + 0.1 * (1.0 - sev));
                if (t < t_s) {
                    u = u_peak - (u_peak - u_fault) * std::exp(-t / tau_r);
                } else {
                    const double u_ts = u_peak - (u_peak - u_fault) * std::exp(-t_s / tau_r);
                    u = u_stall + (u_ts - u_stall) * std::exp(-(t - t_s) / tau_d);
                }
                const double surge = 1.5 + mf;
                qm = 1.0 + surge * (1.0 - std::exp(-(t - c) / (0.05 * span))) * (0.6 + 0.4 * sev) +
                     surge * std::exp(-t / tau_r);
                pm = 0.9 * u;
            }
            const double static_part = (1.0 - mf) * u * u;
            out(k, b) = u;
            out(k, L + b) = static_part + mf * pm;
            out(k, 2 * L + b) = static_part + mf * qm;
        }
    }
    return out;
}

std::uint64_t instance_seed(const GridConfig& cfg, std::int64_t id) {
    return combine_seed(cfg.seed, static_cast<std::uint64_t>(id));
}

core::TimeSeriesInstance simulate_trajectory(const core::ScenarioParams& s,
                                             const StabilityOutcome& outcome,
                                             const GridConfig& cfg, std::uint64_t seed) {
    core::TimeSeriesInstance inst;
    inst.scenario = s;
    inst.truth = outcome.cls;
    inst.series = trajectory_template(s, outcome, cfg);
    if (cfg.noise_sigma > 0.0) {
        // Skip the draw already spent on the severity score.
        Rng rng(seed);
        (void)rng.uniform();
        for (Eigen::Index k = 0; k < inst.series.rows(); ++k)
            for (Eigen::Index ch = 0; ch < inst.series.cols(); ++ch)
                inst.series(k, ch) += cfg.noise_sigma * rng.truncated_normal(3.0);
    }
    inst.series.leftCols(cfg.buses) =
        inst.series.leftCols(cfg.buses).cwiseMax(1e-3).cwiseMin(1.3 - 1e-3);
    return inst;
}

core::Dataset generate_dataset(const GridConfig& cfg) {
    cfg.validate();
    const auto scenarios = enumerate_scenarios(cfg);
    const std::size_t g = scenarios.size();
    const std::size_t n = cfg.samples == 0 ? g : static_cast<std::size_t>(cfg.samples);

    core::Dataset ds;
    ds.meta.buses = cfg.buses;
    ds.meta.steps = cfg.steps;
    ds.meta.dt_s = cfg.dt_s;
    ds.instances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Larger requests cycle through the grid; smaller ones stride evenly across it.
        const std::size_t pick = n >= g ? i % g : (i * g) / n;
        const auto id = static_cast<std::int64_t>(i);
        const auto seed = instance_seed(cfg, id);
        Rng rng(seed);
        const auto outcome = severity_score(scenarios[pick], rng.uniform(), cfg.severity);
        auto inst = simulate_trajectory(scenarios[pick], outcome, cfg, seed);
        inst.id = id;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

}  // namespace stvs::simgen
