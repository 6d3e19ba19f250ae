#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "stvs/checkpoint.hpp"
#include "stvs/metrics.hpp"
#include "stvs/report.hpp"
#include "stvs/semilabel.hpp"
#include "stvs/simgen.hpp"

namespace stvs::cli {

namespace fs = std::filesystem;

/// Provenance record written next to every pipeline output.
class RunManifest {
public:
    explicit RunManifest(std::string command);

    void set_config(nlohmann::json config) { config_ = std::move(config); }
    void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
    void add_input(const fs::path& p);
    void add_output(const fs::path& p);
    void add_timing(const std::string& stage, double seconds) { timings_[stage] = seconds; }
    void set_summary(nlohmann::json summary) { summary_ = std::move(summary); }

    nlohmann::json to_json() const;
    void write(const fs::path& path) const;

private:
    std::string command_;
    nlohmann::json config_ = nlohmann::json::object();
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    nlohmann::json outputs_ = nlohmann::json::array();
    nlohmann::json timings_ = nlohmann::json::object();
    nlohmann::json summary_ = nlohmann::json::object();
};

fs::path manifest_path(const fs::path& output);

nlohmann::json grid_to_json(const simgen::GridConfig& cfg);

struct GenerateOptions {
    simgen::GridConfig grid;
    fs::path out;
};

struct GenerateSummary {
    std::size_t instances = 0;
    std::size_t scenarios = 0;
    std::size_t stable = 0;
    std::size_t unstable = 0;
};

GenerateSummary run_generate(const GenerateOptions& opt, std::ostream& out);

struct LabelOptions {
    fs::path in;
    fs::path out;
    semilabel::SeedThresholds thresholds;
    int max_iter = 100;
    std::uint64_t seed = 0;
};

struct LabelSummary {
    std::size_t seed_stable = 0;
    std::size_t seed_unstable = 0;
    std::size_t must_links = 0;
    std::size_t cannot_links = 0;
    int iterations = 0;
    bool converged = false;
    std::size_t labeled_stable = 0;
    std::size_t labeled_unstable = 0;
    std::size_t overwritten = 0;
    std::optional<double> truth_agreement;
};

LabelSummary run_label(const LabelOptions& opt, std::ostream& out);

struct TrainOptions {
    fs::path dataset;
    checkpoint::ModelKind kind = checkpoint::ModelKind::Lstm;
    int otw_steps = 12;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 1;
    lstm::TrainConfig lstm;
    int cart_max_depth = 8;
    int cart_min_leaf = 5;
    double svm_lambda = 1e-4;
    int svm_epochs = 50;
    std::uint64_t seed = 0;  // model seed (lstm init/shuffle/dropout, svm order)
    fs::path out;
};

/// Checkpoint plus `<out>.history.csv` and `<out>.manifest.json`.
checkpoint::Checkpoint run_train(const TrainOptions& opt, std::ostream& out);

enum class EvalSplit { Test, Train, All };
EvalSplit eval_split_from_string(const std::string& s);
std::string to_string(EvalSplit s);

struct EvaluateOptions {
    std::vector<fs::path> checkpoints;
    fs::path dataset;
    std::vector<int> otw_steps;
    EvalSplit split = EvalSplit::Test;
    fs::path out_dir;
};

report::EvaluationReport run_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);

struct AssessOptions {
    fs::path checkpoint;
    fs::path dataset;
    bool stream = false;
    int min_otw = 3;
    std::optional<std::int64_t> id;
};

struct AssessSummary {
    std::size_t assessed = 0;
    std::size_t skipped = 0;
    std::size_t lines = 0;
};

/// One JSON object per line on `out`; skips and warnings go to `err`.
AssessSummary run_assess(const AssessOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace stvs::cli
