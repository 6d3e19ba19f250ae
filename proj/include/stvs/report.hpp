#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "stvs/lstm.hpp"
#include "stvs/metrics.hpp"

namespace stvs::report {

struct EvalRow {
    std::string model;  // lstm, dt, svm
    int otw_steps = 0;
    std::string checkpoint;
    metrics::ConfusionMatrix cm;
    double accuracy = 0.0;
    std::optional<double> f1;
    std::optional<double> f1_rate_harmonic;
    std::optional<double> auc;
    std::optional<double> truth_accuracy;  // only when generator truth is present
    metrics::RocCurve roc;
    lstm::TrainHistory history;
};

struct EvaluationReport {
    std::string split;  // test, train or all
    std::string dataset;
    std::vector<EvalRow> rows;
};

/// Published accuracy (%), F1 and AUC figures for the three classifiers at
/// 3, 6, 9 and 12 steps, used only as chart and table annotations.
struct ReferenceRow {
    const char* model;
    int otw_steps;
    double accuracy_pct;
    double f1;
    double auc;
};
const std::vector<ReferenceRow>& published_reference();

nlohmann::json to_json(const EvaluationReport& r);
std::string table_csv(const EvaluationReport& r);
std::string roc_csv(const EvalRow& row);
std::string history_csv(const lstm::TrainHistory& h);

std::string accuracy_svg(const EvaluationReport& r);
std::string roc_svg(const EvaluationReport& r, int otw_steps);
std::string f1_svg(const EvaluationReport& r);
std::string history_svg(const EvalRow& row);

/// Writes report.json, table.csv, roc_<model>_otw<k>.csv and the SVG charts.
std::vector<std::filesystem::path> write_all(const EvaluationReport& r, const std::filesystem::path& dir);

}  // namespace stvs::report
