#include "stvs/report.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "stvs/dataset_io.hpp"
#include "stvs/svg.hpp"

namespace stvs::report {

using nlohmann::json;

namespace {

std::string fmt(double v) { return json(v).dump(); }

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<std::string> model_order(const EvaluationReport& r) {
    std::vector<std::string> names;
    for (const char* m : {"lstm", "dt", "svm"})
        if (std::any_of(r.rows.begin(), r.rows.end(), [&](const auto& row) { return row.model == m; }))
            names.emplace_back(m);
    for (const auto& row : r.rows)
        if (std::find(names.begin(), names.end(), row.model) == names.end()) names.push_back(row.model);
    return names;
}

std::set<int> otws(const EvaluationReport& r) {
    std::set<int> s;
    for (const auto& row : r.rows) s.insert(row.otw_steps);
    return s;
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

}  // namespace

const std::vector<ReferenceRow>& published_reference() {
    static const std::vector<ReferenceRow> rows{
        {"lstm", 3, 95.08, 0.9479, 0.9855}, {"lstm", 6, 96.72, 0.9651, 0.9936},
        {"lstm", 9, 97.54, 0.9738, 0.9954}, {"lstm", 12, 98.36, 0.9825, 0.9963},
        {"dt", 3, 92.21, 0.9183, 0.9392},   {"dt", 6, 93.03, 0.9269, 0.9459},
        {"dt", 9, 93.44, 0.9313, 0.9482},   {"dt", 12, 93.44, 0.9313, 0.9482},
        {"svm", 3, 87.70, 0.8646, 0.9509},  {"svm", 6, 87.70, 0.8646, 0.9672},
        {"svm", 9, 87.70, 0.8646, 0.9757},  {"svm", 12, 87.70, 0.8646, 0.9781},
    };
    return rows;
}

json to_json(const EvaluationReport& r) {
    json rows = json::array();
    json rocs = json::object();
    for (const auto& row : r.rows) {
        json ref = nullptr;
        for (const auto& p : published_reference())
            if (row.model == p.model && row.otw_steps == p.otw_steps)
                ref = {{"accuracy", p.accuracy_pct / 100.0}, {"f1", p.f1}, {"auc", p.auc}};
        rows.push_back({{"model", row.model},
                        {"otw_steps", row.otw_steps},
                        {"checkpoint", row.checkpoint},
                        {"n", row.cm.total()},
                        {"confusion", {{"tp", row.cm.tp}, {"fp", row.cm.fp}, {"fn", row.cm.fn}, {"tn", row.cm.tn}}},
                        {"accuracy", row.accuracy},
                        {"f1", opt(row.f1)},
                        {"f1_rate_harmonic", opt(row.f1_rate_harmonic)},
                        {"auc", opt(row.auc)},
                        {"truth_accuracy", opt(row.truth_accuracy)},
                        {"published_reference", ref}});
        json pts = json::array();
        for (const auto& p : row.roc.points)
            pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", std::isinf(p.threshold) ? json("inf") : json(p.threshold)}});
        rocs[row.model + "_otw" + std::to_string(row.otw_steps)] = std::move(pts);
    }
    return json{{"split", r.split}, {"dataset", r.dataset}, {"rows", std::move(rows)}, {"roc", std::move(rocs)}};
}

std::string table_csv(const EvaluationReport& r) {
    std::string out = "model,otw_steps,n,tp,fp,fn,tn,accuracy,f1,auc,f1_rate_harmonic,truth_accuracy\n";
    for (const auto& row : r.rows) {
        out += row.model + "," + std::to_string(row.otw_steps) + "," + std::to_string(row.cm.total()) + "," +
               std::to_string(row.cm.tp) + "," + std::to_string(row.cm.fp) + "," + std::to_string(row.cm.fn) + "," +
               std::to_string(row.cm.tn) + "," + fmt(row.accuracy) + "," + fmt(row.f1) + "," + fmt(row.auc) + "," +
               fmt(row.f1_rate_harmonic) + "," + fmt(row.truth_accuracy) + "\n";
    }
    return out;
}

std::string roc_csv(const EvalRow& row) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : row.roc.points)
        out += (std::isinf(p.threshold) ? std::string("inf") : fmt(p.threshold)) + "," + fmt(p.fpr) + "," +
               fmt(p.tpr) + "\n";
    return out;
}

std::string history_csv(const lstm::TrainHistory& h) {
    std::string out = "epoch,loss,accuracy\n";
    for (const auto& e : h) out += std::to_string(e.epoch) + "," + fmt(e.loss) + "," + fmt(e.accuracy) + "\n";
    return out;
}

std::string accuracy_svg(const EvaluationReport& r) {
    const auto steps = otws(r);
    svg::Axes a;
    a.title = "Accuracy vs observation window";
    a.x_label = "OTW (steps)";
    a.y_label = "accuracy";
    a.x_min = steps.empty() ? 0 : *steps.begin() - 1;
    a.x_max = steps.empty() ? 1 : *steps.rbegin() + 1;
    double lo = 1.0;
    std::vector<svg::Series> series;
    for (const auto& m : model_order(r)) {
        svg::Series s{upper(m), {}, false};
        for (const auto& row : r.rows)
            if (row.model == m) {
                s.points.emplace_back(row.otw_steps, row.accuracy);
                lo = std::min(lo, row.accuracy);
            }
        std::sort(s.points.begin(), s.points.end());
        series.push_back(std::move(s));
    }
    for (const auto& m : model_order(r)) {
        svg::Series s{upper(m) + " (published)", {}, true};
        for (const auto& p : published_reference())
            if (p.model == m && steps.count(p.otw_steps)) {
                s.points.emplace_back(p.otw_steps, p.accuracy_pct / 100.0);
                lo = std::min(lo, p.accuracy_pct / 100.0);
            }
        if (!s.points.empty()) series.push_back(std::move(s));
    }
    a.y_min = std::max(0.0, std::floor(lo * 20.0 - 1.0) / 20.0);
    a.y_max = 1.0;
    return svg::line_chart(a, series);
}

std::string roc_svg(const EvaluationReport& r, int otw_steps) {
    svg::Axes a;
    a.title = "ROC, OTW = " + std::to_string(otw_steps) + " steps";
    a.x_label = "false positive rate";
    a.y_label = "true positive rate";
    std::vector<svg::Series> series;
    for (const auto& m : model_order(r))
        for (const auto& row : r.rows)
            if (row.model == m && row.otw_steps == otw_steps && !row.roc.points.empty()) {
                svg::Series s{upper(m), {}, false};
                for (const auto& p : row.roc.points) s.points.emplace_back(p.fpr, p.tpr);
                series.push_back(std::move(s));
            }
    series.push_back({"chance", {{0.0, 0.0}, {1.0, 1.0}}, true});
    return svg::line_chart(a, series, false);
}

std::string f1_svg(const EvaluationReport& r) {
    svg::Axes a;
    a.title = "F1 score by model and window";
    a.x_label = "OTW (steps)";
    a.y_label = "F1";
    const auto names = model_order(r);
    std::vector<std::string> labels;
    for (const auto& n : names) labels.push_back(upper(n));
    std::vector<svg::BarGroup> groups;
    double lo = 1.0;
    for (int k : otws(r)) {
        svg::BarGroup g{std::to_string(k), {}};
        for (const auto& n : names) {
            double v = 0.0;
            for (const auto& row : r.rows)
                if (row.model == n && row.otw_steps == k && row.f1) v = *row.f1;
            lo = std::min(lo, v);
            g.values.push_back(v);
        }
        groups.push_back(std::move(g));
    }
    a.y_min = std::max(0.0, std::floor(lo * 10.0 - 1.0) / 10.0);
    return svg::bar_chart(a, labels, groups);
}

std::string history_svg(const EvalRow& row) {
    svg::Axes a;
    a.title = upper(row.model) + " training, OTW = " + std::to_string(row.otw_steps);
    a.x_label = "epoch";
    a.y_label = "loss / test accuracy";
    a.x_min = 0;
    a.x_max = row.history.empty() ? 1 : row.history.back().epoch;
    svg::Series loss{"train loss", {}, false}, acc{"test accuracy", {}, false};
    double hi = 1.0;
    for (const auto& e : row.history) {
        loss.points.emplace_back(e.epoch, e.loss);
        hi = std::max(hi, e.loss);
        if (e.accuracy) acc.points.emplace_back(e.epoch, *e.accuracy);
    }
    a.y_max = std::ceil(hi * 10.0) / 10.0;
    return svg::line_chart(a, {loss, acc}, row.history.size() <= 40);
}

std::vector<std::filesystem::path> write_all(const EvaluationReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        io::write_text(dir / name, text);
        written.push_back(dir / name);
    };
    put("report.json", to_json(r).dump(2) + "\n");
    put("table.csv", table_csv(r));
    for (const auto& row : r.rows) {
        const auto tag = row.model + "_otw" + std::to_string(row.otw_steps);
        put("roc_" + tag + ".csv", roc_csv(row));
        if (row.model == "lstm" && !row.history.empty()) {
            put("history_" + tag + ".csv", history_csv(row.history));
            put("history_" + tag + ".svg", history_svg(row));
        }
    }
    put("accuracy_vs_otw.svg", accuracy_svg(r));
    for (int k : otws(r)) put("roc_otw" + std::to_string(k) + ".svg", roc_svg(r, k));
    put("f1_bars.svg", f1_svg(r));
    return written;
}

}  // namespace stvs::report
