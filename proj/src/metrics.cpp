#include "stvs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stvs/error.hpp"

namespace stvs::metrics {

using Denom = UndefinedMetricError::Denominator;

ConfusionMatrix confusion(std::span<const Class> preds, std::span<const Class> labels) {
    if (preds.size() != labels.size())
        throw ShapeError("confusion needs equal lengths, got " + std::to_string(preds.size()) + " and " +
                         std::to_string(labels.size()));
    if (preds.empty()) throw EmptyInputError("confusion needs at least one sample");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool ps = preds[i] == Class::Stable;
        const bool as = labels[i] == Class::Stable;
        if (ps && as) ++cm.tp;
        else if (ps) ++cm.fp;
        else if (as) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw EmptyInputError("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double tpr(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) throw UndefinedMetricError(Denom::ActualPositive, "TPR undefined: no stable samples");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double fpr(const ConfusionMatrix& cm) {
    if (cm.fp + cm.tn == 0) throw UndefinedMetricError(Denom::ActualNegative, "FPR undefined: no unstable samples");
    return static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn);
}

double precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0)
        throw UndefinedMetricError(Denom::PredictedPositive, "precision undefined: nothing predicted stable");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
}

double recall(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) throw UndefinedMetricError(Denom::ActualPositive, "recall undefined: no stable samples");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double f1(const ConfusionMatrix& cm, F1Mode mode) {
    if (mode == F1Mode::Standard) {
        const double p = precision(cm);
        const double r = recall(cm);
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    const double a = tpr(cm);
    const double b = fpr(cm);
    if (a + b == 0.0)
        throw UndefinedMetricError(Denom::PredictedPositive, "rate-harmonic F1 undefined: TPR + FPR = 0");
    return 2.0 * a * b / (a + b);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const Class> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    std::int64_t pos = 0, neg = 0;
    for (auto c : labels) (c == Class::Stable ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw DegenerateLabelsError("ROC needs both classes in the labels");
    for (double s : scores)
        if (std::isnan(s)) throw NumericError("NaN score");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::int64_t tp = 0, fp = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        const double thr = scores[order[k]];
        // Equal scores cross the threshold together.
        while (k < order.size() && scores[order[k]] == thr) {
            (labels[order[k]] == Class::Stable ? tp : fp) += 1;
            ++k;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos), thr});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2) throw EmptyInputError("ROC curve needs at least two points");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return std::clamp(area, 0.0, 1.0);
}

}  // namespace stvs::metrics
