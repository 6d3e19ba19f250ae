#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "stvs/core.hpp"

namespace stvs::metrics {

/// Stable is the positive class.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const Class> preds, std::span<const Class> labels);

double accuracy(const ConfusionMatrix& cm);
double tpr(const ConfusionMatrix& cm);
double fpr(const ConfusionMatrix& cm);
double precision(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);

enum class F1Mode { Standard, RateHarmonic };

/// Standard: harmonic mean of precision and recall. RateHarmonic: 2 TPR FPR / (TPR + FPR).
double f1(const ConfusionMatrix& cm, F1Mode mode = F1Mode::Standard);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = std::numeric_limits<double>::infinity();  // predict Stable when score >= threshold

    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::vector<RocPoint> points;
};

/// Scores are P(Stable). One point per distinct score plus (0,0) at +inf.
RocCurve roc_curve(std::span<const double> scores, std::span<const Class> labels);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

}  // namespace stvs::metrics
