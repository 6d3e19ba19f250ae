#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stvs/core.hpp"
#include "stvs/lstm.hpp"

namespace stvs::baselines {

using Prediction = lstm::Prediction;

struct FlatSample {
    Eigen::VectorXd features;  // time-major: step 0 channels, step 1 channels, ...
    Class label = Class::Stable;
};

/// Row-major flatten of the first otw_steps rows.
Eigen::VectorXd flatten_series(const Series& series, int otw_steps);
FlatSample flatten(const core::TimeSeriesInstance& instance, int otw_steps);
std::vector<FlatSample> flatten_all(const core::Dataset& ds, int otw_steps);

struct CartNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int n_stable = 0;
    int n_unstable = 0;
    int depth = 0;

    bool is_leaf() const { return feature < 0; }
};

struct CartTree {
    std::vector<CartNode> nodes;  // nodes[0] is the root
    int n_features = 0;
    int max_depth = 8;
    int min_leaf = 5;

    int depth() const;
    int leaf_count() const;
    void validate() const;
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // size-weighted child Gini
};

double gini(int n_stable, int n_unstable);

/// Best split of the given rows, or feature -1 when no split satisfies min_leaf.
SplitChoice best_split(const std::vector<FlatSample>& samples, const std::vector<std::size_t>& rows,
                       int min_leaf);

/// `seed` is unused: the split search is exhaustive and tie-breaks are fixed.
CartTree train_cart(const std::vector<FlatSample>& samples, int max_depth = 8, int min_leaf = 5,
                    std::uint64_t seed = 0);
Prediction predict_cart(const CartTree& tree, const Eigen::VectorXd& features);

struct LinearSvm {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double lambda = 1e-4;
    int epochs = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Pegasos: step 1/(lambda t), bias folded in as a constant feature.
LinearSvm train_svm(const std::vector<FlatSample>& samples, double lambda = 1e-4, int epochs = 50,
                    std::uint64_t seed = 0);
double svm_margin(const LinearSvm& model, const Eigen::VectorXd& features);
Prediction predict_svm(const LinearSvm& model, const Eigen::VectorXd& features);

/// lambda/2 |[w, b]|^2 + mean hinge loss.
double svm_objective(const LinearSvm& model, const std::vector<FlatSample>& samples);

}  // namespace stvs::baselines
