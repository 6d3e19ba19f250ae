#include "stvs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stvs/error.hpp"
#include "stvs/rng.hpp"

namespace stvs::baselines {

namespace {

constexpr double kTieTol = 1e-12;

void check_features(const std::vector<FlatSample>& samples) {
    if (samples.empty()) throw EmptyInputError("no training samples");
    const auto n = samples.front().features.size();
    for (const auto& s : samples) {
        if (s.features.size() != n) throw ShapeError("feature vectors differ in length");
        if (!s.features.allFinite()) throw NumericError("non-finite feature value");
    }
}

struct Counts {
    int stable = 0;
    int unstable = 0;
    int total() const { return stable + unstable; }
    void add(Class c) { (c == Class::Stable ? stable : unstable) += 1; }
};

Counts count_rows(const std::vector<FlatSample>& samples, const std::vector<std::size_t>& rows) {
    Counts c;
    for (auto r : rows) c.add(samples[r].label);
    return c;
}

}  // namespace

Eigen::VectorXd flatten_series(const Series& series, int otw_steps) {
    if (otw_steps < 1 || otw_steps > series.rows())
        throw RangeError("otw_steps " + std::to_string(otw_steps) + " outside [1, " + std::to_string(series.rows()) + "]");
    // Series is row-major, so the leading rows are already contiguous in time-major order.
    return Eigen::Map<const Eigen::VectorXd>(series.data(), static_cast<Eigen::Index>(otw_steps) * series.cols());
}

FlatSample flatten(const core::TimeSeriesInstance& instance, int otw_steps) {
    if (!instance.label) throw MissingLabelError("instance " + std::to_string(instance.id) + " has no label");
    return {flatten_series(instance.series, otw_steps), *instance.label};
}

std::vector<FlatSample> flatten_all(const core::Dataset& ds, int otw_steps) {
    std::vector<FlatSample> out;
    out.reserve(ds.size());
    for (const auto& inst : ds.instances) out.push_back(flatten(inst, otw_steps));
    return out;
}

double gini(int n_stable, int n_unstable) {
    const int n = n_stable + n_unstable;
    if (n == 0) return 0.0;
    const double ps = static_cast<double>(n_stable) / n;
    const double pu = static_cast<double>(n_unstable) / n;
    return 1.0 - ps * ps - pu * pu;
}

SplitChoice best_split(const std::vector<FlatSample>& samples, const std::vector<std::size_t>& rows, int min_leaf) {
    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    if (rows.empty()) return best;
    const Counts all = count_rows(samples, rows);
    const int n = all.total();
    const auto n_features = samples.front().features.size();
    std::vector<std::size_t> sorted(rows);
    for (Eigen::Index f = 0; f < n_features; ++f) {
        std::sort(sorted.begin(), sorted.end(), [&](auto a, auto b) {
            return samples[a].features[f] < samples[b].features[f];
        });
        Counts left;
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            left.add(samples[sorted[k]].label);
            const double v = samples[sorted[k]].features[f];
            const double next = samples[sorted[k + 1]].features[f];
            if (next == v) continue;
            const int nl = left.total();
            const int nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const double imp = (nl * gini(left.stable, left.unstable) +
                                nr * gini(all.stable - left.stable, all.unstable - left.unstable)) /
                               n;
            // Features and thresholds are visited in ascending order, so only a
            // strict improvement can displace the incumbent.
            if (imp < best.impurity - kTieTol) {
                best.feature = static_cast<int>(f);
                best.threshold = v + (next - v) / 2.0;
                best.impurity = imp;
            }
        }
    }
    return best;
}

CartTree train_cart(const std::vector<FlatSample>& samples, int max_depth, int min_leaf, std::uint64_t /*seed*/) {
    check_features(samples);
    if (max_depth < 0) throw RangeError("max_depth must be non-negative");
    if (min_leaf < 1) throw RangeError("min_leaf must be at least 1");
    CartTree tree;
    tree.n_features = static_cast<int>(samples.front().features.size());
    tree.max_depth = max_depth;
    tree.min_leaf = min_leaf;

    struct Pending {
        int node;
        std::vector<std::size_t> rows;
    };
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, std::move(all)}};
    while (!stack.empty()) {
        auto [id, rows] = std::move(stack.back());
        stack.pop_back();
        const Counts c = count_rows(samples, rows);
        tree.nodes[static_cast<std::size_t>(id)].n_stable = c.stable;
        tree.nodes[static_cast<std::size_t>(id)].n_unstable = c.unstable;
        const int depth = tree.nodes[static_cast<std::size_t>(id)].depth;
        if (depth >= max_depth || c.stable == 0 || c.unstable == 0) continue;
        const auto split = best_split(samples, rows, min_leaf);
        if (split.feature < 0 || !(split.impurity < gini(c.stable, c.unstable) - kTieTol)) continue;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows)
            (samples[r].features[split.feature] <= split.threshold ? lrows : rrows).push_back(r);
        const int left = static_cast<int>(tree.nodes.size());
        const int right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(left)].depth = depth + 1;
        tree.nodes[static_cast<std::size_t>(right)].depth = depth + 1;
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        stack.push_back({right, std::move(rrows)});
        stack.push_back({left, std::move(lrows)});
    }
    return tree;
}

Prediction predict_cart(const CartTree& tree, const Eigen::VectorXd& features) {
    if (tree.nodes.empty()) throw ShapeError("empty tree");
    if (features.size() != tree.n_features)
        throw ShapeError("tree expects " + std::to_string(tree.n_features) + " features, got " +
                         std::to_string(features.size()));
    const CartNode* node = &tree.nodes.front();
    while (!node->is_leaf())
        node = &tree.nodes[static_cast<std::size_t>(features[node->feature] <= node->threshold ? node->left
                                                                                               : node->right)];
    const int n = node->n_stable + node->n_unstable;
    const double score = n == 0 ? 0.5 : static_cast<double>(node->n_stable) / n;
    return {score > 0.5 ? Class::Stable : Class::Unstable, score};
}

int CartTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

int CartTree::leaf_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

void CartTree::validate() const {
    if (nodes.empty()) throw FormatError("tree has no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.n_stable < 0 || n.n_unstable < 0) throw FormatError("negative leaf count");
        if (n.is_leaf()) continue;
        if (n.feature >= n_features) throw FormatError("node " + std::to_string(i) + " splits on an invalid feature");
        const auto sz = static_cast<int>(nodes.size());
        if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= sz || n.right >= sz)
            throw FormatError("node " + std::to_string(i) + " has invalid children");
        const auto& l = nodes[static_cast<std::size_t>(n.left)];
        const auto& r = nodes[static_cast<std::size_t>(n.right)];
        if (l.n_stable + r.n_stable != n.n_stable || l.n_unstable + r.n_unstable != n.n_unstable)
            throw FormatError("node " + std::to_string(i) + " counts do not add up");
    }
}

void LinearSvm::validate() const {
    if (!weights.allFinite() || !std::isfinite(bias)) throw NumericError("svm has non-finite parameters");
    if (!(lambda > 0.0)) throw ConfigError("svm lambda must be positive");
}

LinearSvm train_svm(const std::vector<FlatSample>& samples, double lambda, int epochs, std::uint64_t seed) {
    check_features(samples);
    if (!(lambda > 0.0)) throw RangeError("lambda must be positive");
    if (epochs < 0) throw RangeError("epochs must be non-negative");
    const auto has = [&](Class c) {
        return std::any_of(samples.begin(), samples.end(), [&](const auto& s) { return s.label == c; });
    };
    if (!has(Class::Stable) || !has(Class::Unstable))
        throw DegenerateLabelsError("svm training needs both classes present");

    const auto n_features = samples.front().features.size();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n_features + 1);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::int64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (auto i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double y = samples[i].label == Class::Stable ? 1.0 : -1.0;
            const auto& x = samples[i].features;
            const double margin = y * (w.head(n_features).dot(x) + w[n_features]);
            w *= 1.0 - eta * lambda;
            if (margin < 1.0) {
                w.head(n_features) += eta * y * x;
                w[n_features] += eta * y;
            }
        }
    }
    LinearSvm model;
    model.weights = w.head(n_features);
    model.bias = w[n_features];
    model.lambda = lambda;
    model.epochs = epochs;
    model.seed = seed;
    model.validate();
    return model;
}

double svm_margin(const LinearSvm& model, const Eigen::VectorXd& features) {
    if (features.size() != model.weights.size())
        throw ShapeError("svm expects " + std::to_string(model.weights.size()) + " features, got " +
                         std::to_string(features.size()));
    return model.weights.dot(features) + model.bias;
}

Prediction predict_svm(const LinearSvm& model, const Eigen::VectorXd& features) {
    const double margin = svm_margin(model, features);
    const double score = 1.0 / (1.0 + std::exp(-margin));
    return {margin > 0.0 ? Class::Stable : Class::Unstable, score};
}

double svm_objective(const LinearSvm& model, const std::vector<FlatSample>& samples) {
    if (samples.empty()) throw EmptyInputError("no samples");
    double hinge = 0.0;
    for (const auto& s : samples) {
        const double y = s.label == Class::Stable ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * svm_margin(model, s.features));
    }
    const double reg = model.weights.squaredNorm() + model.bias * model.bias;
    return 0.5 * model.lambda * reg + hinge / static_cast<double>(samples.size());
}

}  // namespace stvs::baselines
